use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::lti::Channel;
use crate::stochsim::SignalBundle;

pub const WINDOW_ID: &str = "hann_periodic";
const GROUP: usize = 4;

/// Auto or cross spectral density on `(0, pi/dt]`, two-sided, per rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub omega: Vec<f64>,
    pub values: Vec<Complex64>,
    pub nperseg: usize,
    pub overlap: f64,
    pub window_id: String,
    pub segments_used: usize,
}

impl SpectralEstimate {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn conj(&self) -> SpectralEstimate {
        SpectralEstimate {
            values: self.values.iter().map(|v| v.conj()).collect(),
            ..self.clone()
        }
    }

    pub fn same_grid(&self, other: &SpectralEstimate) -> bool {
        self.omega == other.omega
    }

    /// Variance implied by the density, `(1/pi) int_0^inf phi`.
    pub fn variance(&self) -> f64 {
        let dw = self.omega.first().copied().unwrap_or(0.0);
        self.values.iter().map(|v| v.re).sum::<f64>() * dw / std::f64::consts::PI
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega,re,im")?;
        for (o, v) in self.omega.iter().zip(&self.values) {
            writeln!(w, "{o:e},{:e},{:e}", v.re, v.im)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchOptions {
    /// `None` picks `2^ceil(log2(len/64))`.
    pub nperseg: Option<usize>,
    pub overlap: f64,
}

impl Default for WelchOptions {
    fn default() -> Self {
        WelchOptions {
            nperseg: None,
            overlap: 0.5,
        }
    }
}

pub fn default_nperseg(len: usize) -> usize {
    (len as f64 / 64.0).max(1.0).log2().ceil().exp2() as usize
}

/// Spectral matrix of several channels from one pass over the segments,
/// kept as two half-record sums.
#[derive(Debug, Clone)]
pub struct CrossSpectra {
    pub omega: Vec<f64>,
    pub dt: f64,
    pub nperseg: usize,
    pub overlap: f64,
    pub channels: Vec<Channel>,
    half_counts: [usize; 2],
    // upper-triangular pair index -> per-bin sums
    half_sums: [Vec<Vec<Complex64>>; 2],
    scale: f64,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + j
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos())
        .collect()
}

impl CrossSpectra {
    pub fn compute(bundle: &SignalBundle, channels: &[Channel], opts: WelchOptions) -> Result<Self, SpectralError> {
        let data: Vec<&[f64]> = channels
            .iter()
            .map(|&c| bundle.steady(c).map_err(|_| SpectralError::MissingChannel(c.name())))
            .collect::<Result<_, _>>()?;
        let len = data.first().map_or(0, |d| d.len());
        let nperseg = opts.nperseg.unwrap_or_else(|| default_nperseg(len));
        if !(0.0..=0.9).contains(&opts.overlap) {
            return Err(SpectralError::InvalidParameter(format!(
                "overlap {} outside [0, 0.9]",
                opts.overlap
            )));
        }
        if nperseg < 8 || nperseg * 4 > len {
            return Err(SpectralError::TooShort { len, nperseg });
        }
        let step = ((nperseg as f64 * (1.0 - opts.overlap)).round() as usize).max(1);
        let nseg = (len - nperseg) / step + 1;
        let split = nseg / 2;
        let window = hann(nperseg);
        let wsum2: f64 = window.iter().map(|w| w * w).sum();
        let nbins = nperseg / 2;
        let nch = channels.len();
        let npairs = nch * (nch + 1) / 2;
        let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(nperseg);

        // fixed groups of consecutive segments, never straddling the halves
        let mut groups = Vec::new();
        for (lo, hi) in [(0, split), (split, nseg)] {
            let mut s = lo;
            while s < hi {
                groups.push((s, (s + GROUP).min(hi), usize::from(lo != 0)));
                s += GROUP;
            }
        }
        let partial: Vec<(usize, Vec<Vec<Complex64>>)> = groups
            .par_iter()
            .map(|&(s0, s1, half)| {
                let mut acc = vec![vec![Complex64::new(0.0, 0.0); nbins]; npairs];
                let mut spec = vec![vec![Complex64::new(0.0, 0.0); nperseg]; nch];
                let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                for seg in s0..s1 {
                    let off = seg * step;
                    for (buf, x) in spec.iter_mut().zip(&data) {
                        for (k, b) in buf.iter_mut().enumerate() {
                            *b = Complex64::new(x[off + k] * window[k], 0.0);
                        }
                        fft.process_with_scratch(buf, &mut scratch);
                    }
                    for i in 0..nch {
                        for j in i..nch {
                            let a = &mut acc[pair_index(nch, i, j)];
                            for k in 0..nbins {
                                a[k] += spec[i][k + 1] * spec[j][k + 1].conj();
                            }
                        }
                    }
                }
                (half, acc)
            })
            .collect();
        let mut half_sums = [
            vec![vec![Complex64::new(0.0, 0.0); nbins]; npairs],
            vec![vec![Complex64::new(0.0, 0.0); nbins]; npairs],
        ];
        for (half, acc) in partial {
            for (dst, src) in half_sums[half].iter_mut().zip(acc) {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let dw = std::f64::consts::TAU / (nperseg as f64 * bundle.dt);
        Ok(CrossSpectra {
            omega: (1..=nbins).map(|k| k as f64 * dw).collect(),
            dt: bundle.dt,
            nperseg,
            overlap: opts.overlap,
            channels: channels.to_vec(),
            half_counts: [split, nseg - split],
            half_sums,
            scale: bundle.dt / wsum2,
        })
    }

    /// Pool the segments of another record taken on the same grid and channels.
    pub fn merge(&mut self, other: &CrossSpectra) -> Result<(), SpectralError> {
        if self.omega != other.omega || self.channels != other.channels || self.scale != other.scale {
            return Err(SpectralError::GridMismatch);
        }
        for h in 0..2 {
            self.half_counts[h] += other.half_counts[h];
            for (dst, src) in self.half_sums[h].iter_mut().zip(&other.half_sums[h]) {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> usize {
        self.half_counts[0] + self.half_counts[1]
    }

    fn index(&self, a: Channel, b: Channel) -> Result<(usize, bool), SpectralError> {
        let find = |c: Channel| {
            self.channels
                .iter()
                .position(|&x| x == c)
                .ok_or(SpectralError::MissingChannel(c.name()))
        };
        let (i, j) = (find(a)?, find(b)?);
        let n = self.channels.len();
        Ok(if i <= j {
            (pair_index(n, i, j), false)
        } else {
            (pair_index(n, j, i), true)
        })
    }

    fn build(&self, a: Channel, b: Channel, halves: &[usize]) -> Result<SpectralEstimate, SpectralError> {
        let (p, flip) = self.index(a, b)?;
        let count: usize = halves.iter().map(|&h| self.half_counts[h]).sum();
        let norm = self.scale / count.max(1) as f64;
        let values = (0..self.omega.len())
            .map(|k| {
                let s: Complex64 = halves.iter().map(|&h| self.half_sums[h][p][k]).sum();
                let v = s * norm;
                if a == b {
                    Complex64::new(v.re.max(0.0), 0.0)
                } else if flip {
                    v.conj()
                } else {
                    v
                }
            })
            .collect();
        Ok(SpectralEstimate {
            omega: self.omega.clone(),
            values,
            nperseg: self.nperseg,
            overlap: self.overlap,
            window_id: WINDOW_ID.into(),
            segments_used: count,
        })
    }

    /// `phi_ab`, estimated as `X_a conj(X_b)`.
    pub fn estimate(&self, a: Channel, b: Channel) -> Result<SpectralEstimate, SpectralError> {
        self.build(a, b, &[0, 1])
    }

    /// Estimate from the first (`0`) or second (`1`) half of the record.
    pub fn half(&self, h: usize, a: Channel, b: Channel) -> Result<SpectralEstimate, SpectralError> {
        if h > 1 {
            return Err(SpectralError::InvalidParameter(format!("half index {h}")));
        }
        self.build(a, b, &[h])
    }
}

pub fn welch_spectra(
    bundle: &SignalBundle,
    pair: (Channel, Channel),
    nperseg: usize,
    overlap_fraction: f64,
) -> Result<SpectralEstimate, SpectralError> {
    let chans: Vec<Channel> = if pair.0 == pair.1 {
        vec![pair.0]
    } else {
        vec![pair.0, pair.1]
    };
    let opts = WelchOptions {
        nperseg: Some(nperseg),
        overlap: overlap_fraction,
    };
    CrossSpectra::compute(bundle, &chans, opts)?.estimate(pair.0, pair.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochsim::NormalStream;
    use std::collections::BTreeMap;

    fn white_bundle(n: usize, dt: f64) -> SignalBundle {
        let s = NormalStream::new(5);
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        s.fill(0, 0, &mut a);
        s.fill(1, 0, &mut b);
        let mut ch = BTreeMap::new();
        ch.insert(Channel::U, a);
        ch.insert(Channel::V, b);
        SignalBundle::new(dt, ch, 5, 0).unwrap()
    }

    #[test]
    fn default_segment_length() {
        assert_eq!(default_nperseg(2_000_000), 32768);
        assert_eq!(default_nperseg(64 * 1024), 1024);
    }

    #[test]
    fn white_noise_level_and_hermitian() {
        // unit-variance samples at spacing dt have density dt per rad/s
        let dt = 0.1;
        let b = white_bundle(1 << 18, dt);
        let cs = CrossSpectra::compute(&b, &[Channel::U, Channel::V], WelchOptions::default()).unwrap();
        let uu = cs.estimate(Channel::U, Channel::U).unwrap();
        assert!(uu.values.iter().all(|v| v.im == 0.0 && v.re >= 0.0));
        let mean = uu.values.iter().map(|v| v.re).sum::<f64>() / uu.len() as f64;
        assert!((mean / dt - 1.0).abs() < 0.02, "{mean}");
        assert!((uu.variance() - 1.0).abs() < 0.03);
        let uv = cs.estimate(Channel::U, Channel::V).unwrap();
        let vu = cs.estimate(Channel::V, Channel::U).unwrap();
        assert_eq!(uv.conj().values, vu.values);
        assert!((*uu.omega.last().unwrap() - std::f64::consts::PI / dt).abs() < 1e-9);
    }

    #[test]
    fn halves_sum_to_whole() {
        let b = white_bundle(1 << 14, 1.0);
        let cs = CrossSpectra::compute(&b, &[Channel::U, Channel::V], WelchOptions::default()).unwrap();
        let full = cs.estimate(Channel::U, Channel::V).unwrap();
        let h0 = cs.half(0, Channel::U, Channel::V).unwrap();
        let h1 = cs.half(1, Channel::U, Channel::V).unwrap();
        let (n0, n1) = (h0.segments_used as f64, h1.segments_used as f64);
        for k in 0..full.len() {
            let m = (h0.values[k] * n0 + h1.values[k] * n1) / (n0 + n1);
            assert!((m - full.values[k]).norm() <= 1e-12 * (1.0 + full.values[k].norm()));
        }
    }

    #[test]
    fn rejects_short_and_missing() {
        let b = white_bundle(1000, 1.0);
        assert!(matches!(
            welch_spectra(&b, (Channel::U, Channel::U), 512, 0.5),
            Err(SpectralError::TooShort { .. })
        ));
        assert!(matches!(
            welch_spectra(&b, (Channel::U, Channel::Y), 128, 0.5),
            Err(SpectralError::MissingChannel("y"))
        ));
        assert!(welch_spectra(&b, (Channel::U, Channel::V), 128, 0.95).is_err());
    }
}
