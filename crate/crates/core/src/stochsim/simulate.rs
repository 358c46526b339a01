use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::SignalBundle;
use super::discretize::{exact_discretize, psd_factor};
use super::lyapunov::stationary_covariance;
use super::rng::NormalStream;
use super::SimError;
use crate::lti::{closed_loop_system, Injection, LoopRealization, RationalTF};

/// Shaped Gaussian noise: unit white noise through `intensity * shape`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub shape: RationalTF,
    pub intensity: f64,
}

impl NoiseSpec {
    pub fn new(shape: RationalTF, intensity: f64) -> Result<Self, SimError> {
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(SimError::InvalidParameter(format!("intensity must be >= 0, got {intensity}")));
        }
        if shape.poles().iter().any(|p| p.re >= 0.0) || shape.relative_degree() < 1 {
            return Err(SimError::InvalidParameter(
                "noise shape must be strictly stable and strictly proper".into(),
            ));
        }
        Ok(NoiseSpec { shape, intensity })
    }

    /// Ornstein–Uhlenbeck shape `1/(s + a)`.
    pub fn ou(a: f64, intensity: f64) -> Result<Self, SimError> {
        if a.is_nan() || a <= 0.0 {
            return Err(SimError::InvalidParameter(format!("OU rate must be positive, got {a}")));
        }
        NoiseSpec::new(RationalTF::zpk(vec![], vec![Complex64::new(-a, 0.0)], 1.0)?, intensity)
    }

    /// Second-order lag `a^2/(s + a)^2` at unit DC gain.
    pub fn second_order(a: f64, intensity: f64) -> Result<Self, SimError> {
        if a.is_nan() || a <= 0.0 {
            return Err(SimError::InvalidParameter(format!("lag rate must be positive, got {a}")));
        }
        let p = Complex64::new(-a, 0.0);
        NoiseSpec::new(RationalTF::zpk(vec![], vec![p, p], a * a)?, intensity)
    }

    /// Second-order lag with its rate at the geometric mean of the given pole magnitudes.
    pub fn default_for_poles(poles: &[Complex64]) -> Result<Self, SimError> {
        let mags: Vec<f64> = poles.iter().map(|p| p.norm()).filter(|&m| m > 0.0).collect();
        let a = if mags.is_empty() {
            1.0
        } else {
            (mags.iter().map(|m| m.ln()).sum::<f64>() / mags.len() as f64).exp()
        };
        NoiseSpec::second_order(a, 1.0)
    }

    pub fn filter(&self) -> RationalTF {
        self.shape.mul(&RationalTF::constant(self.intensity))
    }

    /// Loop realization with the intensity on the noise input, so paths scale with it.
    pub fn loop_realization(
        &self,
        g: &RationalTF,
        c: &RationalTF,
        injection: Injection,
    ) -> Result<LoopRealization, SimError> {
        let mut lp = closed_loop_system(g, c, injection, &self.shape)?;
        lp.system.b *= self.intensity;
        Ok(lp)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimParams {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
}

impl SimParams {
    pub fn n_samples(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

const BLOCK: usize = 1 << 14;

/// Sample the loop channels on a uniform grid, starting from the stationary law.
pub fn simulate(lp: &LoopRealization, params: &SimParams) -> Result<SignalBundle, SimError> {
    let SimParams { dt, duration, seed } = *params;
    if duration.is_nan() || duration <= 0.0 || dt.is_nan() || dt <= 0.0 {
        return Err(SimError::InvalidParameter(format!(
            "duration and dt must be positive (duration {duration}, dt {dt})"
        )));
    }
    let ss = &lp.system;
    let eig = ss.eigenvalues()?;
    if !lp.stable || eig.iter().any(|l| l.re >= 0.0) {
        return Err(SimError::Unstable);
    }
    let slowest = eig.iter().map(|l| -l.re).fold(f64::INFINITY, f64::min);
    let fastest = eig.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let tau = 1.0 / slowest;
    if duration < 100.0 * tau {
        return Err(SimError::InvalidParameter(format!(
            "duration {duration} is shorter than 100 slowest time constants ({})",
            100.0 * tau
        )));
    }
    if fastest * dt > std::f64::consts::FRAC_PI_2 {
        return Err(SimError::InvalidParameter(format!(
            "dt {dt} leaves the fastest mode {fastest} rad/s too close to Nyquist"
        )));
    }
    let n_samples = params.n_samples();
    let n = ss.order();
    let disc = exact_discretize(ss, dt)?;
    let lf = &disc.noise_factor;
    let r = lf.ncols();
    let rng = NormalStream::new(seed);

    // stationary initial state on its own stream
    let p0 = stationary_covariance(ss)?;
    let f0 = psd_factor(&p0);
    let mut z0 = vec![0.0; f0.ncols()];
    rng.fill(r as u64, 0, &mut z0);
    let mut x: DVector<f64> = &f0 * DVector::from_vec(z0);

    let n_out = ss.n_outputs();
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(n_samples); n_out];
    let a = disc.a_d.clone();
    let c = ss.c.clone();
    let mut next = DVector::<f64>::zeros(n);
    let mut noise = vec![vec![0.0; BLOCK]; r];
    let mut k0 = 0usize;
    while k0 < n_samples {
        let len = BLOCK.min(n_samples - k0);
        noise.par_iter_mut().enumerate().for_each(|(j, buf)| {
            rng.fill(j as u64, k0 as u64, &mut buf[..len]);
        });
        for k in 0..len {
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += c[(i, j)] * x[j];
                }
                o.push(acc);
            }
            step(&a, lf, &x, &noise, k, &mut next);
            std::mem::swap(&mut x, &mut next);
        }
        k0 += len;
    }

    let burn_in = ((5.0 * tau / dt).ceil() as usize).min(n_samples / 2);
    let channels: BTreeMap<_, _> = lp.outputs.iter().copied().zip(out).collect();
    let mut b = SignalBundle::new(dt, channels, seed, burn_in)?;
    b.injection = Some(lp.injection);
    Ok(b)
}

#[inline]
fn step(a: &DMatrix<f64>, lf: &DMatrix<f64>, x: &DVector<f64>, noise: &[Vec<f64>], k: usize, out: &mut DVector<f64>) {
    let n = x.len();
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += a[(i, j)] * x[j];
        }
        for (j, col) in noise.iter().enumerate() {
            acc += lf[(i, j)] * col[k];
        }
        out[i] = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::Channel;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn zero_controller_is_open_loop() {
        let g = RationalTF::zpk(vec![], vec![r(-1.0)], 1.0).unwrap();
        let noise = NoiseSpec::ou(2.0, 1.0).unwrap();
        let lp = closed_loop_system(&g, &RationalTF::zero(), Injection::ControlNoise, &noise.filter()).unwrap();
        let b = simulate(&lp, &SimParams { dt: 0.05, duration: 500.0, seed: 1 }).unwrap();
        assert!(b.channel(Channel::V).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(b.channel(Channel::U).unwrap(), b.channel(Channel::W).unwrap());
    }

    #[test]
    fn deterministic_in_seed() {
        let g = RationalTF::zpk(vec![], vec![r(-1.0)], 1.0).unwrap();
        let noise = NoiseSpec::ou(1.0, 1.0).unwrap();
        let lp = closed_loop_system(&g, &RationalTF::constant(1.0), Injection::ControlNoise, &noise.filter()).unwrap();
        let p = SimParams { dt: 0.05, duration: 2000.0, seed: 77 };
        let a = simulate(&lp, &p).unwrap();
        let b = simulate(&lp, &p).unwrap();
        assert_eq!(a, b);
        let c = simulate(&lp, &SimParams { seed: 78, ..p }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn guards() {
        let g = RationalTF::zpk(vec![], vec![r(-1.0)], 1.0).unwrap();
        let noise = NoiseSpec::ou(1.0, 1.0).unwrap();
        let lp = closed_loop_system(&g, &RationalTF::constant(1.0), Injection::ControlNoise, &noise.filter()).unwrap();
        assert!(simulate(&lp, &SimParams { dt: 0.05, duration: 10.0, seed: 0 }).is_err());
        assert!(simulate(&lp, &SimParams { dt: 0.05, duration: -1.0, seed: 0 }).is_err());
        assert!(simulate(&lp, &SimParams { dt: 2.0, duration: 1e4, seed: 0 }).is_err());
        let unstable = closed_loop_system(
            &RationalTF::zpk(vec![], vec![r(1.0)], 1.0).unwrap(),
            &RationalTF::constant(0.5),
            Injection::ControlNoise,
            &noise.filter(),
        )
        .unwrap();
        assert!(matches!(
            simulate(&unstable, &SimParams { dt: 0.05, duration: 1e3, seed: 0 }),
            Err(SimError::Unstable)
        ));
    }

    #[test]
    fn paths_scale_with_intensity() {
        let g = RationalTF::zpk(vec![], vec![r(1.0)], 1.0).unwrap();
        let c = RationalTF::zpk(vec![], vec![r(-2.0)], 4.0).unwrap();
        let p = SimParams { dt: 0.01, duration: 500.0, seed: 3 };
        let run = |k: f64| {
            let lp = NoiseSpec::second_order(2.0, k).unwrap().loop_realization(&g, &c, Injection::ControlNoise).unwrap();
            simulate(&lp, &p).unwrap()
        };
        let (a, b) = (run(1.0), run(3.0));
        for ch in [Channel::U, Channel::V, Channel::W, Channel::Y] {
            for (x, y) in a.channel(ch).unwrap().iter().zip(b.channel(ch).unwrap()) {
                assert!((3.0 * x - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }
    }
}
