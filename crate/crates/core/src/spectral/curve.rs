use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::welch::{CrossSpectra, SpectralEstimate};
use super::SpectralError;
use crate::limits::{IntegralKind, IntegralResult, IntegralStatus, Weight};
use crate::lti::Channel;

/// Relative PSD floor, taken against the band median of the denominator.
pub const PSD_FLOOR: f64 = 1e-12;

/// `sqrt(phi_num / phi_den)` on a shared grid; masked points are `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub omega: Vec<f64>,
    pub value: Vec<f64>,
    pub kind: IntegralKind,
    /// The same curve from each half of the record, if available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halves: Option<[Vec<f64>; 2]>,
}

impl SensitivityCurve {
    pub fn is_masked(&self, k: usize) -> bool {
        !self.value[k].is_finite()
    }

    pub fn masked_count(&self) -> usize {
        (0..self.value.len()).filter(|&k| self.is_masked(k)).count()
    }
}

fn ratio_curve(num: &SpectralEstimate, den: &SpectralEstimate) -> Result<Vec<f64>, SpectralError> {
    if !num.same_grid(den) {
        return Err(SpectralError::GridMismatch);
    }
    let mut d: Vec<f64> = den.values.iter().map(|v| v.re).collect();
    d.sort_by(f64::total_cmp);
    let floor = PSD_FLOOR * d.get(d.len() / 2).copied().unwrap_or(0.0);
    Ok(num
        .values
        .iter()
        .zip(&den.values)
        .map(|(n, d)| {
            if d.re > floor && d.re > 0.0 {
                (n.re.max(0.0) / d.re).sqrt()
            } else {
                f64::NAN
            }
        })
        .collect())
}

pub fn sensitivity_like(
    num: &SpectralEstimate,
    den: &SpectralEstimate,
    kind: IntegralKind,
) -> Result<SensitivityCurve, SpectralError> {
    Ok(SensitivityCurve {
        omega: num.omega.clone(),
        value: ratio_curve(num, den)?,
        kind,
        halves: None,
    })
}

/// Curve `sqrt(phi_num / phi_den)` with split-half companions.
pub fn sensitivity_from_spectra(
    cs: &CrossSpectra,
    num: Channel,
    den: Channel,
    kind: IntegralKind,
) -> Result<SensitivityCurve, SpectralError> {
    let mut c = sensitivity_like(&cs.estimate(num, num)?, &cs.estimate(den, den)?, kind)?;
    let h0 = ratio_curve(&cs.half(0, num, num)?, &cs.half(0, den, den)?)?;
    let h1 = ratio_curve(&cs.half(1, num, num)?, &cs.half(1, den, den)?)?;
    c.halves = Some([h0, h1]);
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodeLikeOptions {
    /// Loop bandwidth; when set the grid must reach `0.01x` and `100x` of it.
    pub omega_peak: Option<f64>,
    /// Upper end of the usable band; defaults to the last grid point.
    pub omega_hi: Option<f64>,
    /// A log-curve endpoint larger than this marks the integral divergent.
    pub divergence_tol: f64,
    /// Span of the low-frequency even fit in decades above the first bin.
    pub low_fit_decades: f64,
    /// The fit replaces the data below `first bin * 10^low_split_decades`.
    pub low_split_decades: f64,
}

impl Default for BodeLikeOptions {
    fn default() -> Self {
        BodeLikeOptions {
            omega_peak: None,
            omega_hi: None,
            divergence_tol: 0.05,
            low_fit_decades: 2.0,
            low_split_decades: 1.0,
        }
    }
}

pub fn bode_like_integral(curve: &SensitivityCurve, weight: Weight) -> Result<IntegralResult, SpectralError> {
    bode_like_integral_with(curve, weight, &BodeLikeOptions::default())
}

struct Pts {
    w: Vec<f64>,
    l: Vec<f64>,
}

fn points(omega: &[f64], value: &[f64], hi: f64) -> Pts {
    let (mut w, mut l) = (Vec::new(), Vec::new());
    for (&o, &v) in omega.iter().zip(value) {
        if o <= hi && v.is_finite() && v > 0.0 {
            w.push(o);
            l.push(v.ln());
        }
    }
    Pts { w, l }
}

fn trapz(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
        .sum()
}

fn lstsq(cols: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, SpectralError> {
    let a = DMatrix::from_fn(y.len(), cols.len(), |i, j| cols[j][i]);
    let b = DVector::from_column_slice(y);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| SpectralError::InvalidParameter(e.into()))?;
    Ok(sol.iter().copied().collect())
}

fn slice_between(p: &Pts, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    p.w.iter()
        .zip(&p.l)
        .filter(|(w, _)| **w >= lo && **w <= hi)
        .map(|(w, l)| (*w, *l))
        .unzip()
}

/// Pieces of the estimate that the split halves share.
struct Parts {
    split: f64,
    hi: f64,
    low: f64,
    tail: f64,
}

pub fn bode_like_integral_with(
    curve: &SensitivityCurve,
    weight: Weight,
    opts: &BodeLikeOptions,
) -> Result<IntegralResult, SpectralError> {
    let hi = opts.omega_hi.unwrap_or(f64::INFINITY);
    let p = points(&curve.omega, &curve.value, hi);
    if p.w.len() < 32 {
        return Err(SpectralError::InsufficientBand(format!("{} usable points", p.w.len())));
    }
    let (w_lo, w_hi) = (p.w[0], *p.w.last().unwrap());
    if let Some(peak) = opts.omega_peak {
        if w_lo > 0.01 * peak * (1.0 + 1e-9) || w_hi < 100.0 * peak * (1.0 - 1e-9) {
            return Err(SpectralError::InsufficientBand(format!(
                "usable band [{w_lo:.4e}, {w_hi:.4e}] does not span [0.01, 100] x {peak:.4e}"
            )));
        }
    }

    // high tail over the last decade
    let (tw, tl) = slice_between(&p, w_hi / 10.0, w_hi);
    let lnw: Vec<f64> = tw.iter().map(|w| w.ln()).collect();
    let ones = vec![1.0; tw.len()];
    let inv2: Vec<f64> = tw.iter().map(|w| w.powi(-2)).collect();
    let tail = match weight {
        Weight::Unweighted => {
            let c = lstsq(&[ones.clone(), lnw.clone(), inv2.clone()], &tl)?;
            let end = c[0] + c[1] * w_hi.ln();
            if end.abs() > opts.divergence_tol {
                return Ok(IntegralResult::divergent_sign(end));
            }
            let c2 = lstsq(&[inv2], &tl)?[0];
            c2 / w_hi
        }
        Weight::InvOmegaSq => {
            let c = lstsq(&[ones, lnw], &tl)?;
            c[0] / w_hi + c[1] * (w_hi.ln() + 1.0) / w_hi
        }
    };

    let parts = match weight {
        Weight::Unweighted => {
            let (fw, fl) = slice_between(&p, w_lo, w_lo * 10f64.powf(opts.low_split_decades));
            let low = if fw.len() >= 4 {
                let c = lstsq(&[vec![1.0; fw.len()], fw.iter().map(|w| w.ln()).collect()], &fl)?;
                w_lo * (c[0] + c[1] * (w_lo.ln() - 1.0))
            } else {
                p.l[0] * w_lo
            };
            Parts {
                split: w_lo,
                hi: w_hi,
                low,
                tail,
            }
        }
        Weight::InvOmegaSq => {
            let fit_hi = w_lo * 10f64.powf(opts.low_fit_decades);
            let split = w_lo * 10f64.powf(opts.low_split_decades);
            let (fw, fl) = slice_between(&p, w_lo, fit_hi);
            if fw.len() < 8 {
                return Err(SpectralError::InsufficientBand(format!(
                    "{} points in the low-frequency fit",
                    fw.len()
                )));
            }
            let w2: Vec<f64> = fw.iter().map(|w| w * w).collect();
            let w4: Vec<f64> = w2.iter().map(|x| x * x).collect();
            let c = lstsq(&[vec![1.0; fw.len()], w2.clone(), w4.clone()], &fl)?;
            if c[0].abs() > opts.divergence_tol {
                return Ok(IntegralResult::divergent_sign(c[0]));
            }
            let c = lstsq(&[w2, w4], &fl)?;
            Parts {
                split,
                hi: w_hi,
                low: c[0] * split + c[1] * split.powi(3) / 3.0,
                tail,
            }
        }
    };

    let main = |vals: &[f64]| -> f64 {
        let q = points(&curve.omega, vals, hi);
        let (w, l): (Vec<f64>, Vec<f64>) = q
            .w
            .iter()
            .zip(&q.l)
            .filter(|(w, _)| **w >= parts.split && **w <= parts.hi)
            .map(|(w, l)| match weight {
                Weight::Unweighted => (*w, *l),
                Weight::InvOmegaSq => (*w, *l / (w * w)),
            })
            .unzip();
        trapz(&w, &l)
    };
    let body = main(&curve.value);
    let value = (body + parts.low + parts.tail) / PI;

    // statistical spread: split halves plus adjacent-bin scatter
    let mut stat2 = 0.0;
    if let Some([h0, h1]) = &curve.halves {
        let d = (main(h0) - main(h1)) / PI;
        stat2 += 0.25 * d * d;
    }
    let mut scatter = 0.0;
    for k in 1..p.w.len() {
        if p.w[k - 1] < parts.split {
            continue;
        }
        let dw = p.w[k] - p.w[k - 1];
        let wt = match weight {
            Weight::Unweighted => 1.0,
            Weight::InvOmegaSq => p.w[k].powi(-2),
        };
        let s2 = 0.5 * (p.l[k] - p.l[k - 1]).powi(2);
        scatter += 2.0 * (dw * wt).powi(2) * s2;
    }
    stat2 += scatter / (PI * PI);
    let trunc = 0.5 * (parts.low.abs() + parts.tail.abs()) / PI;
    Ok(IntegralResult {
        value,
        abs_error_estimate: stat2.sqrt() + trunc,
        status: IntegralStatus::Converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::{bode_quadrature, IntegralKind};
    use crate::lti::RationalTF;
    use num_complex::Complex64;

    fn grid(n: usize, dw: f64) -> Vec<f64> {
        (1..=n).map(|k| k as f64 * dw).collect()
    }

    fn curve_of(tf: &RationalTF, omega: &[f64]) -> SensitivityCurve {
        SensitivityCurve {
            omega: omega.to_vec(),
            value: omega.iter().map(|&w| tf.log_mag_jw(w).exp()).collect(),
            kind: IntegralKind::Sensitivity,
            halves: None,
        }
    }

    #[test]
    fn unit_curve_integrates_to_zero() {
        let om = grid(4096, 0.01);
        let c = SensitivityCurve {
            omega: om.clone(),
            value: vec![1.0; om.len()],
            kind: IntegralKind::Sensitivity,
            halves: None,
        };
        for w in [Weight::Unweighted, Weight::InvOmegaSq] {
            let r = bode_like_integral(&c, w).unwrap();
            assert_eq!(r.value, 0.0);
            assert_eq!(r.abs_error_estimate, 0.0);
        }
    }

    #[test]
    fn exact_curve_matches_quadrature() {
        // S of L = 4/((s-1)(s+2)); integral = 1
        let s = RationalTF::from_coeffs(&[1.0, 1.0, -2.0], &[1.0, 1.0, 2.0]).unwrap();
        let q = bode_quadrature(&s, Weight::Unweighted).unwrap().value;
        let om = grid(16384, 0.01);
        let e = bode_like_integral(&curve_of(&s, &om), Weight::Unweighted).unwrap();
        assert!((e.value - q).abs() < 2e-3, "{} vs {q}", e.value);
    }

    #[test]
    fn exact_weighted_curve_matches_quadrature() {
        // T_yd of the NMP type-2 loop; weighted integral = 0.5
        let t = RationalTF::from_coeffs(&[-1.0, 1.0, 2.0], &[1.0, 1.0, 2.0]).unwrap();
        let q = bode_quadrature(&t, Weight::InvOmegaSq).unwrap().value;
        assert!((q - 0.5).abs() < 1e-6);
        let om = grid(16384, 0.004);
        let e = bode_like_integral(&curve_of(&t, &om), Weight::InvOmegaSq).unwrap();
        assert!((e.value - q).abs() < 5e-3, "{} vs {q}", e.value);
    }

    #[test]
    fn divergent_tail_detected() {
        let om = grid(4096, 0.01);
        let c = SensitivityCurve {
            omega: om.clone(),
            value: vec![2.0; om.len()],
            kind: IntegralKind::Sensitivity,
            halves: None,
        };
        assert_eq!(
            bode_like_integral(&c, Weight::Unweighted).unwrap().status,
            IntegralStatus::DivergentPlus
        );
        assert_eq!(
            bode_like_integral(&c, Weight::InvOmegaSq).unwrap().status,
            IntegralStatus::DivergentPlus
        );
    }

    #[test]
    fn coverage_enforced() {
        let om = grid(1000, 0.01);
        let c = SensitivityCurve {
            omega: om,
            value: vec![1.0; 1000],
            kind: IntegralKind::Sensitivity,
            halves: None,
        };
        let opts = BodeLikeOptions {
            omega_peak: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            bode_like_integral_with(&c, Weight::Unweighted, &opts),
            Err(SpectralError::InsufficientBand(_))
        ));
    }

    #[test]
    fn masking_propagates() {
        let om = grid(8, 1.0);
        let mk = |v: Vec<f64>| SpectralEstimate {
            omega: om.clone(),
            values: v.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
            nperseg: 16,
            overlap: 0.5,
            window_id: "hann_periodic".into(),
            segments_used: 1,
        };
        let den = mk(vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let c = sensitivity_like(&den.clone(), &den, IntegralKind::Sensitivity).unwrap();
        assert!(c.is_masked(2));
        assert_eq!(c.masked_count(), 1);
        assert!(c.value.iter().enumerate().all(|(k, v)| k == 2 || *v == 1.0));
    }
}
