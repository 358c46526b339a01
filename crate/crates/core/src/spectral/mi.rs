use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::welch::SpectralEstimate;
use super::SpectralError;
use crate::limits::quad::{integrate, QuadOptions, QuadResult};

/// Coherence ceiling applied before taking `log(1 - gamma^2)`.
pub const CLIP_EPS: f64 = 1e-6;
/// Clipped share of the band above which an estimate is flagged.
pub const CLIP_FLAG_FRACTION: f64 = 0.1;

/// Gaussian mutual-information rate in nats per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiRateEstimate {
    pub value: f64,
    pub omega: Vec<f64>,
    /// Clipped coherence on `omega`.
    pub integrand_grid: Vec<f64>,
    pub truncation_band: (f64, f64),
    pub clip_fraction: f64,
    pub unreliable: bool,
}

fn check_grid(a: &SpectralEstimate, b: &SpectralEstimate, c: &SpectralEstimate) -> Result<(), SpectralError> {
    if a.same_grid(b) && a.same_grid(c) {
        Ok(())
    } else {
        Err(SpectralError::GridMismatch)
    }
}

/// `|phi_xy|^2 / (phi_x phi_y)`, unclipped.
pub fn coherence(
    x_auto: &SpectralEstimate,
    y_auto: &SpectralEstimate,
    cross: &SpectralEstimate,
) -> Result<Vec<f64>, SpectralError> {
    check_grid(x_auto, y_auto, cross)?;
    Ok(x_auto
        .values
        .iter()
        .zip(&y_auto.values)
        .zip(&cross.values)
        .map(|((x, y), c)| c.norm_sqr() / (x.re * y.re))
        .collect())
}

fn band_indices(omega: &[f64], band: Option<(f64, f64)>) -> (Vec<usize>, (f64, f64)) {
    let (lo, hi) = band.unwrap_or((0.0, f64::INFINITY));
    let idx: Vec<usize> = (0..omega.len()).filter(|&k| omega[k] >= lo && omega[k] <= hi).collect();
    let b = match (idx.first(), idx.last()) {
        (Some(&a), Some(&z)) => (omega[a], omega[z]),
        _ => (lo, hi),
    };
    (idx, b)
}

fn trapz_idx(omega: &[f64], f: &[f64]) -> f64 {
    omega
        .windows(2)
        .zip(f.windows(2))
        .map(|(w, y)| 0.5 * (w[1] - w[0]) * (y[0] + y[1]))
        .sum()
}

pub fn mi_rate_pinsker(
    x_auto: &SpectralEstimate,
    y_auto: &SpectralEstimate,
    cross: &SpectralEstimate,
) -> Result<MiRateEstimate, SpectralError> {
    mi_rate_pinsker_band(x_auto, y_auto, cross, None)
}

/// `-(1/2pi) int_band log(1 - gamma^2) dw` over the positive half-axis.
pub fn mi_rate_pinsker_band(
    x_auto: &SpectralEstimate,
    y_auto: &SpectralEstimate,
    cross: &SpectralEstimate,
    band: Option<(f64, f64)>,
) -> Result<MiRateEstimate, SpectralError> {
    let coh = coherence(x_auto, y_auto, cross)?;
    let (idx, tb) = band_indices(&x_auto.omega, band);
    if idx.len() < 2 {
        return Err(SpectralError::InsufficientBand("fewer than two grid points in band".into()));
    }
    let mut clipped = 0usize;
    let mut omega = Vec::with_capacity(idx.len());
    let mut g = Vec::with_capacity(idx.len());
    for &k in &idx {
        let raw = if coh[k].is_finite() { coh[k] } else { 1.0 };
        let c = raw.clamp(0.0, 1.0 - CLIP_EPS);
        if raw > 1.0 - CLIP_EPS {
            clipped += 1;
        }
        omega.push(x_auto.omega[k]);
        g.push(c);
    }
    let f: Vec<f64> = g.iter().map(|c| -(1.0 - c).ln()).collect();
    let value = (trapz_idx(&omega, &f) / (2.0 * PI)).max(0.0);
    let clip_fraction = clipped as f64 / idx.len() as f64;
    Ok(MiRateEstimate {
        value,
        omega,
        integrand_grid: g,
        truncation_band: tb,
        clip_fraction,
        unreliable: clip_fraction > CLIP_FLAG_FRACTION,
    })
}

/// Rate difference split into the in-band part and the fitted part below the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiDifference {
    pub in_band: f64,
    /// Integral from zero to the first band point of a `c0 + c1 ln w` fit
    /// over the lowest decade of the band.
    pub low_extension: f64,
}

impl MiDifference {
    pub fn value(&self) -> f64 {
        self.in_band + self.low_extension
    }
}

fn low_extension(omega: &[f64], f: &[f64]) -> f64 {
    let w0 = omega[0];
    let (lw, lf): (Vec<f64>, Vec<f64>) = omega
        .iter()
        .zip(f)
        .take_while(|(w, _)| **w <= 10.0 * w0)
        .map(|(w, v)| (w.ln(), *v))
        .unzip();
    if lw.len() < 4 {
        return w0 * f[0];
    }
    let n = lw.len() as f64;
    let (mx, my) = (lw.iter().sum::<f64>() / n, lf.iter().sum::<f64>() / n);
    let sxx: f64 = lw.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lw.iter().zip(&lf).map(|(x, y)| (x - mx) * (y - my)).sum();
    let c1 = sxy / sxx;
    let c0 = my - c1 * mx;
    w0 * (c0 + c1 * (w0.ln() - 1.0))
}

/// `I(a; v) - I(b; v)` from the pointwise ratio of the unclipped
/// coherence deficits `(1 - gamma_av^2) / (1 - gamma_bv^2)`.
pub fn mi_rate_difference(
    a_auto: &SpectralEstimate,
    b_auto: &SpectralEstimate,
    v_auto: &SpectralEstimate,
    cross_av: &SpectralEstimate,
    cross_bv: &SpectralEstimate,
    band: Option<(f64, f64)>,
) -> Result<MiDifference, SpectralError> {
    check_grid(a_auto, b_auto, v_auto)?;
    check_grid(a_auto, cross_av, cross_bv)?;
    let (idx, _) = band_indices(&a_auto.omega, band);
    if idx.len() < 2 {
        return Err(SpectralError::InsufficientBand("fewer than two grid points in band".into()));
    }
    let (mut omega, mut f) = (Vec::new(), Vec::new());
    for &k in &idx {
        let (pa, pb, pv) = (a_auto.values[k].re, b_auto.values[k].re, v_auto.values[k].re);
        // Schur complements of the 2x2 spectral matrices
        let sa = pa - cross_av.values[k].norm_sqr() / pv;
        let sb = pb - cross_bv.values[k].norm_sqr() / pv;
        let ratio = (sa / pa) / (sb / pb);
        if ratio.is_finite() && ratio > 0.0 {
            omega.push(a_auto.omega[k]);
            f.push(-ratio.ln());
        }
    }
    if omega.len() < 2 {
        return Err(SpectralError::InsufficientBand("fewer than two usable points in band".into()));
    }
    Ok(MiDifference {
        in_band: trapz_idx(&omega, &f) / (2.0 * PI),
        low_extension: low_extension(&omega, &f) / (2.0 * PI),
    })
}

/// Pinsker rate of a coherence function by adaptive quadrature on `[0, omega_max]`.
pub fn pinsker_quadrature<F: Fn(f64) -> f64>(coh: F, breaks: &[f64], omega_max: f64) -> QuadResult {
    let mut b: Vec<f64> = breaks.iter().copied().filter(|&x| x > 0.0 && x < omega_max).collect();
    b.insert(0, 0.0);
    b.push(omega_max);
    let r = integrate(|w| -(1.0 - coh(w).clamp(0.0, 1.0 - CLIP_EPS)).ln(), &b, QuadOptions::default());
    QuadResult {
        value: r.value / (2.0 * PI),
        abs_error: r.abs_error / (2.0 * PI),
        ..r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn est(om: &[f64], v: Vec<Complex64>) -> SpectralEstimate {
        SpectralEstimate {
            omega: om.to_vec(),
            values: v,
            nperseg: 64,
            overlap: 0.5,
            window_id: "hann_periodic".into(),
            segments_used: 1,
        }
    }

    #[test]
    fn half_coherence_closed_form() {
        let r = pinsker_quadrature(|w| if w <= PI { 0.5 } else { 0.0 }, &[PI], 10.0);
        assert!((r.value - std::f64::consts::LN_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_arguments() {
        let om: Vec<f64> = (1..200).map(|k| k as f64 * 0.05).collect();
        let x = est(&om, om.iter().map(|w| Complex64::new(1.0 / (1.0 + w * w), 0.0)).collect());
        let y = est(&om, om.iter().map(|w| Complex64::new(2.0 / (4.0 + w * w), 0.0)).collect());
        let c = est(&om, om.iter().map(|w| Complex64::new(0.3, 0.2 * w) / (2.0 + w * w)).collect());
        let a = mi_rate_pinsker(&x, &y, &c).unwrap();
        let b = mi_rate_pinsker(&y, &x, &c.conj()).unwrap();
        assert_eq!(a.value, b.value);
        assert!(a.value > 0.0);
    }

    #[test]
    fn identical_channels_hit_ceiling() {
        let om: Vec<f64> = (1..100).map(|k| k as f64 * 0.1).collect();
        let x = est(&om, om.iter().map(|w| Complex64::new(1.0 / (1.0 + w * w), 0.0)).collect());
        let m = mi_rate_pinsker(&x, &x, &x).unwrap();
        assert!(m.unreliable);
        assert_eq!(m.clip_fraction, 1.0);
        let want = -(CLIP_EPS).ln() * (om[98] - om[0]) / (2.0 * PI);
        assert!((m.value - want).abs() < 1e-9 * want);
    }

    #[test]
    fn difference_of_sum_channel_is_log_ratio() {
        // w = u + v with u, v jointly Gaussian: the deficit ratio is phi_w / phi_u
        let om: Vec<f64> = (1..300).map(|k| k as f64 * 0.02).collect();
        let (mut pu, mut pv, mut pw, mut cuv, mut cwv) = (vec![], vec![], vec![], vec![], vec![]);
        for &w in &om {
            let su = Complex64::new(1.0 / (1.0 + w * w), 0.0);
            let l = Complex64::new(0.0, w).inv() * 0.7;
            let luv = l.conj();
            let sv = su * l.norm_sqr() + 1e-3;
            let suv = su * luv;
            let sw = su + suv + suv.conj() + sv;
            pu.push(su);
            pv.push(sv);
            pw.push(sw);
            cuv.push(suv);
            cwv.push(suv + sv);
        }
        let d = mi_rate_difference(
            &est(&om, pu.clone()),
            &est(&om, pw.clone()),
            &est(&om, pv),
            &est(&om, cuv),
            &est(&om, cwv),
            None,
        )
        .unwrap()
        .in_band;
        let f: Vec<f64> = pu.iter().zip(&pw).map(|(u, w)| (u.re / w.re).ln()).collect();
        let want = trapz_idx(&om, &f) / (2.0 * PI);
        assert!((d - want).abs() < 1e-8 * want.abs(), "{d} {want}");
    }

    #[test]
    fn low_extension_of_log_integrand() {
        let om: Vec<f64> = (1..200).map(|k| k as f64 * 0.05).collect();
        let f: Vec<f64> = om.iter().map(|w| 0.3 + 2.0 * w.ln()).collect();
        let w0 = om[0];
        let want = w0 * (0.3 + 2.0 * (w0.ln() - 1.0));
        assert!((low_extension(&om, &f) - want).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let a = est(&[1.0, 2.0], vec![Complex64::new(1.0, 0.0); 2]);
        let b = est(&[1.0, 3.0], vec![Complex64::new(1.0, 0.0); 2]);
        assert!(matches!(mi_rate_pinsker(&a, &b, &a), Err(SpectralError::GridMismatch)));
    }
}
