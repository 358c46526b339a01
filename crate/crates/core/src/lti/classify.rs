use num_complex::Complex64;
use serde::Serialize;

use super::RationalTF;

/// Default half-width of the band around the imaginary axis treated as marginal.
pub const MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, Serialize)]
pub struct PoleZeroClassification {
    pub stable_poles: Vec<Complex64>,
    /// Open right half-plane poles.
    pub unstable_poles: Vec<Complex64>,
    /// Poles within the tolerance band of the imaginary axis (origin included).
    pub marginal_poles: Vec<Complex64>,
    pub min_phase_zeros: Vec<Complex64>,
    /// Open right half-plane zeros.
    pub nonmin_phase_zeros: Vec<Complex64>,
    pub marginal_zeros: Vec<Complex64>,
}

impl PoleZeroClassification {
    pub fn is_marginal(&self) -> bool {
        !self.marginal_poles.is_empty()
    }

    pub fn sum_unstable_re(&self) -> f64 {
        self.unstable_poles.iter().map(|p| p.re).sum()
    }

    pub fn sum_nmp_inverse_re(&self) -> f64 {
        self.nonmin_phase_zeros.iter().map(|z| z.inv().re).sum()
    }
}

pub fn classify(tf: &RationalTF, tol: f64) -> PoleZeroClassification {
    let mut c = PoleZeroClassification::default();
    for &p in tf.poles() {
        let band = tol * p.norm().max(1.0);
        if p.re >= band {
            c.unstable_poles.push(p);
        } else if p.re <= -band {
            c.stable_poles.push(p);
        } else {
            c.marginal_poles.push(p);
        }
    }
    for &z in tf.zeros() {
        let band = tol * z.norm().max(1.0);
        if z.re >= band {
            c.nonmin_phase_zeros.push(z);
        } else if z.re <= -band {
            c.min_phase_zeros.push(z);
        } else {
            c.marginal_zeros.push(z);
        }
    }
    c
}

/// True when every root lies strictly left of `-tol`.
pub fn is_hurwitz(roots: &[Complex64], tol: f64) -> bool {
    roots.iter().all(|r| r.re < -tol)
}
