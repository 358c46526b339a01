use serde::{Deserialize, Serialize};

use super::quad::{integrate, QuadOptions};
use super::LimitsError;
use crate::lti::RationalTF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    Unweighted,
    InvOmegaSq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralStatus {
    Converged,
    DivergentPlus,
    DivergentMinus,
    Singular,
}

/// `(1/2pi) int_R log|T(jw)| weight(w) dw` together with its accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub status: IntegralStatus,
}

impl IntegralResult {
    pub fn converged(value: f64, err: f64) -> Self {
        IntegralResult {
            value,
            abs_error_estimate: err.abs(),
            status: IntegralStatus::Converged,
        }
    }

    pub fn with_status(status: IntegralStatus) -> Self {
        let value = match status {
            IntegralStatus::DivergentPlus => f64::INFINITY,
            IntegralStatus::DivergentMinus => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        IntegralResult {
            value,
            abs_error_estimate: 0.0,
            status,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == IntegralStatus::Converged
    }

    pub fn divergent_sign(x: f64) -> Self {
        Self::with_status(if x > 0.0 {
            IntegralStatus::DivergentPlus
        } else {
            IntegralStatus::DivergentMinus
        })
    }
}

/// Below this the constant term of `log|T|` at an endpoint counts as zero.
const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct LogIntegralOptions {
    pub quad: QuadOptions,
    /// Truncation point as a multiple of the largest root magnitude.
    pub omega_max_factor: f64,
    /// Low split point of the weighted integral as a multiple of the smallest nonzero root magnitude.
    pub omega_min_factor: f64,
}

impl Default for LogIntegralOptions {
    fn default() -> Self {
        LogIntegralOptions {
            quad: QuadOptions::default(),
            omega_max_factor: 1e4,
            omega_min_factor: 1e-3,
        }
    }
}

/// Half of `sum Re r^2` over zeros minus poles: `log|T(jw)| ~ a2 / w^2` at high frequency.
fn high_freq_coeff(tf: &RationalTF) -> f64 {
    let z: f64 = tf.zeros().iter().map(|r| (r * r).re).sum();
    let p: f64 = tf.poles().iter().map(|r| (r * r).re).sum();
    0.5 * (z - p)
}

/// `log|T(jw)| ~ b2 w^2` near the origin when `|T(0)| = 1`.
fn low_freq_coeff(tf: &RationalTF) -> f64 {
    let z: f64 = tf.zeros().iter().map(|r| (r * r).inv().re).sum();
    let p: f64 = tf.poles().iter().map(|r| (r * r).inv().re).sum();
    0.5 * (z - p)
}

fn breakpoints(tf: &RationalTF, lo: f64, hi: f64) -> Vec<f64> {
    let m = tf.max_root_magnitude().max(1e-300);
    let mut pts = vec![lo, hi];
    let mut x = m * 1e-6;
    while x < hi {
        if x > lo {
            pts.push(x);
        }
        x *= 10.0;
    }
    for r in tf.zeros().iter().chain(tf.poles()) {
        for v in [r.im.abs(), r.norm()] {
            if v > lo && v < hi {
                pts.push(v);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Quadrature of a transfer function whose integral is known to converge.
fn log_integral_converged(tf: &RationalTF, weight: Weight, opts: &LogIntegralOptions) -> Result<IntegralResult, LimitsError> {
    let m = tf.max_root_magnitude();
    if m == 0.0 {
        // constant transfer function with unit magnitude
        return Ok(IntegralResult::converged(0.0, 0.0));
    }
    let big = opts.omega_max_factor * m;
    let a2 = high_freq_coeff(tf);
    let rd = tf.relative_degree() as f64;
    let log_c = tf.gain().abs().ln();
    match weight {
        Weight::Unweighted => {
            let r = integrate(|w| tf.log_mag_jw(w), &breakpoints(tf, 0.0, big), opts.quad);
            if !r.converged {
                return Err(LimitsError::NoConvergence { abs_error: r.abs_error });
            }
            let tail = a2 / big;
            let tail_err = (a2 / big).abs() * (m / big).powi(2) * 10.0;
            let pi = std::f64::consts::PI;
            Ok(IntegralResult::converged((r.value + tail) / pi, (r.abs_error + tail_err) / pi))
        }
        Weight::InvOmegaSq => {
            let small = opts.omega_min_factor * tf.min_nonzero_root_magnitude().unwrap_or(m);
            let b2 = low_freq_coeff(tf);
            let low = b2 * small;
            let low_err = (b2 * small).abs() * (small / tf.min_nonzero_root_magnitude().unwrap_or(m)).powi(2) * 10.0;
            let r = integrate(|w| tf.log_mag_jw(w) / (w * w), &breakpoints(tf, small, big), opts.quad);
            if !r.converged {
                return Err(LimitsError::NoConvergence { abs_error: r.abs_error });
            }
            let lb = big.ln();
            let tail = log_c / big - rd * (lb + 1.0) / big + a2 / (3.0 * big.powi(3));
            let tail_err = (a2 / big.powi(3)).abs() + 1e-3 * (log_c / big).abs();
            let pi = std::f64::consts::PI;
            Ok(IntegralResult::converged(
                (low + r.value + tail) / pi,
                (low_err + r.abs_error + tail_err) / pi,
            ))
        }
    }
}

/// Divergence test shared by the plant and closed-loop integrals.
fn symbolic_status(tf: &RationalTF, weight: Weight) -> Option<IntegralResult> {
    if tf.is_zero() {
        return Some(IntegralResult::with_status(IntegralStatus::DivergentMinus));
    }
    match weight {
        Weight::Unweighted => {
            let rd = tf.relative_degree();
            if rd > 0 {
                return Some(IntegralResult::with_status(IntegralStatus::DivergentMinus));
            }
            if rd < 0 {
                return Some(IntegralResult::with_status(IntegralStatus::DivergentPlus));
            }
            let lc = tf.gain().abs().ln();
            if lc.abs() > UNIT_TOL {
                return Some(IntegralResult::divergent_sign(lc));
            }
            None
        }
        Weight::InvOmegaSq => {
            let k = tf.origin_order();
            if k > 0 {
                return Some(IntegralResult::with_status(IntegralStatus::DivergentPlus));
            }
            if k < 0 {
                return Some(IntegralResult::with_status(IntegralStatus::DivergentMinus));
            }
            if tf.zeros().iter().any(|z| z.norm() == 0.0) {
                // equal numbers of origin poles and zeros cannot survive cancellation
                return Some(IntegralResult::with_status(IntegralStatus::Singular));
            }
            let l0 = tf.dc_log_mag();
            if l0.abs() > UNIT_TOL {
                return Some(IntegralResult::divergent_sign(l0));
            }
            None
        }
    }
}

/// Bode-type integral of a closed-loop map.
///
/// Imaginary-axis poles and, in the weighted case, `|T(0)| != 1` give `Singular`.
pub fn bode_quadrature(tf: &RationalTF, weight: Weight) -> Result<IntegralResult, LimitsError> {
    bode_quadrature_with(tf, weight, &LogIntegralOptions::default())
}

pub fn bode_quadrature_with(
    tf: &RationalTF,
    weight: Weight,
    opts: &LogIntegralOptions,
) -> Result<IntegralResult, LimitsError> {
    if tf.is_improper() {
        return Err(LimitsError::Improper);
    }
    if tf.poles().iter().any(|p| p.re.abs() <= 1e-12 * p.norm().max(1.0)) {
        return Ok(IntegralResult::with_status(IntegralStatus::Singular));
    }
    if weight == Weight::InvOmegaSq && !tf.is_zero() {
        let at_origin = tf.zeros().iter().any(|z| z.norm() == 0.0);
        if at_origin || tf.dc_log_mag().abs() > UNIT_TOL {
            return Ok(IntegralResult::with_status(IntegralStatus::Singular));
        }
    }
    if let Some(s) = symbolic_status(tf, weight) {
        return Ok(s);
    }
    log_integral_converged(tf, weight, opts)
}

/// Log-magnitude integral of the open-loop plant; divergence is reported with its sign.
pub fn plant_log_integral(g: &RationalTF, weight: Weight) -> Result<IntegralResult, LimitsError> {
    if let Some(s) = symbolic_status(g, weight) {
        return Ok(s);
    }
    log_integral_converged(g, weight, &LogIntegralOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::gang_of_four;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn all_pass_is_zero_both_weights() {
        let t = RationalTF::from_coeffs(&[1.0, -1.0], &[1.0, 1.0]).unwrap();
        for w in [Weight::Unweighted, Weight::InvOmegaSq] {
            let v = bode_quadrature(&t, w).unwrap();
            assert!(v.is_converged());
            assert!(v.value.abs() < 1e-6, "{w:?}: {}", v.value);
            let p = plant_log_integral(&t, w).unwrap();
            assert!(p.value.abs() < 1e-6);
        }
    }

    #[test]
    fn unstable_loop_sensitivity() {
        let g = RationalTF::zpk(vec![], vec![r(1.0)], 1.0).unwrap();
        let c = RationalTF::zpk(vec![], vec![r(-2.0)], 4.0).unwrap();
        let gof = gang_of_four(&g, &c).unwrap();
        let v = bode_quadrature(&gof.t_uw, Weight::Unweighted).unwrap();
        assert_relative_eq!(v.value, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn nmp_type2_complementary() {
        let t = RationalTF::from_coeffs(&[-1.0, 1.0, 2.0], &[1.0, 1.0, 2.0]).unwrap();
        let v = bode_quadrature(&t, Weight::InvOmegaSq).unwrap();
        assert_relative_eq!(v.value, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn divergence_is_symbolic() {
        let g = RationalTF::zpk(vec![], vec![r(-1.0)], 1.0).unwrap();
        assert_eq!(plant_log_integral(&g, Weight::Unweighted).unwrap().status, IntegralStatus::DivergentMinus);
        assert_eq!(plant_log_integral(&g, Weight::InvOmegaSq).unwrap().status, IntegralStatus::Converged);
        let g2 = RationalTF::zpk(vec![], vec![r(0.0), r(-1.0)], 1.0).unwrap();
        assert_eq!(plant_log_integral(&g2, Weight::InvOmegaSq).unwrap().status, IntegralStatus::DivergentPlus);
        let t = RationalTF::zpk(vec![], vec![r(-1.0)], 2.0).unwrap();
        assert_eq!(bode_quadrature(&t, Weight::InvOmegaSq).unwrap().status, IntegralStatus::Singular);
    }

    #[test]
    fn weighted_equals_unweighted_of_inverted() {
        // independent route: the s -> 1/s map turns the weighted integral into an unweighted one
        let t = RationalTF::zpk(
            vec![r(3.0), Complex64::new(-1.0, 2.0), Complex64::new(-1.0, -2.0)],
            vec![r(-0.5), r(-4.0), Complex64::new(-2.0, 1.0), Complex64::new(-2.0, -1.0)],
            1.0,
        )
        .unwrap();
        let k = t.dc_log_mag().exp();
        let t = RationalTF::zpk(t.zeros().to_vec(), t.poles().to_vec(), 1.0 / k).unwrap();
        let weighted = bode_quadrature(&t, Weight::InvOmegaSq).unwrap();
        let un = plant_log_integral(&t.frequency_invert(), Weight::Unweighted).unwrap();
        assert!(weighted.is_converged() && un.is_converged());
        assert_relative_eq!(weighted.value, un.value, epsilon = 1e-7);
    }
}
