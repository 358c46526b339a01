//! Classical closed forms of the sensitivity and complementary sensitivity integrals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LimitsError;
use crate::lti::{classify, is_hurwitz, RationalTF, MARGIN_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Sensitivity,
    Complementary,
}

pub fn closed_loop_poles_of(l: &RationalTF) -> Result<Vec<Complex64>, LimitsError> {
    let p = l.denominator().add(&l.numerator());
    Ok(p.roots()?)
}

pub fn classical_oracle(l: &RationalTF, kind: OracleKind) -> Result<f64, LimitsError> {
    if !is_hurwitz(&closed_loop_poles_of(l)?, MARGIN_TOL) {
        return Err(LimitsError::UnstableClosedLoop);
    }
    let pz = classify(l, MARGIN_TOL);
    match kind {
        OracleKind::Sensitivity => {
            let rd = l.relative_degree();
            if rd < 1 {
                return Err(LimitsError::Precondition(format!("relative degree {rd} < 1")));
            }
            let kappa = if rd == 1 { l.gain() } else { 0.0 };
            Ok(pz.sum_unstable_re() - 0.5 * kappa)
        }
        OracleKind::Complementary => {
            let ty = l.origin_order();
            if ty < 1 {
                return Err(LimitsError::Precondition(format!("loop type {ty} < 1")));
            }
            let corr = if ty == 1 {
                let mut kv = Complex64::new(l.gain(), 0.0);
                for z in l.zeros() {
                    kv *= -z;
                }
                for p in l.poles().iter().filter(|p| p.norm() > 0.0) {
                    kv /= -p;
                }
                0.5 / kv.re
            } else {
                0.0
            };
            let zsum: f64 = l.zeros().iter().filter(|z| z.re > MARGIN_TOL * z.norm().max(1.0)).map(|z| z.inv().re).sum();
            Ok(zsum - corr)
        }
    }
}
