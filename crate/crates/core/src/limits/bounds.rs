use serde::{Deserialize, Serialize};

use super::integral::{plant_log_integral, IntegralResult, IntegralStatus, Weight};
use super::LimitsError;
use crate::lti::{classify, RationalTF};

/// A real number or a signed divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "value")]
pub enum Extended {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
    Undefined,
}

impl Extended {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(*x),
            _ => None,
        }
    }

    fn from_integral(r: &IntegralResult) -> Self {
        match r.status {
            IntegralStatus::Converged => Extended::Finite(r.value),
            IntegralStatus::DivergentPlus => Extended::PlusInfinity,
            IntegralStatus::DivergentMinus => Extended::MinusInfinity,
            IntegralStatus::Singular => Extended::Undefined,
        }
    }

    fn add(self, x: f64) -> Self {
        match self {
            Extended::Finite(v) => Extended::Finite(v + x),
            e => e,
        }
    }

    fn neg(self) -> Self {
        match self {
            Extended::Finite(v) => Extended::Finite(-v),
            Extended::PlusInfinity => Extended::MinusInfinity,
            Extended::MinusInfinity => Extended::PlusInfinity,
            Extended::Undefined => Extended::Undefined,
        }
    }
}

/// Right-hand sides of the four closed-loop inequalities for a given plant.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundReport {
    /// Sum of real parts of the open right half-plane plant poles.
    pub sens_bound: f64,
    /// Sum of `Re(1/z)` over open right half-plane plant zeros.
    pub comp_bound: f64,
    pub plant_log_integral: IntegralResult,
    pub plant_log_integral_weighted: IntegralResult,
    pub load_bound: Extended,
    pub noise_bound: Extended,
}

pub fn analytic_bounds(g: &RationalTF, tol: f64) -> Result<BoundReport, LimitsError> {
    let pz = classify(g, tol);
    let sens_bound = pz.sum_unstable_re();
    let comp_bound = pz.sum_nmp_inverse_re();
    let pl = plant_log_integral(g, Weight::Unweighted)?;
    let plw = plant_log_integral(g, Weight::InvOmegaSq)?;
    Ok(BoundReport {
        sens_bound,
        comp_bound,
        load_bound: Extended::from_integral(&pl).add(sens_bound),
        noise_bound: Extended::from_integral(&plw).neg().add(comp_bound),
        plant_log_integral: pl,
        plant_log_integral_weighted: plw,
    })
}
