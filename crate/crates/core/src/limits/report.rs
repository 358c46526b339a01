use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bounds::{analytic_bounds, BoundReport, Extended};
use super::integral::{bode_quadrature, IntegralResult, Weight};
use super::LimitsError;
use crate::lti::{gang_of_four, is_hurwitz, GangOfFour, RationalTF, MARGIN_TOL};

/// The four closed-loop integrals paired with plant-only bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralKind {
    /// `T_uw`, unweighted, bounded by the unstable-pole sum.
    Sensitivity,
    /// `T_yw`, unweighted, bounded by the pole sum plus the plant log integral.
    LoadDisturbance,
    /// `T_yd`, weighted by `1/w^2`, bounded by the NMP-zero sum.
    Complementary,
    /// `T_ud`, weighted by `1/w^2`, bounded by the zero sum minus the weighted plant log integral.
    Noise,
}

impl IntegralKind {
    pub const ALL: [IntegralKind; 4] = [
        IntegralKind::Sensitivity,
        IntegralKind::LoadDisturbance,
        IntegralKind::Complementary,
        IntegralKind::Noise,
    ];

    pub fn weight(self) -> Weight {
        match self {
            IntegralKind::Sensitivity | IntegralKind::LoadDisturbance => Weight::Unweighted,
            _ => Weight::InvOmegaSq,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IntegralKind::Sensitivity => "sensitivity",
            IntegralKind::LoadDisturbance => "load_disturbance",
            IntegralKind::Complementary => "complementary",
            IntegralKind::Noise => "noise",
        }
    }

    pub fn transfer(self, gof: &GangOfFour) -> &RationalTF {
        match self {
            IntegralKind::Sensitivity => &gof.t_uw,
            IntegralKind::LoadDisturbance => &gof.t_yw,
            IntegralKind::Complementary => &gof.t_yd,
            IntegralKind::Noise => &gof.t_ud,
        }
    }

    pub fn bound(self, b: &BoundReport) -> Extended {
        match self {
            IntegralKind::Sensitivity => Extended::Finite(b.sens_bound),
            IntegralKind::LoadDisturbance => b.load_bound,
            IntegralKind::Complementary => Extended::Finite(b.comp_bound),
            IntegralKind::Noise => b.noise_bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    HoldsWithEquality,
    Violated,
    SkippedDivergent,
    SkippedPrecondition,
}

impl Verdict {
    pub fn is_violation(self) -> bool {
        self == Verdict::Violated
    }
}

/// Judge `value >= bound`.
///
/// Equality is declared within `slack_coeff * (1 + |bound|)`; a violation needs the
/// value below the slack band with its error bar clear of the bound.
pub fn judge(value: f64, err: f64, bound: f64, slack_coeff: f64) -> Verdict {
    let slack = slack_coeff * (1.0 + bound.abs());
    let diff = value - bound;
    if diff > slack {
        Verdict::Holds
    } else if diff >= -slack || (value + err.abs() >= bound && slack_coeff > 0.0) {
        Verdict::HoldsWithEquality
    } else {
        Verdict::Violated
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AnalyticRecord {
    pub kind: IntegralKind,
    pub quadrature: IntegralResult,
    pub bound: Extended,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Corollary3Report {
    pub bounds: BoundReport,
    pub records: Vec<AnalyticRecord>,
    pub closed_loop_poles: Vec<Complex64>,
    pub loop_relative_degree: i64,
    pub loop_type: i64,
    pub unstable_cancellation: bool,
}

impl Corollary3Report {
    pub fn record(&self, kind: IntegralKind) -> &AnalyticRecord {
        self.records.iter().find(|r| r.kind == kind).expect("all four kinds present")
    }
}

/// Why a kind cannot be judged on this loop, if anything.
pub fn precondition_failure(kind: IntegralKind, loop_relative_degree: i64, loop_type: i64) -> Option<String> {
    match kind.weight() {
        Weight::Unweighted if loop_relative_degree < 2 => Some(format!(
            "loop relative degree {loop_relative_degree} < 2; value reported informationally"
        )),
        Weight::InvOmegaSq if loop_type < 2 => {
            Some(format!("loop type {loop_type} < 2; value reported informationally"))
        }
        _ => None,
    }
}

pub fn corollary3_report(g: &RationalTF, c: &RationalTF, slack_coeff: f64) -> Result<Corollary3Report, LimitsError> {
    let gof = gang_of_four(g, c)?;
    if !is_hurwitz(&gof.closed_loop_poles, MARGIN_TOL) {
        return Err(LimitsError::UnstableClosedLoop);
    }
    let bounds = analytic_bounds(g, MARGIN_TOL)?;
    let l = g.mul(c);
    let (rd, ty) = (l.relative_degree(), l.origin_order());
    let mut records = Vec::new();
    for kind in IntegralKind::ALL {
        let q = bode_quadrature(kind.transfer(&gof), kind.weight())?;
        let bound = kind.bound(&bounds);
        let (verdict, note) = if let Some(why) = precondition_failure(kind, rd, ty) {
            (Verdict::SkippedPrecondition, Some(why))
        } else {
            match (bound, q.is_converged()) {
                (Extended::Finite(b), true) => (judge(q.value, q.abs_error_estimate, b, slack_coeff), None),
                (Extended::Finite(_), false) => (Verdict::SkippedDivergent, Some(format!("integral status {:?}", q.status))),
                (other, _) => (Verdict::SkippedDivergent, Some(format!("bound {other:?}"))),
            }
        };
        records.push(AnalyticRecord {
            kind,
            quadrature: q,
            bound,
            verdict,
            note,
        });
    }
    Ok(Corollary3Report {
        bounds,
        records,
        closed_loop_poles: gof.closed_loop_poles,
        loop_relative_degree: rd,
        loop_type: ty,
        unstable_cancellation: gof.unstable_cancellation,
    })
}
