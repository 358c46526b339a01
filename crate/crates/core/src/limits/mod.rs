//! Analytic bounds, classical oracles, and quadrature of the Bode-type integrals.

mod bounds;
mod integral;
mod oracle;
pub mod quad;
mod report;

pub use bounds::{analytic_bounds, BoundReport, Extended};
pub use integral::{
    bode_quadrature, bode_quadrature_with, plant_log_integral, IntegralResult, IntegralStatus, LogIntegralOptions,
    Weight,
};
pub use oracle::{classical_oracle, closed_loop_poles_of, OracleKind};
pub use report::{
    corollary3_report, judge, precondition_failure, AnalyticRecord, Corollary3Report, IntegralKind, Verdict,
};

use thiserror::Error;

use crate::lti::LtiError;

/// Default slack coefficient for inequality verdicts.
pub const DEFAULT_SLACK: f64 = 0.02;

#[derive(Debug, Error)]
pub enum LimitsError {
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error("closed loop is not stable")]
    UnstableClosedLoop,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("transfer function is improper")]
    Improper,
    #[error("adaptive quadrature did not converge (error estimate {abs_error:e})")]
    NoConvergence { abs_error: f64 },
}

impl LimitsError {
    /// Quadrature or linear-algebra failure, as opposed to a rejected input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            LimitsError::NoConvergence { .. } | LimitsError::Lti(LtiError::EigenFailure | LtiError::Singular)
        )
    }
}
