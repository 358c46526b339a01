//! Monte-Carlo checks of the closed-loop limits against their analytic values.

mod checks;
mod plan;
mod render;
mod suite;

pub use checks::{
    check_appendix_identities, check_control_noise_chain, check_lemma1, check_measurement_noise_chain, worst,
    AppendixReport, ChainRecord, ChainReport, CurveCheck, CurveSamples, InequalityCheck, Lemma1Report, MiSummary, ToleranceCheck,
};
pub use plan::{derive_seed, prepare_loop, run_loop, variant_poles, LoopRun, RunSummary, SimPlan, DEFAULT_SAMPLES, DT_FACTOR};
pub use render::{curve_csvs, render_text, render_value};
pub use suite::{analyze_system, bundled_systems, run_full_suite, suite_verdict, LimitReport, SystemSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::limits::{LimitsError, DEFAULT_SLACK};
use crate::lti::LtiError;
use crate::spectral::{SpectralError, CLIP_EPS, PSD_FLOOR};
use crate::stochsim::SimError;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Limits(#[from] LimitsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("unstable loop: {0}")]
    Unstable(String),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub slack_coeff: f64,
    /// Tolerance on the paired rate identities.
    pub identity_tol: f64,
    /// Median relative error allowed between an estimated curve and `|T(jw)|`.
    pub lemma_curve_tol: f64,
    pub lemma_integral_abs: f64,
    pub lemma_integral_rel: f64,
    pub appendix_tol: f64,
    pub stationarity_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            slack_coeff: DEFAULT_SLACK,
            identity_tol: 0.05,
            lemma_curve_tol: 0.05,
            lemma_integral_abs: 0.1,
            lemma_integral_rel: 0.1,
            appendix_tol: 0.10,
            stationarity_tol: 0.25,
        }
    }
}

/// Numeric defaults echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub options: VerifyOptions,
    pub plan: SimPlan,
    pub dt_factor: f64,
    pub welch_window: String,
    pub welch_overlap: f64,
    pub coherence_clip: f64,
    pub psd_floor: f64,
    pub mi_band: String,
    pub bode_band: String,
}

impl Defaults {
    pub fn from_options(options: &VerifyOptions, plan: &SimPlan) -> Self {
        Defaults {
            options: *options,
            plan: *plan,
            dt_factor: plan.dt_factor,
            welch_window: crate::spectral::WINDOW_ID.into(),
            welch_overlap: 0.5,
            coherence_clip: 1.0 - CLIP_EPS,
            psd_floor: PSD_FLOOR,
            mi_band: "[2 pi / (duration / 10), 0.8 pi / dt]".into(),
            bode_band: "[first bin, 0.8 pi / dt] with fitted tails".into(),
        }
    }
}
