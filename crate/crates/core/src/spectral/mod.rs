//! Welch spectral estimates, PSD-ratio sensitivity curves, their log integrals
//! and Gaussian mutual-information rates.

mod curve;
mod mi;
mod welch;

pub use curve::{
    bode_like_integral, bode_like_integral_with, sensitivity_from_spectra, sensitivity_like, BodeLikeOptions,
    SensitivityCurve, PSD_FLOOR,
};
pub use mi::{
    coherence, mi_rate_difference, mi_rate_pinsker, MiDifference, mi_rate_pinsker_band, pinsker_quadrature, MiRateEstimate,
    CLIP_EPS, CLIP_FLAG_FRACTION,
};
pub use welch::{default_nperseg, welch_spectra, CrossSpectra, SpectralEstimate, WelchOptions, WINDOW_ID};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("signal of {len} samples is too short for segments of {nperseg}")]
    TooShort { len: usize, nperseg: usize },
    #[error("channel {0} not available")]
    MissingChannel(&'static str),
    #[error("spectral grids differ")]
    GridMismatch,
    #[error("insufficient band coverage: {0}")]
    InsufficientBand(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
