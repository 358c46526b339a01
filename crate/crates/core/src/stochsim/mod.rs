//! Exact-discretization simulation of closed loops driven by shaped Gaussian noise.

mod bundle;
mod discretize;
mod lyapunov;
mod rng;
mod simulate;

pub use bundle::{SignalBundle, BINARY_MAGIC};
pub use discretize::{exact_discretize, psd_factor, DiscreteSystem};
pub use lyapunov::{output_covariance, stationary_covariance};
pub use rng::NormalStream;
pub use simulate::{simulate, NoiseSpec, SimParams};

use thiserror::Error;

use crate::lti::LtiError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error("closed loop is not mean-square stable")]
    Unstable,
    #[error("state matrix is not Hurwitz")]
    NotHurwitz,
    #[error("singular Lyapunov system")]
    Singular,
    #[error("matrix exponential produced non-finite entries")]
    MatrixExponential,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("channel {0} missing from bundle")]
    MissingChannel(&'static str),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
