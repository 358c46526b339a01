//! Rational transfer functions, the gang of four, and closed-loop realizations.

mod classify;
mod closed_loop;
mod gang;
pub mod poly;
mod ss;
mod tf;

pub use classify::{classify, is_hurwitz, PoleZeroClassification, MARGIN_TOL};
pub use closed_loop::{closed_loop_system, Channel, Injection, LoopRealization};
pub use gang::{characteristic_polynomial, gang_of_four, loop_gain, GangOfFour};
pub use poly::Poly;
pub use ss::{is_mean_square_stable, realize, StateSpace};
pub use tf::{inverse_plant, RationalTF, CANCEL_TOL};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LtiError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("transfer function is identically zero")]
    ZeroTransferFunction,
    #[error("non-finite coefficient or root")]
    NonFinite,
    #[error("complex root {root} has no conjugate partner")]
    NotConjugateSymmetric { root: Complex64 },
    #[error("improper transfer function ({zeros} zeros, {poles} poles)")]
    Improper { zeros: usize, poles: usize },
    #[error("evaluation point is {distance:e} from pole {pole}")]
    PoleProximity { pole: Complex64, distance: f64 },
    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,
    #[error("singular linear system")]
    Singular,
    #[error("ill-posed feedback loop: 1 + L(inf) = 0")]
    IllPosedLoop,
    #[error("noise shape: {0}")]
    NoiseShape(String),
    #[error("cannot realize: {0}")]
    Unrealizable(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `tf_eval` of the operations list.
pub fn tf_eval(tf: &RationalTF, s: Complex64) -> Result<Complex64, LtiError> {
    tf.eval(s)
}
