//! Bode-like integral limits of continuous-time LTI feedback loops driven by
//! Gaussian noise, with Monte-Carlo estimators that check them.

pub mod lti;
pub mod limits;
pub mod stochsim;
pub mod spectral;
pub mod verify;
pub mod cli;
