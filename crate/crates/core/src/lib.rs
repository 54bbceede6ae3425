//! Estimation of the proportion of watermarked tokens in text from
//! pivotal statistics, with simulators for three decoding-based watermarks.

pub mod cli;
pub mod ecdf;
pub mod error;
pub mod estimators;
pub mod io;
pub mod mle_bias;
pub mod ntp;
pub mod rng;
pub mod simulation;
pub mod sweep;
pub mod verifier;
pub mod watermark;

pub use ecdf::{Ecdf, Probability};
pub use error::{Error, Result};
pub use ntp::NtpDistribution;
pub use rng::RandomSeed;
pub use watermark::{GreenRedParams, Scheme};
