//! Inference for a regression coefficient under the zero-mean normal prior
//! whose standard deviation equals the estimator's standard error.
//!
//! - [`posterior`]: conjugate posterior, sign probability, conditional
//!   coverage of the usual confidence interval, prior-data conflict.
//! - [`flat`]: what the flat prior does to magnitude and sign.
//! - [`jeffreys`]: Jeffreys prior for |β| under the sign/magnitude split.
//! - [`eb`]: empirical-Bayes estimate of the prior scale from p-values.
//! - [`verify`]: Monte-Carlo checks of the above.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod eb;
pub mod error;
pub mod flat;
pub mod jeffreys;
pub mod kernel;
pub mod posterior;
pub mod quadrature;
mod special;
pub mod verify;

pub use error::{Error, Result};
pub use posterior::{Estimate, PosteriorSummary, PriorSpec};
