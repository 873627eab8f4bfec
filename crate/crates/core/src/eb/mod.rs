//! Empirical-Bayes estimate of the prior scale from a corpus of p-values.
//!
//! Each two-sided p-value becomes a squared z-value. Given a study effect
//! φ_j, z² is Gamma with shape 1/2 and mean φ_j + 1; across studies
//! φ_j ~ N(φ, σ²). √φ estimates the ratio of prior standard deviation to
//! standard error for a typical coefficient.

pub mod data;
pub mod fit;
pub mod likelihood;
pub mod optim;
pub mod simulate;

pub use data::{
    ingest, ingest_pairs, parse_csv, write_csv, Dataset, DropReason, DroppedRecord, IngestOutcome, RawRecord,
    StudyGroup, ZRecord, CENSOR_P, Z_ABS_FLOOR,
};
pub use fit::{fit_marginal, fit_mixed, EBFit, ModelKind};
pub use likelihood::{marginal_loglik, study_conditional_loglik, FitConfig, MarginalLikelihood, LOG_SENTINEL};
pub use simulate::{simulate_dataset, simulate_records, SimulatedRecord, SimulationSpec};
