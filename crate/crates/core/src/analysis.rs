//! Side-by-side flat-prior and default-prior analysis of one estimate.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flat::flat_abs_posterior_mean;
use crate::posterior::{posterior_at_level, prior_data_conflict, Estimate, PosteriorSummary, PriorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalysisInput {
    StandardError { b: f64, se: f64 },
    /// Standard error implied by the two-sided p-value.
    PValue { b: f64, p: f64, implied_se: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictNote {
    pub flag: bool,
    /// Probability under the default prior of |z| at least as large as
    /// observed.
    pub marginal_tail_prob: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub input: AnalysisInput,
    pub flat: PosteriorSummary,
    pub default: PosteriorSummary,
    pub flat_abs_posterior_mean: f64,
    pub conflict: ConflictNote,
    pub warnings: Vec<String>,
}

pub const CONFLICT_WARNING: &str = "two-sided p < 0.001 (|z| > 3.29): an event of about 2% probability \
under the N(0, se^2) prior; this prior-data conflict means the default prior should not be used here";

pub fn analyze(input: AnalysisInput, tau: f64, level: f64) -> Result<AnalysisReport> {
    let est = match input {
        AnalysisInput::StandardError { b, se } => Estimate::new(b, se)?,
        AnalysisInput::PValue { b, implied_se, .. } => Estimate::new(b, implied_se)?,
    };
    let prior = PriorSpec::normal(tau)?;
    let flat = posterior_at_level(&est, &PriorSpec::Flat, level)?;
    let default = posterior_at_level(&est, &prior, level)?;
    let (flag, tail) = prior_data_conflict(&est);
    let mut warnings = Vec::new();
    if flag {
        warnings.push(CONFLICT_WARNING.to_string());
    }
    Ok(AnalysisReport {
        input,
        flat,
        default,
        flat_abs_posterior_mean: flat_abs_posterior_mean(&est),
        conflict: ConflictNote {
            flag,
            marginal_tail_prob: tail,
            message: format!(
                "P(|B| >= |b|) under the default prior = {tail:.4} (about 2% at the |z| = 3.29 threshold)"
            ),
        },
        warnings,
    })
}

impl AnalysisInput {
    pub fn from_p(b: f64, p: f64) -> Result<Self> {
        let implied_se = crate::posterior::implied_se(b, p)?;
        Ok(AnalysisInput::PValue { b, p, implied_se })
    }
}
