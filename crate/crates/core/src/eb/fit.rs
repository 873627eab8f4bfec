use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::critical_value;

use super::data::Dataset;
use super::likelihood::{FitConfig, MarginalLikelihood, LOG_SENTINEL, SHAPE};
use super::optim::{minimize, NelderMeadOptions};

pub const MIN_STUDIES_MIXED: usize = 2;
pub const MIN_RECORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Mixed,
    Marginal,
}

/// Fitted hierarchical Gamma model.
///
/// `sqrt_phi` is the estimated ratio of prior standard deviation to standard
/// error. The interval is a Wald interval for φ with endpoints clamped at 0,
/// mapped through the square root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EBFit {
    pub model_kind: ModelKind,
    pub phi: f64,
    pub sigma: f64,
    pub sqrt_phi: f64,
    pub sqrt_phi_ci: (f64, f64),
    pub phi_se: f64,
    /// Delta-method standard error of √φ; absent when φ̂ ≤ 0.
    pub sqrt_phi_se: Option<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub n_records: usize,
    pub n_studies: usize,
    /// Covariance of (φ, log σ). Rows and columns for log σ are zero when σ
    /// is not estimated.
    pub vcov: [[f64; 2]; 2],
    /// φ̂ ≤ 0: the z-values are no more dispersed than under β = 0.
    pub phi_nonpositive: bool,
    pub ci_method: String,
    pub censoring_corrected: bool,
    pub sigma_fixed: Option<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarted: bool,
    pub diagnostics: Vec<String>,
}

impl EBFit {
    /// |√φ̂ − target| in units of the estimated standard error of √φ̂.
    pub fn sqrt_phi_z_distance(&self, target: f64) -> Option<f64> {
        self.sqrt_phi_se.map(|se| (self.sqrt_phi - target).abs() / se)
    }
}

const CI_METHOD: &str = "wald-phi-clamped-sqrt";

fn sqrt_phi_summary(phi: f64, phi_se: f64) -> ((f64, f64), Option<f64>) {
    let z = critical_value(0.95).expect("valid level");
    let lo = (phi - z * phi_se).max(0.0).sqrt();
    let hi = (phi + z * phi_se).max(0.0).sqrt();
    let se = (phi > 0.0).then(|| phi_se / (2.0 * phi.sqrt()));
    ((lo, hi), se)
}

/// Fit the mixed model by maximizing the quadrature marginal likelihood over
/// (φ, log σ), or over φ alone when `cfg.fixed_sigma` is set.
pub fn fit_mixed(dataset: &Dataset, cfg: &FitConfig) -> Result<EBFit> {
    cfg.validate()?;
    if dataset.n_studies() < MIN_STUDIES_MIXED {
        return Err(Error::Validation(format!(
            "mixed model needs at least {MIN_STUDIES_MIXED} studies, got {}",
            dataset.n_studies()
        )));
    }
    if dataset.n_records() < MIN_RECORDS {
        return Err(Error::Validation(format!(
            "mixed model needs at least {MIN_RECORDS} records, got {}",
            dataset.n_records()
        )));
    }
    let lik = MarginalLikelihood::new(dataset, cfg)?;
    let phi0 = (dataset.mean_z_sq() - 1.0).max(0.01);
    let mut diagnostics = Vec::new();

    let (x, f, converged, iterations, evaluations, restarted) = match cfg.fixed_sigma {
        Some(sigma) => {
            let opts = NelderMeadOptions {
                f_tol: cfg.tolerance,
                x_tol: cfg.x_tolerance,
                max_iterations: cfg.max_iterations,
                initial_step: vec![0.1 * phi0.max(1.0)],
                stall_iterations: 200,
            };
            let r = minimize(|x| -lik.eval(x[0], sigma), &[phi0], &opts);
            (vec![r.x[0], sigma.ln()], r.f, r.converged, r.iterations, r.evaluations, false)
        }
        None => {
            let opts = NelderMeadOptions {
                f_tol: cfg.tolerance,
                x_tol: cfg.x_tolerance,
                max_iterations: cfg.max_iterations,
                initial_step: vec![0.1 * phi0.max(1.0), 0.5],
                stall_iterations: 200,
            };
            let objective = |x: &[f64]| -lik.eval(x[0], x[1].exp());
            let first = minimize(objective, &[phi0, 0.5f64.ln()], &opts);
            if first.converged {
                (first.x, first.f, true, first.iterations, first.evaluations, false)
            } else {
                diagnostics.push(format!(
                    "simplex search from (phi={phi0}, sigma=0.5) stopped after {} iterations; restarting from sigma=0.1",
                    first.iterations
                ));
                let second = minimize(objective, &[phi0, 0.1f64.ln()], &opts);
                let pick = if second.f <= first.f { second.clone() } else { first.clone() };
                (
                    pick.x,
                    pick.f,
                    second.converged,
                    first.iterations + second.iterations,
                    first.evaluations + second.evaluations,
                    true,
                )
            }
        }
    };

    let phi = x[0];
    let sigma = match cfg.fixed_sigma {
        Some(s) => s,
        None => x[1].exp(),
    };
    let log_likelihood = -f;
    if log_likelihood <= LOG_SENTINEL {
        diagnostics.push("log-likelihood is at the invalid-mean sentinel".into());
    }

    let vcov = match cfg.fixed_sigma {
        Some(s) => {
            let h = second_difference(|p| -lik.eval(p, s), phi);
            if h > 0.0 {
                [[1.0 / h, 0.0], [0.0, 0.0]]
            } else {
                diagnostics.push(format!("curvature in phi is not positive ({h:e})"));
                [[0.0; 2]; 2]
            }
        }
        None => covariance_2d(&lik, phi, x[1], &mut diagnostics),
    };
    let phi_se = vcov[0][0].sqrt();
    let (sqrt_phi_ci, sqrt_phi_se) = sqrt_phi_summary(phi, phi_se);
    if !converged {
        diagnostics.push(format!("optimizer did not converge within {} iterations", cfg.max_iterations));
    }

    Ok(EBFit {
        model_kind: ModelKind::Mixed,
        phi,
        sigma,
        sqrt_phi: phi.max(0.0).sqrt(),
        sqrt_phi_ci,
        phi_se,
        sqrt_phi_se,
        log_likelihood,
        converged,
        n_records: dataset.n_records(),
        n_studies: dataset.n_studies(),
        vcov,
        phi_nonpositive: phi <= 0.0,
        ci_method: CI_METHOD.into(),
        censoring_corrected: cfg.censoring_corrected,
        sigma_fixed: cfg.fixed_sigma,
        iterations,
        evaluations,
        restarted,
        diagnostics,
    })
}

fn step_for(x: f64) -> f64 {
    1e-3 * x.abs().max(1.0)
}

fn second_difference<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = step_for(x);
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Inverse of the numerically differenced Hessian of −log L in
/// (φ, log σ). Falls back to the φ-curvature alone when the log σ direction
/// is flat, as happens when σ̂ collapses toward zero.
fn covariance_2d(lik: &MarginalLikelihood, phi: f64, log_sigma: f64, diagnostics: &mut Vec<String>) -> [[f64; 2]; 2] {
    let f = |p: f64, ls: f64| -lik.eval(p, ls.exp());
    let (hp, hs) = (step_for(phi), step_for(log_sigma));
    let f0 = f(phi, log_sigma);
    let h_pp = (f(phi + hp, log_sigma) - 2.0 * f0 + f(phi - hp, log_sigma)) / (hp * hp);
    let h_ss = (f(phi, log_sigma + hs) - 2.0 * f0 + f(phi, log_sigma - hs)) / (hs * hs);
    let h_ps = (f(phi + hp, log_sigma + hs) - f(phi + hp, log_sigma - hs) - f(phi - hp, log_sigma + hs)
        + f(phi - hp, log_sigma - hs))
        / (4.0 * hp * hs);
    let det = h_pp * h_ss - h_ps * h_ps;
    if h_pp > 0.0 && h_ss > 0.0 && det > 0.0 {
        return [[h_ss / det, -h_ps / det], [-h_ps / det, h_pp / det]];
    }
    if h_pp > 0.0 {
        diagnostics.push(format!(
            "Hessian in (phi, log sigma) is not positive definite (h_ss = {h_ss:e}); \
             standard error of phi from its own curvature"
        ));
        return [[1.0 / h_pp, 0.0], [0.0, 0.0]];
    }
    diagnostics.push(format!("curvature in phi is not positive ({h_pp:e}); no standard errors"));
    [[0.0; 2]; 2]
}

/// Pooled fit ignoring the study effect. With the Gamma shape known, the
/// MLE of the mean is the sample mean of z², so φ̂ = mean(z²) − 1. The
/// standard error is the study-clustered sandwich variance of that mean,
/// with the G/(G−1) small-sample factor. With a single study the clustered
/// form is degenerate and each record is treated as its own cluster.
pub fn fit_marginal(dataset: &Dataset) -> Result<EBFit> {
    let n = dataset.n_records();
    if n < MIN_RECORDS {
        return Err(Error::Validation(format!("marginal model needs at least {MIN_RECORDS} records, got {n}")));
    }
    let nf = n as f64;
    let mean = dataset.mean_z_sq();
    let phi = mean - 1.0;
    let g = dataset.n_studies();
    let mut diagnostics = Vec::new();

    let variance = if g >= 2 {
        let meat: f64 = dataset
            .groups
            .iter()
            .map(|grp| {
                let s: f64 = grp.records.iter().map(|r| r.z_sq - mean).sum();
                s * s
            })
            .sum();
        meat / (nf * nf) * g as f64 / (g as f64 - 1.0)
    } else {
        diagnostics.push("single study: clustered variance degenerates, using record-level variance".into());
        dataset.records().map(|r| (r.z_sq - mean).powi(2)).sum::<f64>() / (nf * nf)
    };
    let phi_se = variance.sqrt();
    let (sqrt_phi_ci, sqrt_phi_se) = sqrt_phi_summary(phi, phi_se);

    let log_likelihood = dataset
        .records()
        .map(|r| crate::kernel::gamma_log_density_unchecked(r.z_sq, SHAPE, mean))
        .sum::<f64>();
    if phi <= 0.0 {
        diagnostics.push(format!("phi estimate {phi} is not positive; z-values are no more dispersed than null"));
    }

    Ok(EBFit {
        model_kind: ModelKind::Marginal,
        phi,
        sigma: 0.0,
        sqrt_phi: phi.max(0.0).sqrt(),
        sqrt_phi_ci,
        phi_se,
        sqrt_phi_se,
        log_likelihood,
        converged: true,
        n_records: n,
        n_studies: g,
        vcov: [[variance, 0.0], [0.0, 0.0]],
        phi_nonpositive: phi <= 0.0,
        ci_method: CI_METHOD.into(),
        censoring_corrected: false,
        sigma_fixed: Some(0.0),
        iterations: 0,
        evaluations: 0,
        restarted: false,
        diagnostics,
    })
}
