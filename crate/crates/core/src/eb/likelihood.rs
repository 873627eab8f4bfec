//! Likelihood of the hierarchical Gamma model
//!
//!   φ_j ~ N(φ, σ²),   z²_ij | φ_j ~ Gamma(shape 1/2, mean φ_j + 1).
//!
//! The study effect is integrated out with a Gauss–Hermite rule. By default
//! the rule is adaptive and works in s = ln(φ_j + 1): for each study it is
//! centred at the mode of the integrand in s and scaled by the curvature
//! there. In φ_j itself the likelihood has an essential singularity at
//! φ_j = −1, and the fixed rule centred at φ and scaled by σ (still
//! available through `FitConfig::adaptive`) converges slowly when a study's
//! likelihood reaches toward it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;

use super::data::{Dataset, GroupStats, StudyGroup};

/// Log-likelihood assigned where the Gamma mean φ_j + 1 is not positive.
pub const LOG_SENTINEL: f64 = -1e10;

pub const SHAPE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Gauss–Hermite nodes for the random-effect integral.
    pub gh_nodes: usize,
    /// Adaptive rule on the log-mean scale instead of the fixed rule
    /// centred at φ and scaled by σ.
    #[serde(default = "adaptive_default")]
    pub adaptive: bool,
    /// Convergence tolerance on the log-likelihood spread of the simplex.
    pub tolerance: f64,
    /// Convergence tolerance on the simplex diameter in parameter space.
    pub x_tolerance: f64,
    pub max_iterations: usize,
    /// Floor on the Gamma mean φ_j + 1.
    pub epsilon_mean: f64,
    /// Hold σ at this value instead of estimating it.
    pub fixed_sigma: Option<f64>,
    /// Whether the likelihood corrects for the p ≤ 0.001 exclusion. Always
    /// false: the model is fitted to the retained records as they are.
    pub censoring_corrected: bool,
}

fn adaptive_default() -> bool {
    true
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            gh_nodes: 40,
            adaptive: true,
            tolerance: 1e-8,
            x_tolerance: 1e-7,
            max_iterations: 2000,
            epsilon_mean: 1e-12,
            fixed_sigma: None,
            censoring_corrected: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gh_nodes < 10 {
            return Err(Error::Validation(format!("gh_nodes must be at least 10, got {}", self.gh_nodes)));
        }
        if !(self.tolerance > 0.0) || !(self.x_tolerance > 0.0) {
            return Err(Error::Validation("optimizer tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Validation("max_iterations must be positive".into()));
        }
        if !(self.epsilon_mean > 0.0) {
            return Err(Error::Validation("epsilon_mean must be positive".into()));
        }
        if let Some(s) = self.fixed_sigma {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::Validation(format!("fixed sigma must be finite and nonnegative, got {s}")));
            }
        }
        if self.censoring_corrected {
            return Err(Error::Validation("censoring correction is not implemented".into()));
        }
        Ok(())
    }
}

/// Σ_i log Gamma(z²_ij; shape 1/2, mean φ_j + 1), or [`LOG_SENTINEL`] when
/// φ_j + 1 ≤ `epsilon_mean`.
pub fn study_conditional_loglik(group: &StudyGroup, phi_j: f64, cfg: &FitConfig) -> f64 {
    conditional_from_stats(group, phi_j, cfg.epsilon_mean)
}

fn conditional_from_stats(group: &StudyGroup, phi_j: f64, epsilon_mean: f64) -> f64 {
    let mean = phi_j + 1.0;
    if !(mean > epsilon_mean) {
        return LOG_SENTINEL;
    }
    loglik_at_mean(&group.stats(), mean)
}

fn loglik_at_mean(s: &GroupStats, mean: f64) -> f64 {
    let scale = mean / SHAPE;
    s.n * (-ln_gamma(SHAPE) - SHAPE * scale.ln()) + (SHAPE - 1.0) * s.sum_ln_z_sq - s.sum_z_sq / scale
}

/// Marginal log-likelihood evaluator with a cached quadrature rule.
#[derive(Debug, Clone)]
pub struct MarginalLikelihood<'a> {
    dataset: &'a Dataset,
    rule: GaussHermite,
    log_weights: Vec<f64>,
    /// ln w_k + x_k², for the adaptive rule.
    log_weights_adaptive: Vec<f64>,
    adaptive: bool,
    epsilon_mean: f64,
}

impl<'a> MarginalLikelihood<'a> {
    pub fn new(dataset: &'a Dataset, cfg: &FitConfig) -> Result<Self> {
        let rule = GaussHermite::new(cfg.gh_nodes)?;
        let ln_sqrt_pi = 0.5 * std::f64::consts::PI.ln();
        let log_weights = rule.weights.iter().map(|w| w.ln() - ln_sqrt_pi).collect();
        let log_weights_adaptive =
            rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w.ln() + x * x - ln_sqrt_pi).collect();
        Ok(Self {
            dataset,
            rule,
            log_weights,
            log_weights_adaptive,
            adaptive: cfg.adaptive,
            epsilon_mean: cfg.epsilon_mean,
        })
    }

    /// log ∫ exp(ℓ_j(φ_j)) N(φ_j; φ, σ²) dφ_j for one study.
    pub fn study(&self, group: &StudyGroup, phi: f64, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return conditional_from_stats(group, phi, self.epsilon_mean);
        }
        if self.adaptive {
            self.study_adaptive(group, phi, sigma)
        } else {
            self.study_fixed(group, phi, sigma)
        }
    }

    fn study_fixed(&self, group: &StudyGroup, phi: f64, sigma: f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sigma;
        let terms = self.rule.nodes.iter().zip(&self.log_weights).map(|(x, lw)| {
            let ll = conditional_from_stats(group, phi + scale * x, self.epsilon_mean);
            if ll == LOG_SENTINEL {
                f64::NEG_INFINITY
            } else {
                lw + ll
            }
        });
        log_sum_exp(terms)
    }

    /// Adaptive rule in s = ln(φ_j + 1), where the integrand
    /// exp(ℓ(e^s − 1)) N(e^s − 1; φ, σ²) e^s is smooth on the whole line.
    fn study_adaptive(&self, group: &StudyGroup, phi: f64, sigma: f64) -> f64 {
        let stats = group.stats();
        let Some((mode, curvature)) = log_mean_mode(stats.n, stats.sum_z_sq, phi, sigma) else {
            return self.study_fixed(group, phi, sigma);
        };
        let spread = (-1.0 / curvature).sqrt();
        let scale = std::f64::consts::SQRT_2 * spread;
        let terms = self.rule.nodes.iter().zip(&self.log_weights_adaptive).map(|(x, lw)| {
            let s = mode + scale * x;
            let mean = s.exp();
            if !(mean > self.epsilon_mean) || !mean.is_finite() {
                return f64::NEG_INFINITY;
            }
            let d = (mean - 1.0 - phi) / sigma;
            lw + loglik_at_mean(&stats, mean) - 0.5 * d * d + s
        });
        let total = log_sum_exp(terms);
        if total == LOG_SENTINEL {
            return LOG_SENTINEL;
        }
        total + (spread / sigma).ln()
    }

    /// Sum over studies. Contributions are computed in parallel and reduced
    /// in study order so repeated evaluations are bit-identical.
    pub fn eval(&self, phi: f64, sigma: f64) -> f64 {
        if !(sigma >= 0.0) || !phi.is_finite() || !sigma.is_finite() {
            return LOG_SENTINEL;
        }
        let parts: Vec<f64> = self
            .dataset
            .groups
            .par_iter()
            .with_min_len(8)
            .map(|g| self.study(g, phi, sigma))
            .collect();
        if parts.contains(&LOG_SENTINEL) {
            return LOG_SENTINEL;
        }
        parts.iter().sum()
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return LOG_SENTINEL;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Mode and second derivative of
/// h(s) = ℓ(e^s) − (e^s − 1 − φ)²/(2σ²) + s, where ℓ(m) is the log-likelihood
/// at Gamma mean m of `n` records with Σz² = `sum_z_sq`. h' runs from +∞
/// to −∞; the crossing is located by Newton steps kept inside a
/// sign-change bracket. `None` if the bracket cannot be established or h
/// is not concave at the crossing.
fn log_mean_mode(n: f64, sum_z_sq: f64, phi: f64, sigma: f64) -> Option<(f64, f64)> {
    let k = SHAPE;
    let v = sigma * sigma;
    let slope = |s: f64| {
        let u = s.exp();
        -n * k + sum_z_sq * k / u - (u - 1.0 - phi) * u / v + 1.0
    };
    let curvature = |s: f64| {
        let u = s.exp();
        -sum_z_sq * k / u - u * (2.0 * u - 1.0 - phi) / v
    };
    let centre = (sum_z_sq / n).ln().max((1.0 + phi).max(1e-3).ln());
    let mut lo = centre - 1.0;
    let mut hi = centre + 1.0;
    let mut step = 1.0;
    while !(slope(lo) > 0.0) {
        step *= 2.0;
        lo -= step;
        if lo < -800.0 {
            return None;
        }
    }
    step = 1.0;
    while !(slope(hi) < 0.0) {
        step *= 2.0;
        hi += step;
        if hi > 700.0 {
            return None;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = slope(s);
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let c = curvature(s);
        let mut next = if c < 0.0 { s - g / c } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - s).abs() <= 1e-14 * (1.0 + s.abs());
        s = next;
        if done {
            break;
        }
    }
    let c = curvature(s);
    (c < 0.0 && c.is_finite()).then_some((s, c))
}

/// Marginal log-likelihood of (φ, σ) for a dataset.
pub fn marginal_loglik(phi: f64, sigma: f64, dataset: &Dataset, cfg: &FitConfig) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::domain(format!("sigma must be nonnegative, got {sigma}")));
    }
    Ok(MarginalLikelihood::new(dataset, cfg)?.eval(phi, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eb::data::ZRecord;
    use crate::kernel::gamma_log_density;

    fn group_from_z_sq(id: &str, zs: &[f64]) -> StudyGroup {
        let records = zs
            .iter()
            .map(|&z2| {
                let p = crate::kernel::two_sided_p(z2.sqrt());
                let mut r = ZRecord::from_p(id, p).unwrap();
                r.z_abs = z2.sqrt();
                r.z_sq = z2;
                r
            })
            .collect();
        StudyGroup::new(id, records).unwrap()
    }

    #[test]
    fn single_record_matches_chi_square() {
        let g = group_from_z_sq("a", &[1.0]);
        let ll = study_conditional_loglik(&g, 0.0, &FitConfig::default());
        assert!((ll - 0.241_970_724_519_143_37f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn sentinel_at_invalid_mean() {
        let g = group_from_z_sq("a", &[1.0, 2.0]);
        assert_eq!(study_conditional_loglik(&g, -1.0, &FitConfig::default()), LOG_SENTINEL);
        assert_eq!(study_conditional_loglik(&g, -3.0, &FitConfig::default()), LOG_SENTINEL);
    }

    #[test]
    fn sufficient_statistics_match_direct_sum() {
        let zs = [0.2, 1.7, 4.4, 0.01];
        let g = group_from_z_sq("a", &zs);
        for phi in [-0.5, 0.0, 1.3] {
            let direct: f64 = zs.iter().map(|&x| gamma_log_density(x, 0.5, phi + 1.0).unwrap()).sum();
            let fast = study_conditional_loglik(&g, phi, &FitConfig::default());
            assert!((direct - fast).abs() < 1e-12, "phi = {phi}");
        }
        let doubled = group_from_z_sq("a", &[1.0, 1.0]);
        let single = group_from_z_sq("a", &[1.0]);
        let cfg = FitConfig::default();
        assert_eq!(
            study_conditional_loglik(&doubled, 0.4, &cfg),
            2.0 * study_conditional_loglik(&single, 0.4, &cfg)
        );
    }

    #[test]
    fn zero_sigma_is_pooled_model() {
        let ds = Dataset {
            groups: vec![group_from_z_sq("a", &[0.5, 2.0]), group_from_z_sq("b", &[3.0])],
        };
        let cfg = FitConfig::default();
        let pooled: f64 = [0.5, 2.0, 3.0].iter().map(|&x| gamma_log_density(x, 0.5, 1.7).unwrap()).sum();
        assert!((marginal_loglik(0.7, 0.0, &ds, &cfg).unwrap() - pooled).abs() < 1e-12);
        assert!(marginal_loglik(0.7, -1.0, &ds, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig { gh_nodes: 9, ..Default::default() }.validate().is_err());
        assert!(FitConfig { censoring_corrected: true, ..Default::default() }.validate().is_err());
        assert!(FitConfig { fixed_sigma: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(FitConfig::default().validate().is_ok());
    }
}
