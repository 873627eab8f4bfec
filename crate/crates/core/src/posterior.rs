//! Conjugate normal–normal inference for a single coefficient estimate.
//!
//! With prior β ~ N(0, τ²se²) and B | β ~ N(β, se²), the posterior is
//! normal with mean b·τ²/(1+τ²) and variance se²·τ²/(1+τ²). The default
//! prior is τ = 1, giving N(b/2, se²/2). The flat prior gives N(b, se²).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{std_normal_cdf, std_normal_quantile, two_sided_p};

/// Two-sided p-value below which the default prior is in conflict with the
/// data.
pub const CONFLICT_P_THRESHOLD: f64 = 0.001;

/// An unbiased, normally distributed coefficient estimate `b` with known
/// standard error `se`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    b: f64,
    se: f64,
}

impl Estimate {
    pub fn new(b: f64, se: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::domain(format!("estimate must be finite, got {b}")));
        }
        if !(se > 0.0) || !se.is_finite() {
            return Err(Error::domain(format!("standard error must be positive and finite, got {se}")));
        }
        Ok(Self { b, se })
    }

    /// Estimate whose standard error is implied by its two-sided p-value.
    pub fn from_p_value(b: f64, two_sided_p: f64) -> Result<Self> {
        Self::new(b, implied_se(b, two_sided_p)?)
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn se(&self) -> f64 {
        self.se
    }

    /// b / se
    pub fn z(&self) -> f64 {
        self.b / self.se
    }
}

/// Zero-mean prior for a coefficient, scaled relative to the standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorSpec {
    /// N(0, (tau·se)²)
    ZeroMeanNormal { tau: f64 },
    /// Improper uniform prior on the real line.
    Flat,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::ZeroMeanNormal { tau: 1.0 }
    }
}

impl PriorSpec {
    pub fn normal(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::domain(format!("prior scale ratio tau must be positive, got {tau}")));
        }
        Ok(PriorSpec::ZeroMeanNormal { tau })
    }

    /// Fraction of the estimate retained by the posterior mean, τ²/(1+τ²).
    fn shrinkage_factor(&self) -> f64 {
        match *self {
            PriorSpec::ZeroMeanNormal { tau } => {
                let t2 = tau * tau;
                t2 / (1.0 + t2)
            }
            PriorSpec::Flat => 1.0,
        }
    }
}

/// Normal posterior for β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPosterior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPosterior {
    pub fn new(est: &Estimate, prior: &PriorSpec) -> Self {
        let k = prior.shrinkage_factor();
        Self {
            mean: est.b * k,
            sd: est.se * k.sqrt(),
        }
    }

    /// P(β > 0 | B = b)
    pub fn prob_positive(&self) -> f64 {
        std_normal_cdf(self.mean / self.sd)
    }

    /// Central interval holding `level` posterior mass.
    pub fn interval(&self, level: f64) -> Result<(f64, f64)> {
        let z = critical_value(level)?;
        Ok((self.mean - z * self.sd, self.mean + z * self.sd))
    }

    /// Posterior mass of the interval (lo, hi).
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        std_normal_cdf((hi - self.mean) / self.sd) - std_normal_cdf((lo - self.mean) / self.sd)
    }
}

/// z such that a central normal interval ±z has probability `level`.
pub fn critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("interval level must lie in (0, 1), got {level}")));
    }
    std_normal_quantile(0.5 + 0.5 * level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub prior: PriorSpec,
    pub post_mean: f64,
    pub post_sd: f64,
    pub sign_prob_positive: f64,
    pub level: f64,
    pub credible_interval: (f64, f64),
    /// Posterior probability that the usual 95% confidence interval
    /// b ± z₀.₉₇₅·se contains β.
    pub conditional_coverage_95: f64,
    pub conflict: bool,
    pub two_sided_p: f64,
}

/// Posterior summary with a 95% credible interval.
pub fn posterior(est: &Estimate, prior: &PriorSpec) -> PosteriorSummary {
    posterior_at_level(est, prior, 0.95).expect("0.95 is a valid level")
}

pub fn posterior_at_level(est: &Estimate, prior: &PriorSpec, level: f64) -> Result<PosteriorSummary> {
    let post = NormalPosterior::new(est, prior);
    let credible_interval = post.interval(level)?;
    let z95 = critical_value(0.95)?;
    let coverage = post.mass(est.b - z95 * est.se, est.b + z95 * est.se);
    let (conflict, _) = prior_data_conflict(est);
    Ok(PosteriorSummary {
        prior: *prior,
        post_mean: post.mean,
        post_sd: post.sd,
        sign_prob_positive: post.prob_positive(),
        level,
        credible_interval,
        conditional_coverage_95: coverage,
        conflict,
        two_sided_p: two_sided_p(est.z()),
    })
}

/// P(β > 0 | B = b): Φ(b·τ / (se·√(1+τ²))), or Φ(b/se) under the flat prior.
pub fn sign_probability(est: &Estimate, prior: &PriorSpec) -> f64 {
    NormalPosterior::new(est, prior).prob_positive()
}

/// Conditional coverage of b ± z₀.₉₇₅·se under the default prior:
/// Φ(b/(√2 se) + z√2) − Φ(b/(√2 se) − z√2).
pub fn conditional_coverage(est: &Estimate) -> f64 {
    coverage_at_z(est.z())
}

fn coverage_at_z(z: f64) -> f64 {
    let crit = critical_value(0.95).expect("valid level");
    let m = z / std::f64::consts::SQRT_2;
    let half = crit * std::f64::consts::SQRT_2;
    // Φ(m+h) − Φ(m−h) = Φ(h−|m|) − Φ(−h−|m|); the reflected form keeps
    // both arguments away from the saturated upper tail
    let m = m.abs();
    std_normal_cdf(half - m) - std_normal_cdf(-half - m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub p_value: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub points: Vec<CoveragePoint>,
}

impl CoverageCurve {
    pub fn is_monotone_increasing(&self) -> bool {
        let mut sorted = self.points.clone();
        sorted.sort_by(|a, b| a.p_value.partial_cmp(&b.p_value).unwrap());
        sorted.windows(2).all(|w| w[1].coverage >= w[0].coverage)
    }
}

/// Conditional coverage as a function of the two-sided p-value. A p-value of
/// exactly 1 corresponds to b = 0.
pub fn coverage_curve(p_grid: &[f64]) -> Result<CoverageCurve> {
    let points = p_grid
        .iter()
        .map(|&p| {
            let z = crate::kernel::abs_z_from_two_sided_p(p)?;
            Ok(CoveragePoint { p_value: p, coverage: coverage_at_z(z) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageCurve { points })
}

/// Credible interval under the default prior: b/2 ± z·se/√2.
pub fn credible_interval(est: &Estimate, level: f64) -> Result<(f64, f64)> {
    NormalPosterior::new(est, &PriorSpec::default()).interval(level)
}

/// Returns the conflict flag (two-sided p < 0.001) and the probability,
/// under the default prior's marginal B ~ N(0, 2se²), of an estimate at
/// least as extreme.
pub fn prior_data_conflict(est: &Estimate) -> (bool, f64) {
    let z = est.z().abs();
    let flag = two_sided_p(z) < CONFLICT_P_THRESHOLD;
    let tail = 2.0 * std_normal_cdf(-z / std::f64::consts::SQRT_2);
    (flag, tail)
}

/// Standard error implied by an estimate and its two-sided p-value,
/// |b| / |Φ⁻¹(p/2)|.
pub fn implied_se(b: f64, two_sided_p: f64) -> Result<f64> {
    if b == 0.0 || !b.is_finite() {
        return Err(Error::domain(format!("implied standard error needs a finite nonzero estimate, got {b}")));
    }
    if !(two_sided_p > 0.0 && two_sided_p < 1.0) {
        return Err(Error::domain(format!("two-sided p must lie in (0, 1), got {two_sided_p}")));
    }
    let z = std_normal_quantile(two_sided_p / 2.0)?.abs();
    Ok(b.abs() / z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(b: f64, se: f64) -> Estimate {
        Estimate::new(b, se).unwrap()
    }

    #[test]
    fn default_posterior_halves_the_estimate() {
        let s = posterior(&est(3.0, 1.0), &PriorSpec::default());
        assert_eq!(s.post_mean, 1.5);
        assert!((s.post_sd - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
        let s = posterior(&est(0.0, 2.0), &PriorSpec::default());
        assert_eq!(s.post_mean, 0.0);
        assert!((s.post_sd - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn flat_posterior_is_sampling_distribution() {
        let s = posterior(&est(3.0, 1.0), &PriorSpec::Flat);
        assert_eq!((s.post_mean, s.post_sd), (3.0, 1.0));
        assert!((s.conditional_coverage_95 - 0.95).abs() < 1e-14);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(Estimate::new(1.0, 0.0).is_err());
        assert!(Estimate::new(f64::NAN, 1.0).is_err());
        assert!(PriorSpec::normal(0.0).is_err());
        assert!(credible_interval(&est(1.0, 1.0), 1.0).is_err());
        assert!(credible_interval(&est(1.0, 1.0), 0.0).is_err());
        assert!(implied_se(0.0, 0.05).is_err());
        assert!(implied_se(1.0, 1.0).is_err());
        assert!(coverage_curve(&[0.5, 0.0]).is_err());
        assert!(coverage_curve(&[1.5]).is_err());
    }

    #[test]
    fn sign_probability_cases() {
        assert_eq!(sign_probability(&est(0.0, 3.0), &PriorSpec::default()), 0.5);
        let p = sign_probability(&est(1.96, 1.0), &PriorSpec::default());
        assert!((p - 0.917_115_752_170_103_9).abs() < 1e-14);
        let p = sign_probability(&est(1.96, 1.0), &PriorSpec::Flat);
        assert!((p - 0.975_002_104_851_779_6).abs() < 1e-14);
    }

    #[test]
    fn conflict_threshold() {
        let (flag, tail) = prior_data_conflict(&est(3.29, 1.0));
        assert!(!flag);
        assert!((tail - 0.019_998_217_783_908_82).abs() < 1e-14);
        assert!(prior_data_conflict(&est(3.3, 1.0)).0);
        assert!(prior_data_conflict(&est(-4.0, 1.0)).0);
        assert_eq!(prior_data_conflict(&est(0.0, 1.0)), (false, 1.0));
    }

    #[test]
    fn implied_se_values() {
        let se = implied_se(1.96, 0.05).unwrap();
        assert!((se - 1.000_018_375_572_321_7).abs() < 1e-12);
        assert_eq!(implied_se(-1.96, 0.05).unwrap(), se);
        assert!((implied_se(3.92, 0.05).unwrap() - 2.0 * se).abs() < 1e-15);
    }

    #[test]
    fn interval_width_is_location_free() {
        let z = critical_value(0.95).unwrap();
        for b in [-4.0, 0.0, 2.0, 11.0] {
            let (lo, hi) = credible_interval(&est(b, 1.5), 0.95).unwrap();
            assert!((hi - lo - 2.0 * z * 1.5 / 2f64.sqrt()).abs() < 1e-12);
        }
        let (lo, hi) = credible_interval(&est(0.0, 1.0), 0.95).unwrap();
        assert_eq!(lo, -hi);
    }

    #[test]
    fn summary_coverage_matches_closed_form_at_tau_one() {
        for b in [-3.0, -0.4, 0.0, 1.96, 5.0] {
            let e = est(b, 0.7);
            let s = posterior(&e, &PriorSpec::default());
            assert!((s.conditional_coverage_95 - conditional_coverage(&e)).abs() < 1e-14);
        }
    }
}
