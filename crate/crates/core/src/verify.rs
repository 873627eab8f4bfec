//! Monte-Carlo and quadrature checks of the model's theoretical properties.
//!
//! Every check draws from its own ChaCha20 stream: the generator is seeded
//! from the user seed and `set_stream` selects a fixed per-check stream id,
//! so adding a check never perturbs the draws of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eb::{fit_mixed, simulate_dataset, FitConfig, SimulationSpec};
use crate::error::Result;
use crate::flat::{sign_agreement_under_prior, SymmetricPrior};
use crate::kernel::{std_normal_cdf, two_sided_p};
use crate::posterior::{conditional_coverage, critical_value, Estimate};

mod stream {
    pub const THEOREM1: u64 = 1;
    pub const FREQUENTIST: u64 = 2;
    pub const CONDITIONAL: u64 = 3;
    pub const SIGN_CALIBRATION: u64 = 4;
    pub const EB_RECOVERY: u64 = 5;
}

/// ChaCha20 seeded from `seed` on the given stream.
pub fn check_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub name: String,
    pub n_draws: usize,
    pub statistic: f64,
    pub threshold: f64,
    /// How `statistic` is compared with `threshold`: "below", "at-most" or
    /// "at-least".
    pub direction: String,
    pub passed: bool,
    pub status: Status,
    pub seed: u64,
    pub detail: String,
}

#[derive(Clone, Copy)]
enum Direction {
    Below,
    AtMost,
    AtLeast,
}

fn report(
    name: &str,
    n_draws: usize,
    statistic: f64,
    threshold: f64,
    direction: Direction,
    seed: u64,
    detail: String,
) -> SimulationReport {
    let (passed, dir) = match direction {
        Direction::Below => (statistic < threshold, "below"),
        Direction::AtMost => (statistic <= threshold, "at-most"),
        Direction::AtLeast => (statistic >= threshold, "at-least"),
    };
    SimulationReport {
        name: name.into(),
        n_draws,
        statistic,
        threshold,
        direction: dir.into(),
        passed,
        status: if passed { Status::Passed } else { Status::Failed },
        seed,
        detail,
    }
}

fn skipped(name: &str, seed: u64, why: &str) -> SimulationReport {
    SimulationReport {
        name: name.into(),
        n_draws: 0,
        statistic: 0.0,
        threshold: 0.0,
        direction: "n/a".into(),
        passed: true,
        status: Status::Skipped,
        seed,
        detail: why.into(),
    }
}

/// Kolmogorov–Smirnov distance of a sample from Uniform(0, 1).
pub fn ks_uniform_distance(sample: &mut [f64]) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Draw β ~ N(0, se²) and B | β ~ N(β, se²); P(β > 0 | B) = Φ(B/(√2 se))
/// should be standard uniform.
pub fn theorem1_uniformity(se: f64, n: usize, seed: u64) -> SimulationReport {
    theorem1_uniformity_with_prior_sd(se, se, n, seed)
}

/// As [`theorem1_uniformity`], but draws β from N(0, prior_sd²) while still
/// computing the sign probability as if prior_sd = se. Any prior_sd ≠ se
/// should fail at large n.
pub fn theorem1_uniformity_with_prior_sd(se: f64, prior_sd: f64, n: usize, seed: u64) -> SimulationReport {
    let mut rng = check_rng(seed, stream::THEOREM1);
    let mut u: Vec<f64> = (0..n)
        .map(|_| {
            let beta = prior_sd * rng.sample::<f64, _>(StandardNormal);
            let b = beta + se * rng.sample::<f64, _>(StandardNormal);
            std_normal_cdf(b / (std::f64::consts::SQRT_2 * se))
        })
        .collect();
    let d = ks_uniform_distance(&mut u);
    let name = if prior_sd == se {
        "theorem1-uniformity".to_string()
    } else {
        format!("theorem1-uniformity-prior-sd-{prior_sd}")
    };
    report(
        &name,
        n,
        d,
        ks_critical_1pct(n),
        Direction::Below,
        seed,
        format!("KS distance of P(beta>0|B) from Uniform(0,1), se={se}, prior sd={prior_sd}"),
    )
}

/// Long-run coverage of B ± z₀.₉₇₅·se at a fixed β.
pub fn frequentist_coverage(beta: f64, se: f64, n: usize, seed: u64) -> SimulationReport {
    let z = critical_value(0.95).expect("valid level");
    let mut rng = check_rng(seed, stream::FREQUENTIST);
    let hits = (0..n)
        .filter(|_| {
            let b = beta + se * rng.sample::<f64, _>(StandardNormal);
            (b - beta).abs() < z * se
        })
        .count();
    let coverage = hits as f64 / n as f64;
    let binomial_se = (0.95 * 0.05 / n as f64).sqrt();
    report(
        &format!("frequentist-coverage-beta-{beta}-se-{se}"),
        n,
        (coverage - 0.95).abs() / binomial_se,
        4.0,
        Direction::AtMost,
        seed,
        format!("empirical coverage {coverage:.6}; statistic in binomial standard errors"),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageBin {
    pub p_lo: f64,
    pub p_hi: f64,
    pub count: usize,
    pub empirical: f64,
    pub expected: f64,
    /// |empirical − expected| in binomial standard errors.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCoverageSim {
    pub credible: SimulationReport,
    pub binned: SimulationReport,
    pub bins: Vec<CoverageBin>,
}

/// p-value bin edges for the binned conditional-coverage comparison.
pub const P_BIN_EDGES: [f64; 11] = [0.0, 0.001, 0.01, 0.03, 0.07, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0];

const MIN_BIN_COUNT: usize = 30;

/// Under β ~ N(0, se²): (a) coverage of the credible interval
/// B/2 ± z·se/√2 should be 0.95; (b) within p-value bins, coverage of the
/// confidence interval B ± z·se should match the bin average of the
/// closed-form conditional coverage.
pub fn conditional_coverage_sim(se: f64, n: usize, seed: u64) -> ConditionalCoverageSim {
    let z = critical_value(0.95).expect("valid level");
    let mut rng = check_rng(seed, stream::CONDITIONAL);
    let nb = P_BIN_EDGES.len() - 1;
    let mut count = vec![0usize; nb];
    let mut hits = vec![0usize; nb];
    let mut expected = vec![0.0f64; nb];
    let mut credible_hits = 0usize;
    for _ in 0..n {
        let beta = se * rng.sample::<f64, _>(StandardNormal);
        let b = beta + se * rng.sample::<f64, _>(StandardNormal);
        if (beta - b / 2.0).abs() < z * se / std::f64::consts::SQRT_2 {
            credible_hits += 1;
        }
        let p = two_sided_p(b / se);
        let k = P_BIN_EDGES[1..].iter().position(|&hi| p <= hi).unwrap_or(nb - 1);
        count[k] += 1;
        if (beta - b).abs() < z * se {
            hits[k] += 1;
        }
        expected[k] += conditional_coverage(&Estimate::new(b, se).expect("finite draw"));
    }

    let cred = credible_hits as f64 / n as f64;
    let cred_se = (0.95 * 0.05 / n as f64).sqrt();
    let credible = report(
        "credible-interval-coverage",
        n,
        (cred - 0.95).abs() / cred_se,
        4.0,
        Direction::AtMost,
        seed,
        format!("empirical coverage of b/2 ± z·se/√2 is {cred:.6}"),
    );

    let bins: Vec<CoverageBin> = (0..nb)
        .filter(|&k| count[k] >= MIN_BIN_COUNT)
        .map(|k| {
            let c = count[k] as f64;
            let emp = hits[k] as f64 / c;
            let exp = expected[k] / c;
            let sd = (exp * (1.0 - exp) / c).sqrt().max(1e-12);
            CoverageBin {
                p_lo: P_BIN_EDGES[k],
                p_hi: P_BIN_EDGES[k + 1],
                count: count[k],
                empirical: emp,
                expected: exp,
                deviation: (emp - exp).abs() / sd,
            }
        })
        .collect();
    let worst = bins.iter().map(|b| b.deviation).fold(0.0, f64::max);
    let binned = report(
        "binned-conditional-coverage",
        n,
        worst,
        3.0,
        Direction::Below,
        seed,
        format!("max deviation over {} p-value bins, in binomial standard errors", bins.len()),
    );
    ConditionalCoverageSim { credible, binned, bins }
}

/// Empirical frequency of β > 0 within bins of the analytic sign
/// probability Φ(B/(√2 se)) against the bin's mean analytic value.
pub fn sign_calibration(se: f64, n: usize, seed: u64) -> SimulationReport {
    let mut rng = check_rng(seed, stream::SIGN_CALIBRATION);
    const BINS: usize = 10;
    let mut count = [0usize; BINS];
    let mut positive = [0usize; BINS];
    let mut prob = [0.0f64; BINS];
    for _ in 0..n {
        let beta = se * rng.sample::<f64, _>(StandardNormal);
        let b = beta + se * rng.sample::<f64, _>(StandardNormal);
        let p = std_normal_cdf(b / (std::f64::consts::SQRT_2 * se));
        let k = ((p * BINS as f64) as usize).min(BINS - 1);
        count[k] += 1;
        prob[k] += p;
        if beta > 0.0 {
            positive[k] += 1;
        }
    }
    let worst = (0..BINS)
        .filter(|&k| count[k] >= MIN_BIN_COUNT)
        .map(|k| {
            let c = count[k] as f64;
            let exp = prob[k] / c;
            let sd = (exp * (1.0 - exp) / c).sqrt().max(1e-12);
            (positive[k] as f64 / c - exp).abs() / sd
        })
        .fold(0.0, f64::max);
    report(
        "sign-probability-calibration",
        n,
        worst,
        4.0,
        Direction::Below,
        seed,
        "max deviation of empirical P(beta>0) from the analytic value over 10 bins, in binomial SEs".into(),
    )
}

/// Prior families and scales (in units of se) for the sign-agreement bound.
pub fn proposition_priors(se: f64) -> Vec<SymmetricPrior> {
    let mut priors = Vec::new();
    for s in [0.1, 0.5, 1.0, 2.0, 10.0] {
        priors.push(SymmetricPrior::Normal { scale: s * se });
        priors.push(SymmetricPrior::Laplace { scale: s * se });
    }
    for a in [0.5, 1.0, 5.0, 20.0] {
        priors.push(SymmetricPrior::Uniform { scale: a * se });
    }
    priors
}

pub const PROPOSITION_Z: [f64; 5] = [0.1, 0.5, 1.0, 1.96, 3.0];

/// Sign agreement under every unimodal symmetric prior in the sweep never
/// exceeds the flat-prior value Φ(|b|/se). The statistic is the largest
/// excess over that bound.
pub fn proposition_sweep(se: f64) -> Result<SimulationReport> {
    let priors = proposition_priors(se);
    let cases: Vec<(SymmetricPrior, f64)> = priors
        .iter()
        .flat_map(|p| PROPOSITION_Z.iter().map(move |&z| (*p, z)))
        .collect();
    let excesses = cases
        .par_iter()
        .map(|(prior, z)| {
            let est = Estimate::new(z * se, se)?;
            Ok(sign_agreement_under_prior(prior, &est)? - std_normal_cdf(*z))
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = excesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(report(
        "sign-agreement-bound-sweep",
        cases.len(),
        worst,
        1e-8,
        Direction::AtMost,
        0,
        format!(
            "{} priors x {} b-values; largest P(sgn agree) - Phi(|b|/se)",
            priors.len(),
            PROPOSITION_Z.len()
        ),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRun {
    pub seed: u64,
    pub sqrt_phi: f64,
    pub sqrt_phi_se: Option<f64>,
    pub sqrt_phi_ci: (f64, f64),
    pub sigma: f64,
    pub converged: bool,
    pub within_3se: bool,
    pub ci_covers: bool,
}

/// Simulate and refit the mixed model `replications` times.
pub fn eb_recovery_runs(
    phi: f64,
    sigma: f64,
    n_studies: usize,
    per_study: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<RecoveryRun>> {
    let mut rng = check_rng(seed, stream::EB_RECOVERY);
    let seeds: Vec<u64> = (0..replications).map(|_| rng.random()).collect();
    let target = phi.max(0.0).sqrt();
    seeds
        .par_iter()
        .map(|&s| {
            let ds = simulate_dataset(&SimulationSpec::new(phi, sigma, n_studies, per_study, s))?;
            let fit = fit_mixed(&ds, &FitConfig::default())?;
            let within = fit.sqrt_phi_z_distance(target).is_some_and(|d| d <= 3.0);
            Ok(RecoveryRun {
                seed: s,
                sqrt_phi: fit.sqrt_phi,
                sqrt_phi_se: fit.sqrt_phi_se,
                sqrt_phi_ci: fit.sqrt_phi_ci,
                sigma: fit.sigma,
                converged: fit.converged,
                within_3se: within,
                ci_covers: fit.sqrt_phi_ci.0 <= target && target <= fit.sqrt_phi_ci.1,
            })
        })
        .collect()
}

/// Recovery of √φ = 1.28 (φ = 1.6384, σ = 0.5, 50 studies × 12 records).
/// Passes when at least 90% of replications land within 3 estimated
/// standard errors.
pub fn eb_recovery(replications: usize, seed: u64) -> Result<SimulationReport> {
    if replications == 0 {
        return Ok(skipped("eb-recovery", seed, "no replications requested"));
    }
    let runs = eb_recovery_runs(1.6384, 0.5, 50, 12, replications, seed)?;
    let within = runs.iter().filter(|r| r.within_3se).count();
    let covered = runs.iter().filter(|r| r.ci_covers).count();
    Ok(report(
        "eb-recovery",
        replications,
        within as f64 / replications as f64,
        0.9,
        Direction::AtLeast,
        seed,
        format!("{within}/{replications} within 3 SE of sqrt(phi)=1.28; 95% CI covered {covered}/{replications}"),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Draws per Monte-Carlo check.
    pub n: usize,
    /// Empirical-Bayes recovery replications; 0 skips the check.
    pub eb_replications: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seed: 1, n: 100_000, eb_replications: 20 }
    }
}

pub const MIN_DRAWS: usize = 1000;
pub const MIN_DRAWS_CONDITIONAL: usize = 10_000;

/// Run every check. Pass thresholds scale with the number of draws, which
/// is raised to each check's minimum when smaller.
pub fn run_all(cfg: &VerifyConfig) -> Result<Vec<SimulationReport>> {
    let n = cfg.n.max(MIN_DRAWS);
    let seed = cfg.seed;
    let mut out = vec![
        theorem1_uniformity(1.0, n, seed),
        frequentist_coverage(0.0, 1.0, n, seed),
        frequentist_coverage(7.3, 0.2, n, seed),
    ];
    let cond = conditional_coverage_sim(1.0, n.max(MIN_DRAWS_CONDITIONAL), seed);
    out.push(cond.credible);
    out.push(cond.binned);
    out.push(sign_calibration(1.0, n, seed));
    out.push(proposition_sweep(1.0)?);
    out.push(eb_recovery(cfg.eb_replications, seed)?);
    Ok(out)
}

/// True unless some check failed. Skipped checks do not count against.
pub fn all_passed(reports: &[SimulationReport]) -> bool {
    reports.iter().all(|r| r.status != Status::Failed)
}
