//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::process::ExitCode;
use std::time::Instant;

use default_prior::eb::{
    fit_marginal, fit_mixed, ingest_pairs, simulate_dataset, DropReason, FitConfig, SimulationSpec,
};
use default_prior::flat::abs_estimator_bias;
use default_prior::jeffreys::{curve_quadrature, fisher_information, jeffreys_curve, mixture_density, score_theta};
use default_prior::kernel::{std_normal_cdf, two_sided_p, SQRT_2_OVER_PI};
use default_prior::posterior::{coverage_curve, posterior, prior_data_conflict, Estimate, PriorSpec};
use default_prior::verify::{
    conditional_coverage_sim, eb_recovery_runs, proposition_priors, proposition_sweep, theorem1_uniformity,
    theorem1_uniformity_with_prior_sd, PROPOSITION_Z,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const SEED: u64 = 1;

struct Outcome {
    checks: Vec<(String, bool)>,
}

impl Outcome {
    fn new() -> Self {
        Self { checks: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn posterior_formulas() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let prior = PriorSpec::normal(1.0).unwrap();
    let mut worst_mean: f64 = 0.0;
    let mut worst_sd: f64 = 0.0;
    for _ in 0..10_000 {
        let b: f64 = rng.random_range(-50.0..50.0);
        let se: f64 = 10f64.powf(rng.random_range(-2.0..1.5));
        let s = posterior(&Estimate::new(b, se).unwrap(), &prior);
        worst_mean = worst_mean.max((s.post_mean - b / 2.0).abs());
        worst_sd = worst_sd.max((s.post_sd - se / SQRT_2).abs());
    }
    out.check(format!("max |mean - b/2| = {worst_mean:.2e} <= 1e-12"), worst_mean <= 1e-12);
    out.check(format!("max |sd - se/sqrt2| = {worst_sd:.2e} <= 1e-12"), worst_sd <= 1e-12);
    out
}

fn conditional_coverage() -> Outcome {
    let mut out = Outcome::new();
    // mpmath, 50 digits
    let oracle = [(1.0, 0.994_425_403_319_215_59), (0.05, 0.917_095_790_969_163_18), (0.001, 0.671_859_421_438_153_24)];
    let curve = coverage_curve(&oracle.map(|(p, _)| p)).unwrap();
    for ((p, want), point) in oracle.iter().zip(&curve.points) {
        let err = (point.coverage - want).abs();
        out.check(format!("coverage(p={p}) off by {err:.1e} <= 1e-9"), err <= 1e-9);
    }
    let grid: Vec<f64> = (0..200).map(|i| 10f64.powf(-3.0 + 3.0 * i as f64 / 199.0)).collect();
    out.check("curve monotone increasing in p", coverage_curve(&grid).unwrap().is_monotone_increasing());
    let sim = conditional_coverage_sim(1.0, 100_000, SEED);
    out.check(
        format!("binned MC coverage: max deviation {:.2} binomial SEs < 3", sim.binned.statistic),
        sim.binned.passed,
    );
    out
}

fn theorem1() -> Outcome {
    let mut out = Outcome::new();
    let good = theorem1_uniformity(1.0, 100_000, SEED);
    out.check(format!("KS {:.5} < {:.5} under N(0, se^2)", good.statistic, good.threshold), good.passed);
    let bad = theorem1_uniformity_with_prior_sd(1.0, 2.0, 100_000, SEED);
    out.check(format!("KS {:.5} rejects prior sd = 2se", bad.statistic), !bad.passed);
    out
}

fn flat_prior() -> Outcome {
    let mut out = Outcome::new();
    let mut worst: f64 = 0.0;
    for se in [0.01, 0.3, 1.0, 2.5, 40.0] {
        worst = worst.max((abs_estimator_bias(0.0, se).unwrap() - SQRT_2_OVER_PI * se).abs());
    }
    out.check(format!("bias at beta=0 off by {worst:.1e} <= 1e-12"), worst <= 1e-12);
    let priors = proposition_priors(1.0);
    let families = ["Normal", "Laplace", "Uniform"];
    let enough = families.iter().all(|f| priors.iter().filter(|p| format!("{p:?}").starts_with(f)).count() >= 4);
    out.check(format!("{} priors x {} b-values, >= 4 scales per family", priors.len(), PROPOSITION_Z.len()), enough);
    let sweep = proposition_sweep(1.0).unwrap();
    out.check(format!("sign-agreement bound holds, worst excess {:.1e}", sweep.statistic), sweep.passed);
    out
}

fn jeffreys() -> Outcome {
    let mut out = Outcome::new();
    let quad = curve_quadrature();
    out.check("I(0) == 0", fisher_information(0.0, 1.0, &quad).unwrap() == 0.0);
    let mut worst_limit: f64 = 0.0;
    for se in [0.5, 1.0, 2.0] {
        let v = se * se * fisher_information(20.0 * se, se, &quad).unwrap();
        worst_limit = worst_limit.max((v - 1.0).abs());
    }
    out.check(format!("se^2 I(20 se) within {worst_limit:.1e} of 1"), worst_limit <= 1e-4);

    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut worst_score: f64 = 0.0;
    for _ in 0..100 {
        let se: f64 = rng.random_range(0.2..3.0);
        let theta: f64 = rng.random_range(0.05..4.0) * se;
        let b: f64 = rng.random_range(-4.0..4.0) * se + theta * rng.random_range(-1.5..1.5);
        let h = 1e-5 * se;
        let lf = |t: f64| mixture_density(b, t, se).unwrap().ln();
        let fd = (lf(theta + h) - lf(theta - h)) / (2.0 * h);
        let an = score_theta(b, theta, se).unwrap();
        worst_score = worst_score.max((fd - an).abs() / an.abs().max(1.0));
    }
    out.check(format!("score vs finite differences: {worst_score:.1e} <= 1e-6"), worst_score <= 1e-6);

    let mut worst_scale: f64 = 0.0;
    for (theta, se) in [(0.3, 0.5), (1.0, 2.0), (2.5, 0.7), (4.0, 3.0), (0.05, 1.3)] {
        let lhs = fisher_information(theta, se, &quad).unwrap();
        let rhs = fisher_information(theta / se, 1.0, &quad).unwrap() / (se * se);
        worst_scale = worst_scale.max((lhs - rhs).abs() / rhs);
    }
    out.check(format!("I(theta; se) = I(theta/se; 1)/se^2 within {worst_scale:.1e}"), worst_scale <= 1e-8);

    // Each curve rises from 0 toward 1/se; the point where it reaches half
    // its limit moves right as se grows.
    let mut half_points = Vec::new();
    for se in [0.5, 1.0, 2.0] {
        let c = jeffreys_curve(se, 12.0, 241).unwrap();
        let half = c.theta_grid.iter().zip(&c.density_values).find(|(_, &d)| d >= 0.5 / se).map(|(t, _)| *t);
        half_points.push(half.unwrap_or(f64::INFINITY));
        out.check(format!("se={se}: curve nondecreasing"), c.is_nondecreasing(1e-10));
    }
    let ordered = half_points.windows(2).all(|w| w[0] < w[1]);
    out.check(format!("half-rise points {half_points:?} ordered by se"), ordered);
    out
}

fn conflict() -> Outcome {
    let mut out = Outcome::new();
    let tail = 2.0 * std_normal_cdf(-3.29 * FRAC_1_SQRT_2);
    out.check(format!("2 Phi(-3.29/sqrt2) = {tail:.5} in 0.0200 +/- 0.0005"), (tail - 0.02).abs() <= 5e-4);
    let (_, t) = prior_data_conflict(&Estimate::new(3.29, 1.0).unwrap());
    out.check("marginal tail probability agrees", (t - tail).abs() < 1e-15);
    out.check("|z| = 3.3 (p < 0.001) is flagged", prior_data_conflict(&Estimate::new(3.3, 1.0).unwrap()).0);
    out.check("|z| = 3.29 (p > 0.001) is not flagged", !prior_data_conflict(&Estimate::new(3.29, 1.0).unwrap()).0);
    out.check("|z| = 3.2 is not flagged", !prior_data_conflict(&Estimate::new(3.2, 1.0).unwrap()).0);
    out
}

fn empirical_bayes() -> Outcome {
    let mut out = Outcome::new();
    let runs = eb_recovery_runs(1.6384, 0.5, 50, 12, 20, SEED).unwrap();
    let within = runs.iter().filter(|r| r.within_3se).count();
    out.check(format!("sqrt(phi) recovered within 3 SE in {within}/20 runs (need 18)"), within >= 18);

    let ds = simulate_dataset(&SimulationSpec::new(1.6384, 0.5, 50, 12, SEED)).unwrap();
    let cfg = FitConfig { fixed_sigma: Some(0.0), ..FitConfig::default() };
    let mixed = fit_mixed(&ds, &cfg).unwrap();
    let marginal = fit_marginal(&ds).unwrap();
    let closed = ds.mean_z_sq() - 1.0;
    let diff = (mixed.phi - marginal.phi).abs().max((marginal.phi - closed).abs());
    out.check(format!("sigma=0 mixed fit vs mean(z^2)-1: {diff:.1e} <= 1e-6"), diff <= 1e-6);

    let null = simulate_dataset(&SimulationSpec::new(0.0, 0.0, 50, 12, SEED)).unwrap();
    let fit = fit_mixed(&null, &FitConfig::default()).unwrap();
    let consistent = fit.phi_nonpositive || fit.sqrt_phi_ci.0 == 0.0;
    out.check(
        format!("null data: sqrt(phi) = {:.3}, CI [{:.3}, {:.3}] reaches 0", fit.sqrt_phi, fit.sqrt_phi_ci.0, fit.sqrt_phi_ci.1),
        consistent,
    );
    out
}

fn ingestion() -> Outcome {
    let mut out = Outcome::new();
    let rows = [("A", 0.2), ("A", 0.001), ("A", 0.0004), ("B", 0.05), ("B", 0.0011), ("B", 1.0)];
    let ing = ingest_pairs(&rows);
    let censored = ing.count_dropped(DropReason::CensoredByProtocol);
    out.check(format!("{censored} rows with p <= 0.001 dropped as censored"), censored == 2);
    out.check("kept rows are the 4 with p > 0.001", ing.dataset.n_records() == 4);

    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let pairs: Vec<(String, f64)> =
        (0..5000).map(|i| (format!("S{}", i % 50), 10f64.powf(rng.random_range(-2.99..0.0)))).collect();
    let ing = ingest_pairs(&pairs);
    let ds = ing.dataset;
    let mut worst: f64 = 0.0;
    for r in ds.records() {
        worst = worst.max((two_sided_p(r.z_abs) - r.p_value).abs());
    }
    out.check(format!("p -> |z| -> p round trip: {worst:.1e} <= 1e-9"), worst <= 1e-9);
    out
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("posterior formulas", posterior_formulas),
        ("conditional coverage", conditional_coverage),
        ("sign-probability uniformity", theorem1),
        ("flat-prior diagnostics", flat_prior),
        ("Jeffreys curve", jeffreys),
        ("prior-data conflict", conflict),
        ("empirical-Bayes fidelity", empirical_bayes),
        ("ingestion protocol", ingestion),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let ok = outcome.passed();
        all &= ok;
        println!(
            "{} criterion {} ({name}) [{:.2}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
        for (what, passed) in &outcome.checks {
            println!("    {} {what}", if *passed { "ok  " } else { "FAIL" });
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
