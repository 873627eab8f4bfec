use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use default_prior::analysis::{analyze as analyze_estimate, AnalysisInput, AnalysisReport};
use default_prior::eb::{
    fit_marginal, fit_mixed, ingest, parse_csv, simulate_records, write_csv, DropReason, DroppedRecord, EBFit,
    FitConfig, SimulationSpec,
};
use default_prior::jeffreys::jeffreys_curve as compute_jeffreys;
use default_prior::posterior::coverage_curve as compute_coverage;
use default_prior::verify::{all_passed, run_all, SimulationReport, Status, VerifyConfig};
use default_prior::Error;

pub enum Outcome {
    Success,
    ChecksFailed,
    NotConverged,
}

#[derive(Debug)]
pub enum CommandError {
    Library(Error),
    Io(String, io::Error),
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Library(e) => write!(f, "{e}"),
            CommandError::Io(what, e) => write!(f, "{what}: {e}"),
        }
    }
}

impl CommandError {
    pub fn is_broken_pipe(&self) -> bool {
        matches!(self, CommandError::Io(_, e) if e.kind() == io::ErrorKind::BrokenPipe)
    }

    pub fn exit_code(&self) -> u8 {
        1
    }

    /// One line per offending input line for parse failures.
    pub fn details(&self) -> Vec<String> {
        match self {
            CommandError::Library(Error::Parse(p)) => {
                p.issues.iter().map(|i| format!("line {}: {}", i.line, i.message)).collect()
            }
            _ => Vec::new(),
        }
    }
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        CommandError::Library(e)
    }
}

fn io_err(what: impl Into<String>) -> impl FnOnce(io::Error) -> CommandError {
    let what = what.into();
    move |e| CommandError::Io(what, e)
}

/// Print a report to standard output, as JSON or in its human form.
fn emit<T: Serialize>(report: &T, json: bool, human: impl FnOnce(&T) -> String) -> Result<(), CommandError> {
    let text = if json {
        serde_json::to_string_pretty(report).expect("reports serialize")
    } else {
        human(report)
    };
    let mut out = io::stdout().lock();
    writeln!(out, "{}", text.trim_end()).map_err(io_err("writing to standard output"))
}

/// Writes data to `path`, or to standard output when `path` is `None`.
fn with_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CommandError> {
    match path {
        Some(p) => {
            let what = format!("writing {}", p.display());
            let file = File::create(p).map_err(io_err(what.clone()))?;
            let mut w = BufWriter::new(file);
            body(&mut w).and_then(|_| w.flush()).map_err(io_err(what))
        }
        None => {
            let mut out = io::stdout().lock();
            body(&mut out).map_err(io_err("writing to standard output"))
        }
    }
}

/// Summary of a data-writing command. Goes to standard output when the
/// data went to a file, and to standard error otherwise.
fn emit_summary<T: Serialize>(
    summary: &T,
    data_on_stdout: bool,
    json: bool,
    human: impl FnOnce(&T) -> String,
) -> Result<(), CommandError> {
    if data_on_stdout {
        let text = if json { serde_json::to_string(summary).expect("reports serialize") } else { human(summary) };
        eprintln!("{}", text.trim_end());
        Ok(())
    } else {
        emit(summary, json, human)
    }
}

fn fmt_interval((lo, hi): (f64, f64)) -> String {
    format!("[{lo:.4}, {hi:.4}]")
}

pub fn analyze(
    b: f64,
    se: Option<f64>,
    p: Option<f64>,
    tau: f64,
    level: f64,
    json: bool,
) -> Result<Outcome, CommandError> {
    let input = match (se, p) {
        (Some(se), None) => AnalysisInput::StandardError { b, se },
        (None, Some(p)) => AnalysisInput::from_p(b, p)?,
        _ => unreachable!("clap enforces exactly one of --se and --p"),
    };
    let report = analyze_estimate(input, tau, level)?;
    emit(&report, json, human_analysis)?;
    Ok(Outcome::Success)
}

fn human_analysis(r: &AnalysisReport) -> String {
    let mut s = String::new();
    match r.input {
        AnalysisInput::StandardError { b, se } => writeln!(s, "estimate b = {b}, se = {se}").unwrap(),
        AnalysisInput::PValue { b, p, implied_se } => {
            writeln!(s, "estimate b = {b}, two-sided p = {p}, implied se = {implied_se:.6}").unwrap()
        }
    }
    writeln!(s, "two-sided p-value          {:.4e}", r.flat.two_sided_p).unwrap();
    writeln!(s).unwrap();
    let pct = format!("{:.0}% interval", 100.0 * r.default.level);
    writeln!(s, "{:<26} {:>12} {:>12}", "", "flat prior", "default").unwrap();
    writeln!(s, "{:<26} {:>12.4} {:>12.4}", "posterior mean", r.flat.post_mean, r.default.post_mean).unwrap();
    writeln!(s, "{:<26} {:>12.4} {:>12.4}", "posterior sd", r.flat.post_sd, r.default.post_sd).unwrap();
    writeln!(s, "{:<26} {:>12.4} {:>12.4}", "P(beta > 0 | b)", r.flat.sign_prob_positive, r.default.sign_prob_positive)
        .unwrap();
    writeln!(
        s,
        "{:<26} {:>12} {:>12}",
        pct,
        fmt_interval(r.flat.credible_interval),
        fmt_interval(r.default.credible_interval)
    )
    .unwrap();
    writeln!(
        s,
        "{:<26} {:>12.4} {:>12.4}",
        "coverage of b +/- 1.96se", r.flat.conditional_coverage_95, r.default.conditional_coverage_95
    )
    .unwrap();
    writeln!(s).unwrap();
    writeln!(s, "flat-prior E|beta| given b  {:.4}", r.flat_abs_posterior_mean).unwrap();
    writeln!(s, "{}", r.conflict.message).unwrap();
    for w in &r.warnings {
        writeln!(s, "WARNING: {w}").unwrap();
    }
    s
}

#[derive(Serialize)]
struct CurveSummary {
    curve: &'static str,
    rows: usize,
    out: Option<String>,
}

fn human_curve(c: &CurveSummary) -> String {
    match &c.out {
        Some(path) => format!("wrote {} rows of the {} curve to {path}", c.rows, c.curve),
        None => format!("wrote {} rows of the {} curve", c.rows, c.curve),
    }
}

pub fn coverage_curve(points: usize, out: Option<&Path>, json: bool) -> Result<Outcome, CommandError> {
    if points < 2 {
        return Err(Error::Domain(format!("a curve needs at least 2 points, got {points}")).into());
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| if i + 1 == points { 1.0 } else { 10f64.powf(-3.0 + 3.0 * i as f64 / (points - 1) as f64) })
        .collect();
    let curve = compute_coverage(&grid)?;
    if !curve.is_monotone_increasing() {
        return Err(Error::Numerical("coverage curve is not monotone in p".into()).into());
    }
    with_output(out, |w| {
        writeln!(w, "p_value,coverage")?;
        for pt in &curve.points {
            writeln!(w, "{:?},{:?}", pt.p_value, pt.coverage)?;
        }
        Ok(())
    })?;
    let summary = CurveSummary { curve: "coverage", rows: curve.points.len(), out: out.map(|p| p.display().to_string()) };
    emit_summary(&summary, out.is_none(), json, human_curve)?;
    Ok(Outcome::Success)
}

pub fn jeffreys_curve(
    se: &[f64],
    theta_max: Option<f64>,
    points: usize,
    out: Option<&Path>,
    json: bool,
) -> Result<Outcome, CommandError> {
    if se.is_empty() {
        return Err(Error::Domain("at least one --se is required".into()).into());
    }
    if let Some(bad) = se.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::Domain(format!("se must be positive, got {bad}")).into());
    }
    let theta_max = theta_max.unwrap_or_else(|| 6.0 * se.iter().copied().fold(0.0, f64::max));
    let curves = se
        .iter()
        .map(|&s| compute_jeffreys(s, theta_max, points))
        .collect::<Result<Vec<_>, _>>()?;
    with_output(out, |w| {
        writeln!(w, "se,theta,density")?;
        for c in &curves {
            for (t, d) in c.theta_grid.iter().zip(&c.density_values) {
                writeln!(w, "{:?},{:?},{:?}", c.se, t, d)?;
            }
        }
        Ok(())
    })?;
    let summary = CurveSummary {
        curve: "jeffreys",
        rows: curves.iter().map(|c| c.theta_grid.len()).sum(),
        out: out.map(|p| p.display().to_string()),
    };
    emit_summary(&summary, out.is_none(), json, human_curve)?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct DroppedCounts {
    censored_by_protocol: usize,
    invalid: usize,
}

#[derive(Serialize)]
struct FitReport {
    input: String,
    seedless: bool,
    fit: EBFit,
    dropped_counts: DroppedCounts,
    dropped: Vec<DroppedRecord>,
    warnings: Vec<String>,
}

fn human_fit(r: &FitReport) -> String {
    let f = &r.fit;
    let mut s = String::new();
    writeln!(s, "input {}: {} records in {} studies used", r.input, f.n_records, f.n_studies).unwrap();
    writeln!(
        s,
        "dropped {} record(s) with p <= 0.001 (censored by protocol) and {} invalid",
        r.dropped_counts.censored_by_protocol, r.dropped_counts.invalid
    )
    .unwrap();
    let model = match f.model_kind {
        default_prior::eb::ModelKind::Mixed => "mixed (Gauss-Hermite)",
        default_prior::eb::ModelKind::Marginal => "marginal (cluster sandwich)",
    };
    writeln!(s, "model {model}").unwrap();
    writeln!(s, "sqrt(phi) = {:.4}  95% CI {}", f.sqrt_phi, fmt_interval(f.sqrt_phi_ci)).unwrap();
    writeln!(s, "phi       = {:.4}  (se {:.4})", f.phi, f.phi_se).unwrap();
    if f.sigma_fixed.is_none() {
        writeln!(s, "sigma     = {:.4}", f.sigma).unwrap();
    }
    writeln!(s, "log-likelihood {:.6}", f.log_likelihood).unwrap();
    if f.phi_nonpositive {
        writeln!(s, "phi <= 0: the z-values are no more spread out than under beta = 0").unwrap();
    }
    if !f.converged {
        writeln!(s, "WARNING: optimizer did not converge; estimates are partial").unwrap();
    }
    for d in &f.diagnostics {
        writeln!(s, "note: {d}").unwrap();
    }
    for w in &r.warnings {
        writeln!(s, "warning: {w}").unwrap();
    }
    s
}

pub fn fit(input: &Path, mixed: bool, gh_nodes: usize, seedless: bool, json: bool) -> Result<Outcome, CommandError> {
    let file = File::open(input).map_err(io_err(format!("reading {}", input.display())))?;
    let raw = parse_csv(io::BufReader::new(file)).map_err(Error::from)?;
    let outcome = ingest(&raw);
    let fit = if mixed {
        let cfg = FitConfig { gh_nodes, ..FitConfig::default() };
        cfg.validate()?;
        fit_mixed(&outcome.dataset, &cfg)?
    } else {
        fit_marginal(&outcome.dataset)?
    };
    let converged = fit.converged;
    let report = FitReport {
        input: input.display().to_string(),
        seedless,
        dropped_counts: DroppedCounts {
            censored_by_protocol: outcome.count_dropped(DropReason::CensoredByProtocol),
            invalid: outcome.count_dropped(DropReason::Invalid),
        },
        dropped: outcome.dropped,
        warnings: outcome.warnings,
        fit,
    };
    emit(&report, json, human_fit)?;
    Ok(if converged { Outcome::Success } else { Outcome::NotConverged })
}

#[derive(Serialize)]
struct SimulateSummary {
    phi: f64,
    sigma: f64,
    studies: usize,
    per_study: usize,
    seed: u64,
    records: usize,
    at_or_below_0_001: usize,
    out: Option<String>,
}

fn human_simulate(s: &SimulateSummary) -> String {
    let dest = s.out.as_deref().map(|p| format!(" to {p}")).unwrap_or_default();
    format!(
        "wrote {} records ({} studies x {}){dest}; {} have p <= 0.001 and will be dropped on fitting",
        s.records, s.studies, s.per_study, s.at_or_below_0_001
    )
}

pub fn simulate(
    phi: f64,
    sigma: f64,
    studies: usize,
    per_study: usize,
    seed: u64,
    out: Option<&Path>,
    json: bool,
) -> Result<Outcome, CommandError> {
    let records = simulate_records(&SimulationSpec::new(phi, sigma, studies, per_study, seed))?;
    with_output(out, |w| write_csv(w, records.iter().map(|r| (r.study_id.clone(), r.p_value))))?;
    let summary = SimulateSummary {
        phi,
        sigma,
        studies,
        per_study,
        seed,
        records: records.len(),
        at_or_below_0_001: records.iter().filter(|r| r.p_value <= 0.001).count(),
        out: out.map(|p| p.display().to_string()),
    };
    emit_summary(&summary, out.is_none(), json, human_simulate)?;
    Ok(Outcome::Success)
}

fn human_check(r: &SimulationReport) -> String {
    let verdict = match r.status {
        Status::Passed => "PASS",
        Status::Failed => "FAIL",
        Status::Skipped => "SKIP",
    };
    if r.status == Status::Skipped {
        return format!("{verdict} {:<38} {}", r.name, r.detail);
    }
    format!(
        "{verdict} {:<38} stat {:>10.4e} {} {:<10.4e} n={} seed={}  {}",
        r.name, r.statistic, r.direction, r.threshold, r.n_draws, r.seed, r.detail
    )
}

pub fn verify(seed: u64, n: usize, eb_replications: usize, json: bool) -> Result<Outcome, CommandError> {
    let reports = run_all(&VerifyConfig { seed, n, eb_replications })?;
    let mut out = io::stdout().lock();
    for r in &reports {
        let line = if json { serde_json::to_string(r).expect("reports serialize") } else { human_check(r) };
        writeln!(out, "{line}").map_err(io_err("writing to standard output"))?;
    }
    Ok(if all_passed(&reports) { Outcome::Success } else { Outcome::ChecksFailed })
}
