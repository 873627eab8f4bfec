//! `default-prior` command-line tool.
//!
//! Exit codes: 0 success, 1 domain or data error, 2 usage error, 3 the fit
//! did not converge (the partial report is still printed).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use commands::{CommandError, Outcome};

#[derive(Debug, Parser)]
#[command(name = "default-prior", version, about = "Inference under the N(0, se^2) default prior")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Mixed,
    Marginal,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Flat-prior and default-prior posterior for one estimate.
    #[command(allow_negative_numbers = true, group(ArgGroup::new("scale").required(true).args(["se", "p"])))]
    Analyze {
        /// Point estimate.
        #[arg(long)]
        b: f64,
        /// Standard error of the estimate.
        #[arg(long)]
        se: Option<f64>,
        /// Two-sided p-value; the standard error is then |b| / |z|.
        #[arg(long)]
        p: Option<f64>,
        /// Prior sd as a multiple of se.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Credible-interval level.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },

    /// Conditional coverage of the 95% confidence interval against the
    /// two-sided p-value, on a log-spaced grid over [0.001, 1].
    CoverageCurve {
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Jeffreys prior for |β|, one curve per standard error.
    #[command(allow_negative_numbers = true)]
    JeffreysCurve {
        /// Standard error (repeatable).
        #[arg(long = "se", default_values_t = [0.5, 1.0, 2.0])]
        se: Vec<f64>,
        /// Largest θ; defaults to 6 times the largest se.
        #[arg(long)]
        theta_max: Option<f64>,
        #[arg(long, default_value_t = 121)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Estimate the prior scale from a `study_id,p_value` CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Model::Mixed)]
        model: Model,
        #[arg(long, default_value_t = 40)]
        gh_nodes: usize,
        /// The fit draws no random numbers; the flag is accepted and echoed.
        #[arg(long)]
        seedless: bool,
    },

    /// Simulate p-values from the hierarchical Gamma model.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[arg(long)]
        phi: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        studies: usize,
        #[arg(long)]
        per_study: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Run the Monte-Carlo and quadrature checks.
    Verify {
        #[arg(long, default_value_t = default_prior::verify::VerifyConfig::default().seed)]
        seed: u64,
        /// Draws per Monte-Carlo check.
        #[arg(long, default_value_t = default_prior::verify::VerifyConfig::default().n)]
        n: usize,
        /// Empirical-Bayes recovery replications; 0 skips the check.
        #[arg(long, default_value_t = default_prior::verify::VerifyConfig::default().eb_replications)]
        eb_replications: usize,
    },
}

fn run(cli: Cli) -> Result<Outcome, CommandError> {
    let json = cli.json;
    match cli.command {
        Command::Analyze { b, se, p, tau, level } => commands::analyze(b, se, p, tau, level, json),
        Command::CoverageCurve { points, out } => commands::coverage_curve(points, out.as_deref(), json),
        Command::JeffreysCurve { se, theta_max, points, out } => {
            commands::jeffreys_curve(&se, theta_max, points, out.as_deref(), json)
        }
        Command::Fit { input, model, gh_nodes, seedless } => {
            commands::fit(&input, model == Model::Mixed, gh_nodes, seedless, json)
        }
        Command::Simulate { phi, sigma, studies, per_study, seed, out } => {
            commands::simulate(phi, sigma, studies, per_study, seed, out.as_deref(), json)
        }
        Command::Verify { seed, n, eb_replications } => commands::verify(seed, n, eb_replications, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Ok(Outcome::NotConverged) => ExitCode::from(3),
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            for line in e.details() {
                eprintln!("  {line}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
