use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use lewis_riesenfeld::app::{self, Sink};
use lewis_riesenfeld::report::{Relation, Report};
use lewis_riesenfeld::scenario::Scenario;
use lewis_riesenfeld::Error;

#[derive(Parser)]
#[command(
    name = "lrinv",
    version,
    about = "Invariant-based solutions for a driven 1D particle, checked against a split-step oracle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file or bundled name (constant_force, free_particle, sinusoidal_drive). Repeatable.
    #[arg(long = "scenario", required = true)]
    scenarios: Vec<String>,
    /// Output directory; each scenario writes into its own subdirectory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiplies every tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical relation, Jacobi identity and closure of the generator sets.
    CheckAlgebra {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        triples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadratic-invariant solutions checked against the oracle.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Basis size for the general-solution expansion.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Volkov states of the linear invariant.
    Volkov {
        #[command(flatten)]
        common: Common,
        /// Momentum labels; defaults to the scenario's list. Repeatable.
        #[arg(long = "k", allow_negative_numbers = true)]
        ks: Vec<f64>,
    },
    /// Self-checks of the split-step propagator alone.
    OracleOnly {
        #[command(flatten)]
        common: Common,
    },
    /// Combines report.json files into one.
    ReportMerge {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors that come from bad input rather than from a failed computation.
fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::HarmonicTermPresent | Error::InvalidGrid(_) | Error::NonElliptic(_)
    )
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn run_scenarios<F>(common: &Common, command: &str, run: F) -> Result<Report, Failure>
where
    F: Fn(&Scenario, &Sink) -> lewis_riesenfeld::Result<Report> + Sync,
{
    if !(common.tol_scale > 0.0 && common.tol_scale.is_finite()) {
        return Err(usage("--tol-scale must be positive"));
    }
    if let Some(j) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(usage)?;
    }
    let scenarios = common
        .scenarios
        .iter()
        .map(|s| Scenario::load(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let mut names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(usage("scenario names must be distinct"));
    }
    let results: Vec<lewis_riesenfeld::Result<Report>> = scenarios
        .par_iter()
        .map(|s| {
            let dir = common.out.as_ref().map(|d| d.join(&s.name));
            let sink = Sink::new(dir.as_deref())?;
            let r = run(s, &sink)?;
            if let Some(d) = sink.dir() {
                r.write(d.join("report.json"))?;
            }
            Ok(r)
        })
        .collect();
    let mut report = Report::new(command);
    for (s, res) in scenarios.iter().zip(results) {
        match res {
            Ok(r) => report.absorb(r),
            Err(e) if is_usage_error(&e) => return Err(usage(format!("{}: {e}", s.name))),
            Err(e) => {
                log::error!("{}: {e}", s.name);
                report.failed(format!("{}/run", s.name), 0.0, Relation::Equal, &e);
            }
        }
    }
    Ok(report)
}

fn finish(report: &Report, out: Option<&Path>) -> Result<(), Failure> {
    for c in &report.checks {
        println!("{c}");
    }
    if let Some(d) = out {
        std::fs::create_dir_all(d).map_err(|e| Failure::Runtime(e.to_string()))?;
        report
            .write(d.join("report.json"))
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    println!(
        "{}",
        if report.passed {
            "all checks passed"
        } else {
            "some checks FAILED"
        }
    );
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let report = match cli.command {
        Command::CheckAlgebra { seed, triples, out } => {
            let r = app::check_algebra(seed, triples);
            finish(&r, out.as_deref())?;
            return Ok(r.passed);
        }
        Command::Solve { common, n_max } => {
            if n_max == Some(0) {
                return Err(usage("--n-max must be at least 1"));
            }
            let r = run_scenarios(&common, "solve", |s, sink| {
                let mut s = s.clone();
                if let Some(n) = n_max {
                    s.n_max = n;
                    s.n_check = s.n_check.min(n);
                }
                app::solve(&s, &s.tolerances.scaled(common.tol_scale), sink)
            })?;
            (r, common.out)
        }
        Command::Volkov { common, ks } => {
            let r = run_scenarios(&common, "volkov", |s, sink| {
                let ks = if ks.is_empty() { s.volkov_k.clone() } else { ks.clone() };
                app::volkov(s, &ks, &s.tolerances.scaled(common.tol_scale), sink)
            })?;
            (r, common.out)
        }
        Command::OracleOnly { common } => {
            let r = run_scenarios(&common, "oracle-only", |s, sink| {
                app::oracle_only(s, &s.tolerances.scaled(common.tol_scale), sink)
            })?;
            (r, common.out)
        }
        Command::ReportMerge { inputs, out } => {
            let reports = inputs
                .iter()
                .map(Report::read)
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage)?;
            let merged = Report::merge(&reports).map_err(usage)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            merged.write(&out).map_err(|e| Failure::Runtime(e.to_string()))?;
            for c in &merged.checks {
                println!("{c}");
            }
            return Ok(merged.passed);
        }
    };
    let (report, out) = report;
    finish(&report, out.as_deref())?;
    Ok(report.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
