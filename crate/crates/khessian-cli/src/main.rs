//! Command-line driver.
//!
//! Every subcommand writes a `manifest.json` into the output directory —
//! on success and on every failure path — recording the echoed config,
//! artifact list, outcome, and a machine-readable summary. Exit codes:
//!
//! * `0` — success
//! * `1` — configuration or input error (bad JSON, unknown keys, missing
//!   input files, invalid parameter ranges)
//! * `2` — an iterative solve stopped without meeting tolerance
//! * `3` — barrier constants infeasible or the two-sided enclosure
//!   certificate failed
//!
//! `selftest` instead exits with the number of failed suites (capped at
//! 125).

mod commands;
mod config;
mod manifest;
mod selftest;

use clap::{Parser, Subcommand};
use commands::{CommandOutput, Outcome};
use khessian::{Error, Result};
use manifest::RunManifest;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "khessian", version, about = "Hessian-equation solves, barrier certificates, and asymptotic diagnostics")]
struct Cli {
    /// JSON run configuration (required by every subcommand except selftest)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts and the run manifest
    #[arg(long, global = true, default_value = "khessian-out")]
    out: PathBuf,

    /// Worker threads (default: library/runtime choice)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for randomized test sampling (solves are deterministic
    /// regardless of the seed)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Record real wall-clock timings in reports (breaks byte-for-byte
    /// manifest reproducibility)
    #[arg(long, global = true)]
    emit_timings: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve one Dirichlet problem on a box or ellipsoid domain
    SolveDirichlet,
    /// Run the nested-domain sequence and extract the limiting field
    BuildEntire,
    /// Construct barrier profiles and certified constants
    Barriers,
    /// Fit the quadratic-remainder decay of a stored field
    FitAsymptotics,
    /// Measure rescaled Hessian deviation of a stored field
    CheckLiouville,
    /// Run the built-in verification battery
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SolveDirichlet => "solve-dirichlet",
            Command::BuildEntire => "build-entire",
            Command::Barriers => "barriers",
            Command::FitAsymptotics => "fit-asymptotics",
            Command::CheckLiouville => "check-liouville",
            Command::Selftest => "selftest",
        }
    }
}

/// Exit code and manifest outcome string for a hard library error.
fn classify(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Nonconvergence { .. } | Error::ConeViolation { .. } => (2, "nonconvergence"),
        Error::Constants(_) => (3, "certification-failure"),
        Error::Argument(_) => (1, "config-error"),
        Error::Numeric(_) | Error::State(_) | Error::Io(_) => (1, "error"),
    }
}

fn read_config(cli: &Cli) -> Result<(String, serde_json::Value)> {
    let path = cli.config.as_ref().ok_or_else(|| {
        Error::Argument(format!("{}: --config <FILE> is required", cli.command.name()))
    })?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Argument(format!("config {}: {e}", path.display())))?;
    let echo: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Argument(format!("config {}: {e}", path.display())))?;
    Ok((text, echo))
}

fn parse_and_run<T, F>(cli: &Cli, manifest: &mut RunManifest, run: F) -> Result<CommandOutput>
where
    T: for<'de> serde::Deserialize<'de>,
    F: FnOnce(&T, &Path) -> Result<CommandOutput>,
{
    let (text, echo) = read_config(cli)?;
    manifest.config = echo;
    let cfg: T = config::parse(&text, cli.config.as_ref().expect("checked by read_config"))?;
    run(&cfg, &cli.out)
}

fn run_selftest(cli: &Cli, manifest: &mut RunManifest) -> u8 {
    std::fs::create_dir_all(&cli.out).ok();
    let results = selftest::run_all(cli.seed, &cli.out);
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} suites passed", results.len() - failed, results.len());
    manifest.summary = serde_json::to_value(&results).unwrap_or(serde_json::Value::Null);
    if failed == 0 {
        manifest.outcome = "ok".to_string();
    } else {
        manifest.outcome = "selftest-failures".to_string();
        manifest.error = Some(format!("{failed} suite(s) failed"));
    }
    failed.min(125) as u8
}

fn dispatch(cli: &Cli, manifest: &mut RunManifest) -> u8 {
    if let Command::Selftest = cli.command {
        return run_selftest(cli, manifest);
    }
    let result = match cli.command {
        Command::SolveDirichlet => parse_and_run(cli, manifest, |cfg, out| {
            commands::solve_dirichlet(cfg, out, cli.emit_timings)
        }),
        Command::BuildEntire => parse_and_run(cli, manifest, |cfg, out| {
            commands::build_entire(cfg, out, cli.emit_timings)
        }),
        Command::Barriers => parse_and_run(cli, manifest, commands::barriers),
        Command::FitAsymptotics => parse_and_run(cli, manifest, commands::fit_asymptotics),
        Command::CheckLiouville => parse_and_run(cli, manifest, commands::check_liouville),
        Command::Selftest => unreachable!("handled above"),
    };
    match result {
        Ok(output) => {
            manifest.artifacts = output.artifacts;
            manifest.summary = output.summary;
            match output.outcome {
                Outcome::Ok => {
                    manifest.outcome = "ok".to_string();
                    0
                }
                Outcome::Nonconvergence(msg) => {
                    eprintln!("{}: {msg}", cli.command.name());
                    manifest.outcome = "nonconvergence".to_string();
                    manifest.error = Some(msg);
                    2
                }
                Outcome::Certification(msg) => {
                    eprintln!("{}: {msg}", cli.command.name());
                    manifest.outcome = "certification-failure".to_string();
                    manifest.error = Some(msg);
                    3
                }
            }
        }
        Err(e) => {
            let (code, outcome) = classify(&e);
            eprintln!("{}: {e}", cli.command.name());
            manifest.outcome = outcome.to_string();
            manifest.error = Some(e.to_string());
            code
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let start = std::time::Instant::now();
    let mut manifest = RunManifest::new(cli.command.name(), cli.seed, cli.threads);
    let code = dispatch(&cli, &mut manifest);
    if cli.emit_timings {
        manifest.wall_time_secs = start.elapsed().as_secs_f64();
    }
    if let Err(e) = manifest.write(&cli.out) {
        eprintln!("manifest: {e}");
        return ExitCode::from(if code == 0 { 1 } else { code });
    }
    ExitCode::from(code)
}
