//! Batch frontend: one subcommand per task, one config file per run.
//!
//! Exit status: 0 on success, 1 on a numerical failure or a violated
//! invariant (with `error.json` in the output directory), 2 on a usage or
//! config error, 3 on an I/O error.

pub mod config;
pub mod plot;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{ConfigFile, ExperimentConfig, SpaceSpec, Task, Tolerances, DEFAULT_SEED};
pub use run::{run_config, RunSummary};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "logdirichlet", version, about = "Logarithmic Dirichlet Laplacian experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Galerkin spectrum and its closed-form oracle.
    Spectrum(Flags),
    /// Heat-trace partial sums and convergence verdicts.
    HeatTrace(Flags),
    /// Trace-class threshold from logarithmic eigenvalue growth.
    Threshold(Flags),
    /// Modulus of continuity and Dini norms.
    Dini(Flags),
    /// Commutators with multiplication operators.
    Commutator(Flags),
    /// Disk automorphisms acting on the circle.
    Conformal(Flags),
    /// Ball-measure regularity and annulus estimates.
    VerifyAhlfors(Flags),
}

#[derive(Args, Debug)]
struct Flags {
    /// Sectioned config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides [run] seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
}

impl Command {
    fn split(self) -> (Task, Flags) {
        match self {
            Command::Spectrum(f) => (Task::Spectrum, f),
            Command::HeatTrace(f) => (Task::HeatTrace, f),
            Command::Threshold(f) => (Task::Threshold, f),
            Command::Dini(f) => (Task::Dini, f),
            Command::Commutator(f) => (Task::Commutator, f),
            Command::Conformal(f) => (Task::Conformal, f),
            Command::VerifyAhlfors(f) => (Task::VerifyAhlfors, f),
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    task: &'a str,
    kind: &'a str,
    message: String,
    failures: &'a [String],
}

fn exit_for(error: &Error) -> i32 {
    match error {
        Error::Config { .. } => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

fn write_error(cfg: &ExperimentConfig, kind: &str, message: String, failures: &[String]) {
    let report = ErrorReport { task: cfg.task.name(), kind, message, failures };
    let path = cfg.out_dir.join("error.json");
    let written = std::fs::create_dir_all(&cfg.out_dir)
        .map_err(Error::from)
        .and_then(|_| Ok(serde_json::to_string_pretty(&report)? + "\n"))
        .and_then(|s| Ok(std::fs::write(&path, s)?));
    if let Err(e) = written {
        eprintln!("error: could not write {}: {e}", path.display());
    }
}

/// Loads the config named by the flags; a missing `--config` means defaults.
fn load(task: Task, flags: Flags) -> Result<ExperimentConfig, Error> {
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
            ConfigFile::parse(&text)?
        }
        None => ConfigFile::default(),
    };
    ExperimentConfig::from_file(&file, task, flags.out, flags.seed, flags.plot)
}

/// Runs one validated experiment and maps the outcome to an exit status.
pub fn execute(cfg: &ExperimentConfig) -> i32 {
    match run_config(cfg) {
        Ok(summary) if summary.failures.is_empty() => {
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            EXIT_OK
        }
        Ok(summary) => {
            for f in &summary.failures {
                eprintln!("hard failure: {f}");
            }
            write_error(cfg, "invariant", format!("{} hard failure(s)", summary.failures.len()), &summary.failures);
            EXIT_FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_for(&e);
            if code == EXIT_FAILURE {
                write_error(cfg, "numerical", e.to_string(), &[]);
            } else if code == EXIT_USAGE {
                eprintln!("usage: logdirichlet {} --config PATH [--out DIR] [--seed INT] [--plot]", cfg.task.name());
            }
            code
        }
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (task, flags) = cli.command.split();
    match load(task, flags) {
        Ok(cfg) => execute(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("usage: logdirichlet {} --config PATH [--out DIR] [--seed INT] [--plot]", task.name());
            exit_for(&e).max(EXIT_USAGE)
        }
    }
}
