//! Scenario runner behind the `hcma` binary.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 validation failure, 3 configuration error.

pub mod config;
pub mod output;
pub mod run;
pub mod validate;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Problem, ScenarioConfig};
pub use output::{report, Outputs, Summary};
pub use run::{run, RunError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hcma", version, about = "Power-series geodesics in the space of Kähler potentials")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// JSON scenario file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the `output` key.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Multiplies every absolute tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Cauchy problem from an initial velocity.
    Ivp,
    /// Bidegree expansion near a divisor and its ray.
    Divisor,
    /// Rotation ray diagnostics on CP¹.
    Ray,
    /// Run every invariant suite.
    Validate,
}

impl Command {
    fn problem(self) -> Problem {
        match self {
            Command::Ivp => Problem::Ivp,
            Command::Divisor => Problem::Divisor,
            Command::Ray => Problem::Ray,
            Command::Validate => Problem::Validate,
        }
    }
}

/// Parses arguments, runs the scenario, writes outputs and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if !(args.tolerance_scale.is_finite() && args.tolerance_scale > 0.0) {
        eprintln!("error: --tolerance-scale must be a positive number");
        return EXIT_CONFIG;
    }
    let config = match &args.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(text) => match ScenarioConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return EXIT_CONFIG;
                }
            },
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        },
        None => ScenarioConfig::default(),
    };
    let problem = args.command.problem();
    let tol = config.tolerances.scaled(args.tolerance_scale);
    let outputs = match run(problem, &config, &tol, args.seed) {
        Ok(o) => o,
        Err(RunError::Config(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
        Err(RunError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_RUNTIME;
        }
    };
    let dir = args
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("hcma-out"));
    if let Err(e) = outputs.write(&dir) {
        eprintln!("error: cannot write outputs to {}: {e}", dir.display());
        return EXIT_RUNTIME;
    }
    print!("{}", report(&outputs.summary));
    if outputs.summary.passed {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}
