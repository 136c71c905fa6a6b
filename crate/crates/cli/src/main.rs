//! Command-line front end: runs verification suites and lists examples and checks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use crtractor::checks::{list_checks, run_suite, RunOptions, ToleranceKind};
use crtractor::examples::builtin_examples;

#[derive(Parser)]
#[command(
    name = "crtractor",
    version,
    about = "Numerical verification of pseudo-Hermitian, Fefferman and tractor identities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite of checks on one example geometry.
    Verify {
        #[arg(long)]
        example: String,
        /// `all`, a comma-separated list of check-id prefixes, or group names.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        points: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Replaces every check's tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in example geometries.
    ListExamples,
    /// List the registered checks with their default tolerances.
    ListChecks,
}

const USAGE_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExamples => {
            for ex in builtin_examples() {
                let ells: Vec<&str> = ex.ells.iter().map(|e| e.name).collect();
                println!("{:<24} m={} ℓ={{{}}}  {}", ex.name, ex.m(), ells.join(", "), ex.description);
            }
            ExitCode::SUCCESS
        }
        Command::ListChecks => {
            for (id, group, subject, tol) in list_checks() {
                let kind = match tol.kind {
                    ToleranceKind::Relative => "rel",
                    ToleranceKind::Absolute => "abs",
                };
                println!("{id:<40} {:<20} {kind} {:<6.0e} {subject}", group.name(), tol.value);
            }
            ExitCode::SUCCESS
        }
        Command::Verify { example, suite, points, seed, tol, format, out } => {
            if tol.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
                eprintln!("error: --tol must be a non-negative number");
                return ExitCode::from(USAGE_ERROR);
            }
            let opts = RunOptions { suite, seed, points: points as usize, tolerance: tol };
            let report = match run_suite(&example, &opts) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(USAGE_ERROR);
                }
            };
            if report.checks.is_empty() {
                eprintln!("error: suite `{}` selects no checks for `{example}`", opts.suite);
                return ExitCode::from(USAGE_ERROR);
            }
            let body = match format {
                Format::Json => report.to_json() + "\n",
                Format::Text => report.to_text(),
            };
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, body) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(USAGE_ERROR);
                    }
                }
                None => print!("{body}"),
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
