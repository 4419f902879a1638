//! `sqsdp`: solve, benchmark and probe nonlinear SDPs from the command line.
//!
//! Exit codes: 0 KKT tolerance reached, 1 usage or I/O error, 2 iteration
//! limit, 3 subproblem or numerical failure, 4 bench rate check failed.

mod args;
mod artifact;
mod bench;
mod probe;
mod solve;

use clap::{Parser, Subcommand};
use sqsdp::outer::SolveStatus;
use sqsdp::problems;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;
pub const EXIT_BENCH_RATE: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub stage: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(stage: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            stage,
            message: message.into(),
        }
    }
}

pub fn status_label(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::KktReached => "kkt_reached",
        SolveStatus::MaxIters => "max_iters",
        SolveStatus::SubproblemFailure => "subproblem_failure",
        SolveStatus::NumericalFailure => "numerical_failure",
    }
}

#[derive(Parser, Debug)]
#[command(name = "sqsdp", version, about = "Stabilized SQSDP solver for nonlinear semidefinite programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and write iterations.csv and report.json.
    Solve(solve::SolveArgs),
    /// Run many perturbed solves and tabulate observed convergence rates.
    Bench(bench::BenchArgs),
    /// Error-bound, spectrum and SOSC probes at the stored reference point.
    Probe(probe::ProbeArgs),
    /// List the built-in problems.
    List,
}

fn list() -> i32 {
    for spec in problems::registry() {
        let tags: Vec<&str> = spec.tags.iter().map(|t| t.as_str()).collect();
        println!(
            "{:<20} n={} m={} d={}  [{}]  {}",
            spec.id,
            spec.dims.n,
            spec.dims.m,
            spec.dims.d,
            tags.join(","),
            spec.description
        );
    }
    EXIT_OK
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Probe(a) => probe::run(a),
        Command::List => Ok(list()),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error ({}): {}", e.stage, e.message);
            e.code
        }
    };
    std::process::exit(code);
}
