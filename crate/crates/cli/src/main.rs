//! `mallows` — reproducible experiment runner for the permutation
//! simulation library.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 assertion or
//! oracle failure during a run, 1 I/O failure.

use clap::{Parser, Subcommand};
use mallows_cli::config::{ExperimentKind, ParamArgs};
use mallows_cli::experiments;
use mallows_core::Error;

#[derive(Parser)]
#[command(
    name = "mallows",
    version,
    about = "Simulation experiments for Mallows permutations, their evolving \
             process, and its global/local limits"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw static permutations; report TV against the exact law (n ≤ 9)
    /// or dump element trajectories with --trajectory-elements
    Sample(ParamArgs),
    /// Per-replica sup deviation of trajectories from the limit curves
    GlobalVerify(ParamArgs),
    /// Simulate the doubly infinite permutation on a window and verify
    /// every jump is a transposition
    LocalVerify(ParamArgs),
    /// Couple the finite system to the limiting window by thinning and
    /// record agreement
    Coupling(ParamArgs),
    /// Fast deterministic correctness checks against exact values
    OracleSuite(ParamArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    let (kind, args) = match &cli.cmd {
        Cmd::Sample(a) => (ExperimentKind::Sample, a),
        Cmd::GlobalVerify(a) => (ExperimentKind::GlobalVerify, a),
        Cmd::LocalVerify(a) => (ExperimentKind::LocalVerify, a),
        Cmd::Coupling(a) => (ExperimentKind::Coupling, a),
        Cmd::OracleSuite(a) => (ExperimentKind::OracleSuite, a),
    };
    let cfg = match args.resolve(kind) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("configuration error: {msg}");
            return 2;
        }
    };

    let started = std::time::Instant::now();
    let outcome: Result<(Result<(), String>, f64), Error> = match kind {
        ExperimentKind::Sample if !cfg.trajectory_elements.is_empty() => {
            experiments::run_trajectories(&cfg).map(|r| (r.emit(), 0.0))
        }
        ExperimentKind::Sample => experiments::run_sample(&cfg).map(|r| (r.emit(), 0.0)),
        ExperimentKind::GlobalVerify => {
            experiments::run_global_verify(&cfg).map(|r| (r.emit(), 0.0))
        }
        ExperimentKind::LocalVerify => {
            experiments::run_local_verify(&cfg).map(|r| (r.emit(), 0.0))
        }
        ExperimentKind::Coupling => experiments::run_coupling(&cfg).map(|r| (r.emit(), 0.0)),
        ExperimentKind::OracleSuite => experiments::run_oracle_suite(&cfg)
            .map(|r| (r.emit(), *r.summary.get("failures").unwrap_or(&0.0))),
    };
    // Telemetry stays on stderr so report files are bit-reproducible.
    eprintln!(
        "{}: {:.2}s",
        cfg.experiment.as_str(),
        started.elapsed().as_secs_f64()
    );

    match outcome {
        Ok((Ok(()), failures)) if failures == 0.0 => 0,
        Ok((Ok(()), failures)) => {
            eprintln!("oracle failure: {failures} check(s) out of bounds");
            3
        }
        Ok((Err(io), _)) => {
            eprintln!("output error: {io}");
            1
        }
        Err(e) => {
            let code = match &e {
                Error::InvalidParameter(_) => 2,
                _ => 3,
            };
            eprintln!("run failed: {e}");
            code
        }
    }
}
