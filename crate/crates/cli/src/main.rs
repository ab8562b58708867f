//! `coalesce-flow`: simulate skeletons, extend and repair them, verify the
//! flow properties and run the Monte Carlo estimators.
//!
//! Exit codes: 0 all checks pass, 1 a property check failed, 2 usage or
//! configuration error, 3 statistics inconclusive.

// `!(x > 0.0)` is how parameter checks reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod cmd;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::cmd::{estimate, export, extend, simulate, verify};

#[derive(Parser, Debug)]
#[command(name = "coalesce-flow", version, about = "Coalescing stochastic flows on metric graphs")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "COALESCE_FLOW_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a skeleton and write it to a directory.
    Simulate(simulate::Args),
    /// Evaluate the extended (optionally repaired) flow on a query grid.
    Extend(extend::Args),
    /// Check skeleton axioms and flow properties.
    Verify(verify::Args),
    /// Run a Monte Carlo estimator.
    Estimate(estimate::Args),
    /// Flatten skeletons or reports into plotting CSV.
    ExportPlotdata(export::Args),
}

/// Outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Inconclusive => 3,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Extend(a) => extend::run(a),
        Command::Verify(a) => verify::run(a),
        Command::Estimate(a) => estimate::run(a),
        Command::ExportPlotdata(a) => export::run(a),
    };
    match res {
        Ok(o) => ExitCode::from(o.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
