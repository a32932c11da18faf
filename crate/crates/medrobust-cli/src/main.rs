//! Command line front end for multiply robust mediation analysis.
//!
//! Three subcommands: `analyze` estimates natural direct and indirect
//! effects from a CSV, `simulate` runs Monte Carlo study configs, and
//! `sensitivity` traces direct-effect curves over mediator-confounding
//! departures. Every command writes a canonical JSON report, a CSV
//! rendering, and a sibling manifest recording the resolved configuration;
//! reports are byte-identical across reruns with the same inputs and seed.

mod analyze;
mod common;
mod manifest;
mod sense;
mod simulate;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

const EXIT_CODES: &str = "\
Exit codes:
  0   success
  2   command line usage error
  3   invalid-input: data violates a structural requirement
  4   schema: unparseable CSV, spec, or config file
  5   no-convergence: a working-model fit did not converge
  6   singular-design: rank-deficient design matrix
  7   degenerate-input: estimate undefined on this data
  8   domain: requested quantity outside its mathematical domain
  9   config: invalid or inconsistent configuration
  10  io: filesystem failure
  1   unexpected internal failure";

#[derive(Parser)]
#[command(
    name = "medrobust",
    version,
    about = "Multiply robust estimation of natural direct and indirect effects",
    after_help = EXIT_CODES
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate effects from a CSV dataset.
    Analyze(analyze::AnalyzeArgs),
    /// Run a Monte Carlo study config.
    Simulate(simulate::SimulateArgs),
    /// Trace the direct effect over a confounding grid.
    Sensitivity(sense::SensitivityArgs),
}

fn exit_code(class: &str) -> u8 {
    match class {
        "invalid-input" => 3,
        "schema" => 4,
        "no-convergence" => 5,
        "singular-design" => 6,
        "degenerate-input" => 7,
        "domain" => 8,
        "config" => 9,
        "io" => 10,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(args) => analyze::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Sensitivity(args) => sense::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // One machine-parsable line: class, then message.
            let message = err.to_string().replace('\n', "; ");
            eprintln!("error[{}]: {message}", err.class());
            ExitCode::from(exit_code(err.class()))
        }
    }
}
