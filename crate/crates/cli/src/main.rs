//! `mginf`: evaluate, simulate and validate M|G|∞ busy-period laws.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod curves;
mod params;
mod table;

/// Bad flag combination or value that clap cannot catch by itself.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_NONCONVERGENCE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "mginf", version, about = "Busy periods and busy cycles of the M|G|∞ queue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate a distribution, the renewal function or the bounds.
    Eval(commands::EvalArgs),
    /// Raw moments of the service time, busy period or busy cycle.
    Moments(commands::MomentsArgs),
    /// Peak and modified peak of the busy period and busy cycle.
    Peaks(commands::PeaksArgs),
    /// Run the simulator and summarize it against the closed forms.
    Simulate(commands::SimulateArgs),
    /// Run the cross-check suite.
    Validate(commands::ValidateArgs),
    /// Evaluate over a cartesian parameter grid (long-format CSV).
    Sweep(commands::SweepArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<mginf::Error>() {
        Some(mginf::Error::NonConvergence { .. }) | Some(mginf::Error::Bracket { .. }) => {
            EXIT_NONCONVERGENCE
        }
        Some(_) => EXIT_USAGE,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(a) => commands::eval(a),
        Command::Moments(a) => commands::moments(a),
        Command::Peaks(a) => commands::peaks(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Validate(a) => commands::validate(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
