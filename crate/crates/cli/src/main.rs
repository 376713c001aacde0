//! `nec`: capacities, capacity-cost bounds and validation for burst
//! noise-erasure channels.

mod commands;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nec_core::NecError;

#[derive(Parser, Debug)]
#[command(name = "nec", version, about = "Capacity and capacity-cost bounds of burst noise-erasure channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity with and without feedback, memoryless capacity and memory gain.
    Capacity(Common),
    /// Upper bound, feedback lower bound and non-feedback capacity-cost curves.
    Bounds(Common),
    /// Built-in consistency checks on one model.
    Validate(Common),
    /// Dump the n-fold channel matrix.
    NfoldExport(Common),
    /// Monte Carlo estimate of the n-fold channel compared with the exact matrix.
    Simulate(Common),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
    Svg,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON model file; the built-in model pi1 when omitted.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// `mod_add` or `table:PATH` (JSON q x q table); overrides the model file.
    #[arg(long, value_name = "SPEC")]
    pub channel: Option<String>,
    /// Block length.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// History length for auxiliary-rate bounds.
    #[arg(long, default_value_t = nec_core::entropy::DEFAULT_HISTORY_LEN)]
    pub l: usize,
    /// Noise symbol that switches the encoder to input 0.
    #[arg(long = "s-tilde")]
    pub s_tilde: Option<usize>,
    /// `START:STOP:COUNT`; defaults to 50 points on `[0, beta_max]`.
    #[arg(long = "beta-grid", value_name = "START:STOP:COUNT")]
    pub beta_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Write output here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Report information quantities in nats.
    #[arg(long)]
    pub nats: bool,
}

/// A finished command: its output and whether a computation flag was raised.
pub struct Outcome {
    pub text: String,
    pub flagged: bool,
}

fn exit_code_for(err: &NecError) -> u8 {
    match err {
        NecError::NoConvergence { .. } | NecError::NotQuasiSymmetric { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, result) = match &cli.command {
        Command::Capacity(c) => (c, commands::capacity(c)),
        Command::Bounds(c) => (c, commands::bounds(c)),
        Command::Validate(c) => (c, validate::run(c)),
        Command::NfoldExport(c) => (c, commands::nfold_export(c)),
        Command::Simulate(c) => (c, commands::simulate(c)),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let written = match &common.out {
        Some(path) => std::fs::write(path, &outcome.text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{}", outcome.text);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if outcome.flagged {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
