//! `frg`: drive symbolic expansions and flow solves from TOML run
//! configurations.
//!
//! Exit codes: 0 success, 2 configuration rejected, 3 singular locus
//! reached, 4 guard abort, 5 internal error. Every executed run leaves a
//! `manifest.json` in its output directory; a code-2 rejection happens
//! before anything runs and leaves none.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use frg_cli::config::{self, CommandKind, RunConfig};
use frg_cli::run;

#[derive(Parser)]
#[command(name = "frg", version, about = "Symbolic expansions and RG flow solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a coupling flow and write the trajectory as CSV.
    Flow {
        #[command(flatten)]
        common: Common,
    },
    /// March a potential surface and write snapshots plus diagnostics.
    Lpa {
        #[command(flatten)]
        common: Common,
        /// Also snapshot the surface every DK in scale, strictly inside the
        /// scale interval.
        #[arg(long, value_name = "DK")]
        checkpoint_every: Option<f64>,
    },
    /// Expand an observable expression and write the exact functional as
    /// JSON.
    Expand {
        #[command(flatten)]
        common: Common,
        /// Truncation order for S, Sinv, and R forms; overrides the
        /// configuration.
        #[arg(long, value_name = "N")]
        order: Option<u32>,
    },
}

#[derive(Args)]
struct Common {
    /// Path to the TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the configuration's output_dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, expected) = match &cli.command {
        Command::Flow { common } => (common, CommandKind::Flow),
        Command::Lpa { common, .. } => (common, CommandKind::Lpa),
        Command::Expand { common, .. } => (common, CommandKind::Expand),
    };

    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", common.config.display());
            return ExitCode::from(run::EXIT_SCHEMA as u8);
        }
    };

    let mut cfg: RunConfig = match config::parse_config(&text) {
        Ok(c) => c,
        Err(violations) => {
            eprintln!("configuration rejected with {} violation(s):", violations.len());
            for v in &violations {
                eprintln!("  {v}");
            }
            return ExitCode::from(run::EXIT_SCHEMA as u8);
        }
    };

    if cfg.command != expected {
        eprintln!(
            "configuration says command = \"{}\" but the {} subcommand was invoked",
            cfg.command.name(),
            expected.name()
        );
        return ExitCode::from(run::EXIT_SCHEMA as u8);
    }

    if let Some(out) = &common.out {
        cfg.output_dir = out.display().to_string();
    }
    match &cli.command {
        Command::Lpa { checkpoint_every: Some(dk), .. } => {
            if let Err(e) = cfg.add_periodic_checkpoints(*dk) {
                eprintln!("--checkpoint-every: {e}");
                return ExitCode::from(run::EXIT_SCHEMA as u8);
            }
        }
        Command::Expand { order: Some(n), .. } => {
            if let Some(settings) = cfg.expand.as_mut() {
                settings.order = *n;
            }
        }
        _ => {}
    }

    let report = run::execute(&cfg);
    for note in &report.notes {
        eprintln!("{note}");
    }
    ExitCode::from(report.exit_code as u8)
}
