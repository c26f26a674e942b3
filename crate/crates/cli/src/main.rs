//! `gpseg`: run the construction stage by stage from a JSON experiment config.
//!
//! Exit codes: 0 success, 1 runtime failure (no convergence, I/O, strict
//! criteria), 2 invalid config, 3 a gate refused to continue.

// `!(x >= lo)` is the NaN-rejecting form of a bound check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{ConfigError, ExperimentConfig};
use pipeline::{Command, RunOptions, StageError};

#[derive(Debug, Parser)]
#[command(name = "gpseg", version, about = "Segregated radial solutions of the two-component system at strong coupling")]
struct Cli {
    /// Stage to run; each stage runs all the earlier ones.
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run at this single coupling instead of the config's `g_list`.
    #[arg(long)]
    g: Option<f64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the per-g stages (0: one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// With `verify`: exit 1 when any criterion fails.
    #[arg(long)]
    strict: bool,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(g) = cli.g {
        cfg.g_list = vec![g];
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(s) = e.downcast_ref::<StageError>() {
        return match s.source {
            gpseg::Error::Gate(_) | gpseg::Error::Degenerate(_) | gpseg::Error::Singular { .. } => 3,
            gpseg::Error::InvalidInput(_) | gpseg::Error::LengthMismatch { .. } => 2,
            _ => 1,
        };
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("gpseg: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { out: cfg.output_dir.clone(), threads: cli.threads, strict: cli.strict };
    match pipeline::run(cli.command, &cfg, &opts) {
        Ok(_) => {
            eprintln!("gpseg {}: done, outputs in {}", cli.command.name(), opts.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gpseg {}: {e:#}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
