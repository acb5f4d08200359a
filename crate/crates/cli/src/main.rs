//! `fiocalc`: configuration-driven runner for the calculus engine and the
//! numerical laboratory.

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use fiocalc_core::report::{Artifact, Timing};
use thiserror::Error;

use config::{Format, RunConfig};

/// Failure classes, each with its exit code.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failure: {0}")]
    Validation(String),
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Io(_) => 2,
            Failure::Validation(_) => 3,
            Failure::NonConvergence(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "fiocalc", version, about = "Symbolic calculus and numerical laboratory for Fourier integral operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Leave out wall-clock data so identical runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate amplitudes, symbols, phases or dispersion relations.
    Check {
        #[command(flatten)]
        common: Common,
        /// Object spec file; may be repeated.
        #[arg(long = "spec")]
        specs: Vec<PathBuf>,
    },
    /// Build an asymptotic expansion.
    Expand {
        #[command(flatten)]
        common: Common,
        /// tp, pt, tp-reduce or psdo-reduce.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Evaluate oscillatory-integral ground truth.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Apply a quantized operator on a grid.
    Quantize {
        #[command(flatten)]
        common: Common,
    },
    /// Estimate operator norms.
    Opnorm {
        #[command(flatten)]
        common: Common,
    },
    /// Space-time smoothing ratios for a dispersive evolution.
    Smoothing {
        #[command(flatten)]
        common: Common,
    },
    /// Run the acceptance battery.
    Acceptance {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "primary")]
        suite: String,
        /// Comma-separated subset of criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn set_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("FIOCALC_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Config(format!("FIOCALC_THREADS={v:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    set_threads()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let common = match &cli.command {
        Command::Check { common, .. }
        | Command::Expand { common, .. }
        | Command::Oracle { common }
        | Command::Quantize { common }
        | Command::Opnorm { common }
        | Command::Smoothing { common }
        | Command::Acceptance { common, .. } => common.clone(),
    };
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let emitted = match cli.command {
        Command::Check { specs, .. } => commands::check(&cfg, &specs)?,
        Command::Expand { kind, order, .. } => commands::expand(&cfg, kind, order)?,
        Command::Oracle { .. } => commands::oracle(&cfg)?,
        Command::Quantize { .. } => commands::quantize(&cfg)?,
        Command::Opnorm { .. } => commands::opnorm_cmd(&cfg)?,
        Command::Smoothing { .. } => commands::smoothing(&cfg)?,
        Command::Acceptance { suite, only, .. } => commands::acceptance_cmd(&suite, &only, !common.no_timing)?,
    };
    let mut seeds = BTreeMap::from([("run".to_string(), cfg.seed)]);
    seeds.insert("sample_plan".into(), cfg.validate.sample.seed);
    if emitted.kind == "acceptance" {
        seeds.insert("acceptance".into(), fiocalc_core::acceptance::SEED);
    }
    let params = serde_json::to_value(&cfg).map_err(|e| Failure::Io(e.to_string()))?;
    let timing = (!common.no_timing).then(|| Timing { wall_clock_s: clock.elapsed().as_secs_f64(), started_unix_s: started });
    let artifact = Artifact::new(emitted.kind, params, seeds, emitted.result).with_timing(timing);
    let envelope = serde_json::to_value(&artifact).map_err(|e| Failure::Io(e.to_string()))?;
    let format = common.format.or(cfg.output.format).unwrap_or(Format::Json);
    let bytes = output::render(&envelope, &emitted.table, format)?;
    match common.out.or(cfg.output.path) {
        Some(path) => output::write_atomic(&path, &bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| Failure::Io(e.to_string()))?;
        }
    }
    Ok(emitted.status as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fiocalc: {e}");
            ExitCode::from(e.code())
        }
    }
}
