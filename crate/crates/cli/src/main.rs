//! `chaosbath`: reproduces the correlation, energy-flow, wave-packet,
//! decoherence and root-finding figures as CSV, JSON and SVG files.

mod commands;
mod config;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, FitSource};
use config::RunConfig;
use output::Outputs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Numeric(#[from] chaosbath_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration and I/O problems, 1 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numeric(chaosbath_core::Error::InvalidParameter { .. }) => 2,
            CliError::Numeric(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "chaosbath", version, about = "Oscillator coupled to a chaotic bath: figure reproduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Position and momentum correlations of the isolated chaotic system, and their fit.
    Correlations(Args),
    /// Oscillator energy against time for each initial energy ratio.
    EnergyFlow(Args),
    /// Squared wave-packet width for several bath ratios.
    Gaussian(Args),
    /// Decoherence factor, decoherence time and a cat-state density.
    Decoherence(Args),
    /// Roots of the characteristic quartic.
    Roots(Args),
    /// Every command above, sharing one correlation fit.
    All(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON configuration file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted overrides applied after the file, e.g. `--model.gamma=5e-4`.
    #[arg(value_name = "--KEY=VALUE", trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("CHAOSBATH_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("CHAOSBATH_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (Command::Correlations(args)
    | Command::EnergyFlow(args)
    | Command::Gaussian(args)
    | Command::Decoherence(args)
    | Command::Roots(args)
    | Command::All(args)) = &cli.command;
    let cfg = RunConfig::load(args.config.as_deref(), &args.overrides)?;
    let workers = workers_from_env()?;
    let out = Outputs::new(&cfg.output.dir, &cfg.hash(), cfg.output.svg)?;
    let mut ctx = Context { cfg, workers, out };
    let stored = ctx.stored_fit()?;
    let quantum_source = stored.unwrap_or(FitSource::Published);

    match cli.command {
        Command::Correlations(_) => {
            commands::correlations(&mut ctx)?;
        }
        Command::EnergyFlow(_) => {
            let source = match stored {
                Some(s) => s,
                None => FitSource::Computed(inline_fit(&mut ctx)?),
            };
            commands::energy_flow(&mut ctx, source)?;
        }
        Command::Gaussian(_) => commands::gaussian(&mut ctx, quantum_source)?,
        Command::Decoherence(_) => commands::decoherence(&mut ctx, quantum_source)?,
        Command::Roots(_) => commands::roots(&mut ctx, quantum_source)?,
        Command::All(_) => {
            let source = FitSource::Computed(required(commands::correlations(&mut ctx)?)?);
            commands::energy_flow(&mut ctx, source)?;
            commands::gaussian(&mut ctx, source)?;
            commands::decoherence(&mut ctx, source)?;
            commands::roots(&mut ctx, source)?;
        }
    }
    ctx.out.commit()
}

/// Correlation fit for energy flow when no `fit_file` is given; the
/// correlation outputs themselves are not written.
fn inline_fit(ctx: &mut Context) -> Result<chaosbath_core::response::CorrelationFit, CliError> {
    let mut scratch = Context {
        cfg: ctx.cfg.clone(),
        workers: ctx.workers,
        out: Outputs::new(&ctx.cfg.output.dir, "inline", false)?,
    };
    required(commands::correlations(&mut scratch)?)
}

fn required<T>(fit: Option<T>) -> Result<T, CliError> {
    fit.ok_or_else(|| {
        CliError::Numeric(chaosbath_core::Error::Fit(
            "the correlation fit is needed downstream but did not converge".into(),
        ))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
