//! Command-line frontend for the `boolinf` experiments.

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::CheckFailed;
use config::Config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CHECK: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "boolinf", version, about = "Boolean influence and canonical-holdout experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and estimators.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Spectrum, influences, degree weights and stability curve of the target.
    Analyze,
    /// One training run at a single frozen coordinate.
    Train,
    /// Repeated runs over frozen coordinates and list-valued axis keys.
    Sweep,
    /// Cross-predictability of the target's orbit.
    Cp,
    /// Initial neuron alignment of the configured model.
    Inal,
    /// Cross-checks of every closed form against brute force.
    Verify,
}

fn load(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(out) = &cli.out {
        cfg.set("out", &out.to_string_lossy())?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(config::ConfigError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    if let Command::Verify = cli.command {
        return commands::verify(cli.out.as_deref());
    }
    let cfg = load(cli)?;
    match cli.command {
        Command::Analyze => commands::analyze(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Cp => commands::cp(&cfg),
        Command::Inal => commands::inal(&cfg),
        Command::Verify => unreachable!(),
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let _ = e.print();
            return EXIT_CONFIG;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) if e.is::<CheckFailed>() => {
            eprintln!("error: {e}");
            EXIT_CHECK
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
    }
}
