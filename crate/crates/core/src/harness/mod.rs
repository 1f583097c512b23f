//! Experiment orchestration behind the `bi` binary.
//!
//! Exit status contract: 0 all checks passed, 1 a check failed, 2 the
//! evolution broke down, 3 configuration or I/O error.

mod commands;
pub mod output;
pub mod settings;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::error::{BiError, Result};

pub use commands::{
    convergence, decay_study, simulate, verify_identities, Check, ControlSummary, ConvergenceLevel,
    ConvergenceTable, DecayRow, DecaySummary, IdentityStudy, JetRow, ScalingRow, SimulationRun,
};
pub use settings::{Family, Settings, WindowKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// One run with the full diagnostic time series.
    Simulate,
    /// Jet sweeps and time-series identity checks with a refinement study.
    VerifyIdentities,
    /// Amplitude ladder with the averaged and localized decay summaries.
    DecayStudy,
    /// Traveling-wave error against the exact translate over a grid ladder.
    Convergence,
}

impl Command {
    pub const ALL: [Command; 4] = [
        Command::Simulate,
        Command::VerifyIdentities,
        Command::DecayStudy,
        Command::Convergence,
    ];
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "bi",
    version,
    about = "Born-Infeld 1+1 wave simulator and identity checks"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Flat TOML file of key = value settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for the random jet and inequality samples.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Success = 0,
    CheckFailed = 1,
    Breakdown = 2,
    ConfigError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_error(err: &BiError) -> Self {
        if err.is_breakdown() {
            ExitStatus::Breakdown
        } else {
            ExitStatus::ConfigError
        }
    }
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub settings: Settings,
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut settings = Settings::resolve(cli.command, cli.config.as_deref(), &cli.overrides)?;
        if let Some(seed) = cli.seed {
            settings.seed = seed;
        }
        Ok(Self {
            command: cli.command,
            settings,
            out: cli.out.clone(),
        })
    }
}

pub fn execute(spec: &ExperimentSpec) -> Result<ExitStatus> {
    output::create_dir(&spec.out)?;
    match spec.command {
        Command::Simulate => commands::cmd_simulate(spec),
        Command::VerifyIdentities => commands::cmd_verify_identities(spec),
        Command::DecayStudy => commands::cmd_decay_study(spec),
        Command::Convergence => commands::cmd_convergence(spec),
    }
}

/// Resolves and executes `cli`, reporting errors on stderr.
pub fn run(cli: &Cli) -> ExitStatus {
    let outcome = ExperimentSpec::from_cli(cli).and_then(|spec| execute(&spec));
    match outcome {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::from_error(&e)
        }
    }
}
