//! `qmelab` command-line harness: runs the sweep experiments, fits CZ error
//! parameters to tomography snapshots and checks channel identities.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qmelab_core::experiments::{Experiment, Shots};

use crate::config::{parse_config, resolve, Command, ConfigFile, Format, Overrides};
use crate::error::{exit, CliError};

pub const THREADS_ENV: &str = "QMELAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "qmelab",
    version,
    about = "Stochastic stabilizer-measurement emulation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Single-qubit arms over a grid of pure states
    Fig1(Common),
    /// Transversal XX error on the ZZ code with and without QME
    Fig2(Common),
    /// Repeated CZ pairs on the XX code with QME after each pair
    Fig3(Common),
    /// Single-qubit arms for non-Z stabilizer axes
    SuppAxes(Common),
    /// Transversal error family sweep
    SuppTransversal(Common),
    /// Fit CZ error parameters to tomography snapshots
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Check measurement/dephasing equivalence and Kraus completeness
    VerifyChannels(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Exact channel averaging
    #[arg(long, conflicts_with = "trajectories")]
    pub exact: bool,
    /// Sampled mode with this many trajectories
    #[arg(long, value_name = "N")]
    pub trajectories: Option<usize>,
    /// Shots per tomography setting, or `exact`
    #[arg(long, value_name = "N|exact", value_parser = parse_shots)]
    pub shots: Option<Shots>,
}

fn parse_shots(s: &str) -> Result<Shots, String> {
    if s.eq_ignore_ascii_case("exact") {
        return Ok(Shots::Exact);
    }
    match s.parse::<u64>() {
        Ok(0) => Err("shots must be positive".into()),
        Ok(n) => Ok(Shots::PerSetting(n)),
        Err(_) => Err(format!("expected a positive integer or `exact`, got {s:?}")),
    }
}

impl CliCommand {
    fn split(self) -> (Command, Common, Option<PathBuf>) {
        use CliCommand::*;
        match self {
            Fig1(c) => (Command::Experiment(Experiment::Fig1), c, None),
            Fig2(c) => (Command::Experiment(Experiment::Fig2), c, None),
            Fig3(c) => (Command::Experiment(Experiment::Fig3), c, None),
            SuppAxes(c) => (Command::Experiment(Experiment::SuppAxes), c, None),
            SuppTransversal(c) => (Command::Experiment(Experiment::SuppTransversal), c, None),
            Fit { common, snapshots } => (Command::Fit, common, snapshots),
            VerifyChannels(c) => (Command::VerifyChannels, c, None),
        }
    }
}

/// Sizes the global rayon pool from `QMELAB_THREADS` (unset or 0: automatic).
pub fn configure_threads() -> Result<(), CliError> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a non-negative integer, got {v:?}"
            ))
        })?,
        Err(_) => 0,
    };
    // A second call within one process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (command, common, snapshots) = cli.command.split();
    let file = match &common.config {
        Some(p) => parse_config(p)?,
        None => ConfigFile::default(),
    };
    let ov = Overrides {
        seed: common.seed,
        out: common.out,
        format: common.format,
        exact: common.exact,
        trajectories: common.trajectories,
        shots: common.shots,
        snapshots,
    };
    let plan = resolve(&file, command, &ov)?;
    match command {
        Command::Experiment(_) => {
            let text = commands::run_experiment(&plan)?;
            output::write_output(plan.out.as_deref(), &text)
        }
        Command::Fit => {
            let (text, _) = commands::run_fit(&plan)?;
            output::write_output(plan.out.as_deref(), &text)
        }
        Command::VerifyChannels => commands::run_verify(&plan).map(|_| ()),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
        }
    };
    match execute(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
