//! The `fpp-local` command line: parse a JSON experiment config, run one
//! subcommand and write its CSV/JSON outputs.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run_command, RunOptions};
pub use config::{ExperimentConfig, Prepared, RegimeKind};

use crate::error::Error;
use crate::parallel::available_workers;

pub const WORKERS_ENV: &str = "FPP_LOCAL_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fpp-local", version, about = "First passage percolation on the configuration model: local limits, coloured geodesics and explorations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    /// TV distance between graph neighbourhoods and limit trees per grid size.
    Convergence,
    /// Dump coloured limit trees.
    LimitSample,
    /// Dump coloured graph neighbourhoods for every grid size.
    NeighbourhoodSample,
    /// Exploration traces on graphs and on the limit tree.
    Explore,
    /// Print nu, lambda, zeta*, zeta for the configured models.
    Derive,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// TV distance between graph neighbourhoods and limit trees per grid size
    Convergence(Common),
    /// Sample coloured limit trees
    LimitSample(Common),
    /// Sample coloured geodesic neighbourhoods for every grid size
    NeighbourhoodSample(Common),
    /// Explore graphs and limit trees in distance order
    Explore(Common),
    /// Print the closed-form constants of the configured models
    Derive(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to FPP_LOCAL_WORKERS)
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: out)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (CommandKind, Common) {
        match self {
            Command::Convergence(c) => (CommandKind::Convergence, c),
            Command::LimitSample(c) => (CommandKind::LimitSample, c),
            Command::NeighbourhoodSample(c) => (CommandKind::NeighbourhoodSample, c),
            Command::Explore(c) => (CommandKind::Explore, c),
            Command::Derive(c) => (CommandKind::Derive, c),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) => EXIT_CONFIG,
        Error::RuntimeCap(_)
        | Error::VertexCapExceeded { .. }
        | Error::SearchCapExceeded(_)
        | Error::HorizonTooDeep { .. } => EXIT_CAP,
        // Model errors only surface for configs that passed validation.
        Error::InvalidModel(_)
        | Error::ZeroMeanDegree
        | Error::NotSupercritical
        | Error::InfiniteMeanOffspring
        | Error::OddHalfEdgeCount(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn env_workers() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&w| w > 0)
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    let (kind, common) = cli.command.split();
    let result = ExperimentConfig::load(&common.config).and_then(|mut config| {
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        if common.workers.is_some() {
            config.workers = common.workers;
        }
        let explicit_out = common.out.is_some() || config.out.is_some();
        let prepared = config.prepare()?;
        let workers = config
            .workers
            .or_else(env_workers)
            .unwrap_or_else(available_workers);
        let out = common
            .out
            .or_else(|| config.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let opts = RunOptions {
            workers,
            out,
            write_files: kind != CommandKind::Derive || explicit_out,
        };
        run_command(kind, &prepared, &opts, stdout)
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                Error::Config(violations) => {
                    let _ = writeln!(stderr, "config error:");
                    for v in violations {
                        let _ = writeln!(stderr, "  - {v}");
                    }
                }
                other => {
                    let _ = writeln!(stderr, "error: {other}");
                }
            }
            exit_code(&e)
        }
    }
}
