//! `microtube`: cell solves, shape optimization, gradient checks and tiling.

mod commands;
mod dump;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "microtube", version, about = "Periodic cathode cell design")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the commands that build a configuration.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// TOML run configuration; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed shape, e.g. `circle(0.5,0.5,0.3)`; overrides `[shape]`.
    #[arg(long)]
    pub seed_shape: Option<String>,
    /// Grid size n; overrides `[grid] n`.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a configuration file with every key spelled out.
    Init {
        #[command(flatten)]
        common: Common,
        /// Replace an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Solve the cell problems for the configured shape and report K and D.
    SolveCell {
        #[command(flatten)]
        common: Common,
    },
    /// Run the augmented-Lagrangian shape optimization.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Overrides `[al] max_iters`.
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Continue an optimization from a checkpoint.
    Resume {
        /// Checkpoint written by `optimize`.
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Overrides `[al] max_iters` (total iterations, including those already done).
        #[arg(long)]
        max_iters: Option<usize>,
        /// Accept a configuration whose hash differs from the checkpoint's.
        #[arg(long)]
        allow_config_change: bool,
    },
    /// Rasterize the solid phase of a level-set dump, tiled m x m, as a graymap.
    Tile {
        /// Field dump (`.vtk`) or scalar CSV holding the level set.
        dump: PathBuf,
        #[arg(long, short = 'm', default_value_t = 1)]
        repeat: usize,
        /// Output image; defaults to the dump path with a `.pgm` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare shape derivatives with finite differences.
    CheckGradients {
        #[command(flatten)]
        common: Common,
    },
}

/// A failed command and its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_GRADIENT: u8 = 4;

impl Failure {
    pub fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

impl From<microtube::Error> for Failure {
    fn from(e: microtube::Error) -> Self {
        use microtube::Error as E;
        let code = match e {
            E::Config(_) | E::InvalidShape(_) | E::InvalidGrid(_) => EXIT_CONFIG,
            _ => EXIT_SOLVER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = commands::Log { quiet: cli.quiet };
    let result = match cli.command {
        Command::Init { common, force } => commands::init(&common, force, &log),
        Command::SolveCell { common } => commands::solve_cell(&common, &log),
        Command::Optimize { common, max_iters } => commands::optimize(&common, max_iters, &log),
        Command::Resume {
            checkpoint,
            common,
            max_iters,
            allow_config_change,
        } => commands::resume(&checkpoint, &common, max_iters, allow_config_change, &log),
        Command::Tile { dump, repeat, out } => commands::tile(&dump, repeat, out, &log),
        Command::CheckGradients { common } => commands::check_gradients(&common, &log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
