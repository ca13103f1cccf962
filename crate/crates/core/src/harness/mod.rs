//! Command-line orchestration: training, evaluation in both modes,
//! calibration, sparsification sweeps and their CSV/SVG artifacts.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod experiment;
pub mod plot;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::DataError;
use crate::phasor::PhasorError;
use crate::sparsify::SparsifyError;
use crate::spike::SimError;
use crate::trainer::{CheckpointError, TrainError};

pub use commands::{cmd_calibrate, cmd_eval, cmd_fetch, cmd_plot, cmd_sweep, cmd_train, CalibrationFile, Command, Overrides};
pub use config::{EvalMode, RunConfig, SweepChoice};
pub use csvio::{EvalRow, LossRow, SweepRecord};
pub use experiment::{run_sweep, SweepMethod};
pub use plot::render_svg;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}: line {line}: {msg}")]
    Csv { file: String, line: u64, msg: String },
    #[error("no checkpoint at {0}; run `train` first")]
    MissingCheckpoint(PathBuf),
    #[error("no calibration at {0}; run `calibrate` first")]
    MissingCalibration(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Phasor(#[from] PhasorError),
    #[error(transparent)]
    Sparsify(#[from] SparsifyError),
}

impl HarnessError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 for usage and config mistakes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Usage(_) => 2,
            _ => 1,
        }
    }
}
