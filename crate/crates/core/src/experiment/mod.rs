//! Configuration, file formats and the simulate → train → evaluate → skr →
//! report workflow.

mod checkpoint;
mod codec;
mod config;
mod container;
mod evaluate;
mod orchestrate;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use codec::MAX_BLOB;
pub use config::{ExperimentConfig, Preset, RunBlock, SkrBlock, SCHEMA_VERSION};
pub use container::{DatasetContainer, DATASET_MAGIC, DATASET_VERSION};
pub use evaluate::{coherent_efficiencies, GammaRow, GammaStats, GammaTable, Variant};
pub use orchestrate::{
    cmd_evaluate, cmd_report, cmd_simulate, cmd_skr, cmd_train, load_checkpoint, load_dataset, read_csv_hash,
    skr_table, EvaluateSummary, OutputPaths, SimulateSummary, SkrSummary, TrainSummary, VariantRate, SKR_CSV_HEADER_PREFIX,
};

use thiserror::Error;

use crate::skr::SkrError;
use crate::tnn::TnnError;
use crate::wfe::WfeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated at byte {offset}: {needed} more bytes expected")]
    Truncated { offset: usize, needed: u64 },
    #[error("declared size {0} exceeds the reader limit")]
    TooLarge(u64),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid content: {0}")]
    Invalid(String),
    #[error("embedded config does not match its hash")]
    HashMismatch,
    #[error("missing array {0}")]
    MissingArray(String),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Bad input: configuration, file contents, mismatched artifacts.
    #[error("validation error: {0}")]
    Validation(String),
    /// Divergence or an unphysical intermediate.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: String, source: FormatError },
}

impl ExperimentError {
    /// Process exit status for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        ExperimentError::Io { path: path.display().to_string(), source }
    }

    pub fn format(path: &std::path::Path, source: FormatError) -> Self {
        ExperimentError::Format { path: path.display().to_string(), source }
    }
}

impl From<TnnError> for ExperimentError {
    fn from(e: TnnError) -> Self {
        match e {
            TnnError::Diverged { .. } => ExperimentError::Numerical(e.to_string()),
            _ => ExperimentError::Validation(e.to_string()),
        }
    }
}

impl From<SkrError> for ExperimentError {
    fn from(e: SkrError) -> Self {
        match e {
            SkrError::Unphysical(_) => ExperimentError::Numerical(e.to_string()),
            SkrError::Domain(_) => ExperimentError::Validation(e.to_string()),
        }
    }
}

impl From<WfeError> for ExperimentError {
    fn from(e: WfeError) -> Self {
        match e {
            WfeError::InvalidCase(_) | WfeError::InvalidConfig(_) | WfeError::Dimension { .. } => {
                ExperimentError::Validation(e.to_string())
            }
            _ => ExperimentError::Numerical(e.to_string()),
        }
    }
}
