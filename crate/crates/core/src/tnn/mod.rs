//! Transformer regression from reference-pulse mode phases to signal-pulse
//! mode phases.

mod eval;
mod hyper;
mod model;
mod train;

pub use eval::{evaluate_variances, wrapped_variances, VarianceReport};
pub use hyper::{PositionalEncoding, TnnHyperparams, DESK_EPOCHS, PAPER_EPOCHS};
pub use model::{sinusoidal_table, Layout, Tape, TensorSlot, TnnModel};
pub use train::{gradients_check, loss, loss_and_grad, slice_set, train, train_with, Adam, PhaseSet, TrainHistory};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TnnError {
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("no architecture preset for N = {0} (available: 10, 30, 50)")]
    NoPreset(usize),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
}
