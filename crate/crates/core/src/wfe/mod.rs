//! Transmitter aberrations, cross-leakage and Monte-Carlo generation of
//! reference/signal mode-phase records.

mod leakage;
mod pipeline;
mod transmit;

pub use leakage::{cross_leakage, CrossLeakageConfig, LeakageSynthesis, HARMONICS};
pub use pipeline::{
    build_case_record, generate_dataset, split_count, ChannelConfig, Dataset, InstanceOutcome, Measured,
    PulsePairRecord, SignalFields, Simulator,
};
pub use transmit::{apply_transmit_wfes, Branch, TransmitterConfig, WfeEntry};

use thiserror::Error;

use crate::channel::ChannelError;
use crate::optics::OpticsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WfeError {
    #[error("invalid case id {0}; expected 0, 1, 2 or 3")]
    InvalidCase(u8),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}
