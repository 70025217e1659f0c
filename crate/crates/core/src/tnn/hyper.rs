use serde::{Deserialize, Serialize};

use super::TnnError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionalEncoding {
    /// Fixed sin/cos table, no trainable parameters.
    #[default]
    Sinusoidal,
    /// Trainable N × d_m table.
    Learned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TnnHyperparams {
    pub n_modes: usize,
    pub d_m: usize,
    pub d_t: usize,
    pub n_attn: usize,
    pub n_layers: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub positional_encoding: PositionalEncoding,
}

pub const PAPER_EPOCHS: usize = 3000;
pub const DESK_EPOCHS: usize = 300;

impl TnnHyperparams {
    /// Architecture preset for N = 10, 30 or 50 at full training length.
    pub fn preset(n_modes: usize) -> Result<Self, TnnError> {
        let (d_m, d_t, n_attn, n_layers) = match n_modes {
            10 => (64, 256, 6, 3),
            30 => (64, 256, 6, 4),
            50 => (96, 256, 10, 4),
            n => return Err(TnnError::NoPreset(n)),
        };
        Ok(Self {
            n_modes,
            d_m,
            d_t,
            n_attn,
            n_layers,
            dropout_rate: 0.10,
            epochs: PAPER_EPOCHS,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            positional_encoding: PositionalEncoding::Sinusoidal,
        })
    }

    /// Same architecture, shortened training.
    pub fn desk(n_modes: usize) -> Result<Self, TnnError> {
        Ok(Self { epochs: DESK_EPOCHS, ..Self::preset(n_modes)? })
    }

    /// Small model for tests and gradient checks.
    pub fn tiny(n_modes: usize) -> Self {
        Self {
            n_modes,
            d_m: 8,
            d_t: 16,
            n_attn: 2,
            n_layers: 1,
            dropout_rate: 0.0,
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            positional_encoding: PositionalEncoding::Sinusoidal,
        }
    }

    /// Per-head width ⌊d_m / n_attn⌋.
    pub fn head_dim(&self) -> usize {
        self.d_m / self.n_attn.max(1)
    }

    pub fn validate(&self) -> Result<(), TnnError> {
        let bad = |m: &str| Err(TnnError::InvalidHyper(m.to_string()));
        if self.n_modes == 0 {
            return bad("n_modes must be >= 1");
        }
        if self.d_m == 0 || self.d_t == 0 {
            return bad("d_m and d_t must be >= 1");
        }
        if self.n_layers > 0 && (self.n_attn == 0 || self.head_dim() == 0) {
            return bad("n_attn must lie in 1..=d_m");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        Ok(())
    }
}
