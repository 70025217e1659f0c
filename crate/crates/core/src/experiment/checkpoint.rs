//! Model checkpoint:
//!
//! ```text
//! "QWFM" | version u32 | config sha256 [32] | hyperparams json (u32 len + bytes)
//! | seed u64 | weight count u64 | weights f64 LE
//! | epochs u64 | train loss f64 × epochs | test count u64 | test loss f64 × count
//! ```

use super::codec::{Reader, Writer};
use super::FormatError;
use crate::tnn::{TnnHyperparams, TnnModel, TrainHistory};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QWFM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub model: TnnModel,
    pub history: TrainHistory,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let h = self.model.hyper();
        let mut w = Writer::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.bytes(&self.config_hash);
        w.blob(&serde_json::to_vec(h).expect("hyperparameters serialize"));
        w.u64(h.seed);
        w.u64(self.model.param_count() as u64);
        w.f64s(self.model.params());
        w.u64(self.history.train_loss.len() as u64);
        w.f64s(&self.history.train_loss);
        w.u64(self.history.test_loss.len() as u64);
        w.f64s(&self.history.test_loss);
        w.buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let config_hash = r.hash()?;
        let hyper: TnnHyperparams = serde_json::from_slice(r.blob()?)
            .map_err(|e| FormatError::Invalid(format!("hyperparameters: {e}")))?;
        let seed = r.u64()?;
        if seed != hyper.seed {
            return Err(FormatError::Invalid(format!("seed {seed} disagrees with hyperparameters")));
        }
        let count = r.u64()?;
        let params = r.f64s(count)?;
        let epochs = r.u64()?;
        let train_loss = r.f64s(epochs)?;
        let tests = r.u64()?;
        let test_loss = r.f64s(tests)?;
        r.finish()?;
        // building the layout allocates O(layers); refuse absurd shapes first
        if hyper.n_layers > 64 || hyper.d_m > 4096 || hyper.d_t > 16384 || hyper.n_modes > 4096 {
            return Err(FormatError::Invalid("architecture too large".into()));
        }
        let model = TnnModel::from_parts(hyper, params).map_err(|e| FormatError::Invalid(e.to_string()))?;
        Ok(Self { config_hash, model, history: TrainHistory { train_loss, test_loss } })
    }
}
