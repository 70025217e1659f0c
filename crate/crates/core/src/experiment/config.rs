use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::optics::CoherenceMode;
use crate::skr::NoiseParams;
use crate::tnn::TnnHyperparams;
use crate::wfe::{ChannelConfig, LeakageSynthesis, TransmitterConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 4,000 instances, 300 epochs, 256² grid.
    #[default]
    Desk,
    /// 24,000 instances, 3,000 epochs, 512² grid.
    Paper,
}

impl Preset {
    pub fn instances(self) -> usize {
        match self {
            Preset::Desk => 4_000,
            Preset::Paper => 24_000,
        }
    }

    pub fn grid(self) -> usize {
        match self {
            Preset::Desk => 256,
            Preset::Paper => 512,
        }
    }

    pub fn tnn(self, n_modes: usize) -> Result<TnnHyperparams, ExperimentError> {
        Ok(match self {
            Preset::Desk => TnnHyperparams::desk(n_modes)?,
            Preset::Paper => TnnHyperparams::preset(n_modes)?,
        })
    }
}

impl FromStr for Preset {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(ExperimentError::Validation(format!("unknown preset '{other}' (desk|paper)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkrBlock {
    pub noise: NoiseParams,
    pub v_mod_range: [f64; 2],
    pub v_mod_points: usize,
    pub coherence: CoherenceMode,
    /// Rotate each reconstruction so its HG00 coefficient is real.
    pub anchor_global_phase: bool,
}

impl Default for SkrBlock {
    fn default() -> Self {
        Self {
            noise: NoiseParams::default(),
            v_mod_range: [0.5, 10.0],
            v_mod_points: 96,
            coherence: CoherenceMode::RealPart,
            anchor_global_phase: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunBlock {
    pub n_modes: usize,
    pub case_id: u8,
    pub instances: usize,
    pub split: f64,
    pub base_seed: u64,
    pub preset: Preset,
    /// Not part of the config hash.
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub channel: ChannelConfig,
    pub transmitter: TransmitterConfig,
    pub leakage: LeakageSynthesis,
    pub tnn: TnnHyperparams,
    pub skr: SkrBlock,
    pub run: RunBlock,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset, case_id: u8, n_modes: usize, seed: u64) -> Result<Self, ExperimentError> {
        let channel = ChannelConfig { grid: preset.grid(), ..ChannelConfig::default() };
        let tnn = TnnHyperparams { seed, ..preset.tnn(n_modes)? };
        let cfg = Self {
            schema_version: SCHEMA_VERSION,
            channel,
            transmitter: TransmitterConfig::default(),
            leakage: LeakageSynthesis::default(),
            tnn,
            skr: SkrBlock::default(),
            run: RunBlock {
                n_modes,
                case_id,
                instances: preset.instances(),
                split: 0.8,
                base_seed: seed,
                preset,
                output_dir: PathBuf::from("out"),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Switches N, keeping the preset's TNN architecture for the new N.
    pub fn with_modes(mut self, n_modes: usize) -> Result<Self, ExperimentError> {
        if n_modes != self.run.n_modes {
            let seed = self.tnn.seed;
            self.tnn = TnnHyperparams { seed, ..self.run.preset.tnn(n_modes)? };
            self.run.n_modes = n_modes;
        }
        Ok(self)
    }

    /// Reseeds both the instance stream and the network.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.base_seed = seed;
        self.tnn.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Validation(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        self.channel.validate().map_err(|e| ExperimentError::Validation(format!("channel: {e}")))?;
        self.transmitter.validate().map_err(|e| ExperimentError::Validation(format!("transmitter: {e}")))?;
        self.leakage.validate().map_err(|e| ExperimentError::Validation(format!("leakage: {e}")))?;
        self.tnn.validate().map_err(|e| ExperimentError::Validation(format!("tnn: {e}")))?;
        let r = &self.run;
        if r.n_modes == 0 {
            return bad("run.n_modes must be >= 1".into());
        }
        if self.tnn.n_modes != r.n_modes {
            return bad(format!("tnn.n_modes = {} but run.n_modes = {}", self.tnn.n_modes, r.n_modes));
        }
        if r.case_id > 3 {
            return bad(format!("run.case_id = {} (expected 0..=3)", r.case_id));
        }
        if r.instances < 2 {
            return bad(format!("run.instances = {} (need >= 2)", r.instances));
        }
        if !(r.split > 0.0 && r.split < 1.0) {
            return bad(format!("run.split = {} outside (0, 1)", r.split));
        }
        let s = &self.skr;
        let [lo, hi] = s.v_mod_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) || s.v_mod_points == 0 {
            return bad(format!("skr.v_mod_range [{lo}, {hi}] with {} points", s.v_mod_points));
        }
        let n = &s.noise;
        if !(n.eta_det > 0.0 && n.eta_det <= 1.0 && (0.0..=1.0).contains(&n.beta_r) && n.xi_el >= 0.0 && n.xi_ch >= 0.0) {
            return bad("skr.noise out of range".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Compact JSON with the output directory blanked; the hashed form.
    pub fn canonical_json(&self) -> Vec<u8> {
        let mut c = self.clone();
        c.run.output_dir = PathBuf::new();
        serde_json::to_vec(&c).expect("config serializes")
    }

    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_json()).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }
}
