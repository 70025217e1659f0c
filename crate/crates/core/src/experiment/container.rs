//! Dataset container:
//!
//! ```text
//! "QWFC" | version u32 | n_modes u32 | count u64 | case u8 | n_train u64
//! | config sha256 [32] | config json (u32 len + bytes)
//! | array count u32 | arrays...
//! array: name (u16 len + utf8) | dtype u8 (0 = f64, 1 = u64) | rows u64 | cols u64 | data LE
//! ```

use sha2::{Digest, Sha256};

use super::codec::{Reader, Writer};
use super::{ExperimentConfig, FormatError};
use crate::wfe::{Dataset, PulsePairRecord};

pub const DATASET_MAGIC: &[u8; 4] = b"QWFC";
pub const DATASET_VERSION: u32 = 1;

const F64: u8 = 0;
const U64: u8 = 1;

/// A dataset plus the configuration that generated it.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetContainer {
    pub config_hash: [u8; 32],
    pub config_json: Vec<u8>,
    pub dataset: Dataset,
}

enum Column {
    F(Vec<f64>),
    U(Vec<u64>),
}

impl DatasetContainer {
    pub fn new(config: &ExperimentConfig, dataset: Dataset) -> Self {
        Self { config_hash: config.hash(), config_json: config.canonical_json(), dataset }
    }

    pub fn config(&self) -> Result<ExperimentConfig, FormatError> {
        serde_json::from_slice(&self.config_json).map_err(|e| FormatError::Invalid(format!("embedded config: {e}")))
    }

    pub fn encode(&self) -> Vec<u8> {
        let d = &self.dataset;
        let n = d.n_modes;
        let count = d.records.len();
        let mut w = Writer::default();
        w.bytes(DATASET_MAGIC);
        w.u32(DATASET_VERSION);
        w.u32(n as u32);
        w.u64(count as u64);
        w.u8(d.case_id);
        w.u64(d.n_train as u64);
        w.bytes(&self.config_hash);
        w.blob(&self.config_json);

        let flat = |f: fn(&PulsePairRecord) -> &Vec<f64>| -> Vec<f64> {
            d.records.iter().flat_map(|r| f(r).iter().copied()).collect()
        };
        let arrays: Vec<(&str, usize, Column)> = vec![
            ("phases_R", n, Column::F(flat(|r| &r.phases_r))),
            ("phases_S", n, Column::F(flat(|r| &r.phases_s))),
            ("theta_S", n, Column::F(flat(|r| &r.theta_s))),
            ("amps_R", n, Column::F(flat(|r| &r.amps_r))),
            ("amps_S", n, Column::F(flat(|r| &r.amps_s))),
            ("T", 1, Column::F(d.records.iter().map(|r| r.t).collect())),
            ("seeds", 1, Column::U(d.records.iter().map(|r| r.seed).collect())),
        ];
        w.u32(arrays.len() as u32);
        for (name, cols, data) in arrays {
            w.u16(name.len() as u16);
            w.bytes(name.as_bytes());
            w.u8(match data {
                Column::F(_) => F64,
                Column::U(_) => U64,
            });
            w.u64(count as u64);
            w.u64(cols as u64);
            match data {
                Column::F(v) => w.f64s(&v),
                Column::U(v) => {
                    for x in v {
                        w.u64(x);
                    }
                }
            }
        }
        w.buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != DATASET_MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = r.u32()?;
        if version != DATASET_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let n = r.u32()? as usize;
        let count = r.u64()?;
        let case_id = r.u8()?;
        let n_train = r.u64()?;
        let config_hash = r.hash()?;
        let config_json = r.blob()?.to_vec();
        if <[u8; 32]>::from(Sha256::digest(&config_json)) != config_hash {
            return Err(FormatError::HashMismatch);
        }
        if case_id > 3 {
            return Err(FormatError::Invalid(format!("case id {case_id}")));
        }
        if n_train > count {
            return Err(FormatError::Invalid(format!("n_train {n_train} > count {count}")));
        }

        let mut cols: Vec<(String, Column)> = Vec::new();
        let arrays = r.u32()?;
        for _ in 0..arrays {
            let len = r.u16()?;
            let name = std::str::from_utf8(r.take(len as u64)?)
                .map_err(|_| FormatError::Invalid("array name is not UTF-8".into()))?
                .to_string();
            let dtype = r.u8()?;
            let rows = r.u64()?;
            let width = r.u64()?;
            if rows != count {
                return Err(FormatError::Invalid(format!("array {name}: {rows} rows, expected {count}")));
            }
            let len = rows.checked_mul(width).ok_or(FormatError::TooLarge(rows))?;
            let data = match dtype {
                F64 => Column::F(r.f64s(len)?),
                U64 => Column::U(r.u64s(len)?),
                other => return Err(FormatError::Invalid(format!("array {name}: dtype {other}"))),
            };
            let expected = if name == "T" || name == "seeds" { 1 } else { n as u64 };
            if width != expected {
                return Err(FormatError::Invalid(format!("array {name}: width {width}, expected {expected}")));
            }
            if cols.iter().any(|(c, _)| *c == name) {
                return Err(FormatError::Invalid(format!("duplicate array {name}")));
            }
            cols.push((name, data));
        }
        r.finish()?;

        let mut get_f = |key: &str| -> Result<Vec<f64>, FormatError> {
            let i = cols.iter().position(|(c, _)| c == key).ok_or_else(|| FormatError::MissingArray(key.into()))?;
            match cols.swap_remove(i).1 {
                Column::F(v) => Ok(v),
                Column::U(_) => Err(FormatError::Invalid(format!("array {key} must be f64"))),
            }
        };
        let phases_r = get_f("phases_R")?;
        let phases_s = get_f("phases_S")?;
        let theta_s = get_f("theta_S")?;
        let amps_r = get_f("amps_R")?;
        let amps_s = get_f("amps_S")?;
        let t = get_f("T")?;
        let seeds = match cols.iter().position(|(c, _)| c == "seeds").map(|i| cols.swap_remove(i).1) {
            Some(Column::U(v)) => v,
            Some(Column::F(_)) => return Err(FormatError::Invalid("array seeds must be u64".into())),
            None => return Err(FormatError::MissingArray("seeds".into())),
        };

        let row = |v: &[f64], i: usize| v[i * n..(i + 1) * n].to_vec();
        let records = (0..count as usize)
            .map(|i| PulsePairRecord {
                phases_r: row(&phases_r, i),
                phases_s: row(&phases_s, i),
                theta_s: row(&theta_s, i),
                amps_r: row(&amps_r, i),
                amps_s: row(&amps_s, i),
                t: t[i],
                case_id,
                seed: seeds[i],
            })
            .collect();
        Ok(Self {
            config_hash,
            config_json,
            dataset: Dataset { n_modes: n, case_id, n_train: n_train as usize, records },
        })
    }
}
