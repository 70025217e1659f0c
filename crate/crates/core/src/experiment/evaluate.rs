//! Coherent efficiency of the three signal-field reconstructions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::grid::C64;
use crate::optics::{anchor_spectrum, coherent_efficiency_with, CoherenceMode, ModeSpectrum};
use crate::skr::ChannelMoments;
use crate::wfe::{CrossLeakageConfig, PulsePairRecord, Simulator, WfeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Signal amplitudes and phases, the best an N-mode sorter can give.
    Signal,
    /// Reference amplitudes and phases.
    Reference,
    /// Reference amplitudes with network-estimated signal phases.
    Corrected,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Signal, Variant::Reference, Variant::Corrected];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Signal => "E_S",
            Variant::Reference => "E_R",
            Variant::Corrected => "E_tilde",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.label() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl GammaStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { mean, std: var.sqrt(), count: n }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub variant: Variant,
    pub stats: GammaStats,
}

/// Mean coherent efficiencies plus the channel moments the key rate needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTable {
    pub n_modes: usize,
    pub case_id: u8,
    pub rows: Vec<GammaRow>,
    pub moments: ChannelMoments,
}

impl GammaTable {
    pub fn get(&self, v: Variant) -> Option<GammaStats> {
        self.rows.iter().find(|r| r.variant == v).map(|r| r.stats)
    }

    pub const CSV_HEADER: &'static str = "N,case,variant,gamma_mean,gamma_std,count,mean_T,mean_sqrt_T";

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{:.17e},{:.17e},{},{:.17e},{:.17e}",
                    self.n_modes,
                    self.case_id,
                    r.variant.label(),
                    r.stats.mean,
                    r.stats.std,
                    r.stats.count,
                    self.moments.mean_t,
                    self.moments.mean_sqrt_t
                )
            })
            .collect()
    }

    /// Parses data lines written by [`GammaTable::csv_rows`]; `#` lines and
    /// the header are skipped.
    pub fn parse_csv(text: &str) -> Result<Self, ExperimentError> {
        let bad = |m: String| ExperimentError::Validation(format!("coherence table: {m}"));
        let mut table: Option<GammaTable> = None;
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') || line == Self::CSV_HEADER {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad(format!("expected 8 fields in '{line}'")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("not a number: '{s}'")));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("not an integer: '{s}'")));
            let n = int(f[0])?;
            let case = int(f[1])? as u8;
            let variant = Variant::from_label(f[2]).ok_or_else(|| bad(format!("unknown variant '{}'", f[2])))?;
            let stats = GammaStats { mean: num(f[3])?, std: num(f[4])?, count: int(f[5])? };
            let moments = ChannelMoments { mean_t: num(f[6])?, mean_sqrt_t: num(f[7])? };
            let t = table.get_or_insert_with(|| GammaTable { n_modes: n, case_id: case, rows: vec![], moments });
            if t.n_modes != n || t.case_id != case || t.moments != moments {
                return Err(bad("rows disagree on N, case or channel moments".into()));
            }
            if t.get(variant).is_some() {
                return Err(bad(format!("duplicate variant {}", variant.label())));
            }
            t.rows.push(GammaRow { variant, stats });
        }
        table.ok_or_else(|| bad("no rows".into()))
    }
}

/// γ for each test record and each variant, in [`Variant::ALL`] order.
///
/// `predicted` holds the network's Δφ̃_S per record. The true field is
/// regenerated from the record seed. Every reconstruction is rotated so its
/// HG00 coefficient is real; the true field gets the rotation of the signal
/// spectrum, which is its own projection.
pub fn coherent_efficiencies(
    sim: &Simulator,
    records: &[PulsePairRecord],
    predicted: &[Vec<f64>],
    leakage: &CrossLeakageConfig,
    mode: CoherenceMode,
    anchor: bool,
) -> Result<Vec<[f64; 3]>, ExperimentError> {
    if records.len() != predicted.len() {
        return Err(ExperimentError::Validation(format!(
            "{} records but {} predictions",
            records.len(),
            predicted.len()
        )));
    }
    let n = sim.n_modes();
    if let Some(bad) = records.iter().zip(predicted).find(|(r, p)| r.phases_r.len() != n || p.len() != n) {
        return Err(ExperimentError::Validation(format!(
            "record widths {}/{} do not match N = {n}",
            bad.0.phases_r.len(),
            bad.1.len()
        )));
    }
    let diameter = 2.0 * sim.channel().receiver_radius;
    let refs = sim.reference_phases();
    records
        .par_iter()
        .zip(predicted)
        .map_init(
            || sim.new_propagator(),
            |prop, (rec, pred)| -> Result<[f64; 3], WfeError> {
                let f = sim.signal_fields(prop, rec.seed, rec.case_id, leakage)?;
                let mut truth = f.true_field;
                let mut signal = f.signal;
                let mut reference = f.reference;
                let phases: Vec<f64> = pred.iter().zip(refs).map(|(p, r)| p + r).collect();
                let mut corrected = ModeSpectrum::from_polar(reference.basis.clone(), &reference.amplitudes(), &phases)?;
                if anchor {
                    let rot = anchor_spectrum(&mut signal);
                    truth.scale(C64::from_polar(1.0, rot));
                    anchor_spectrum(&mut reference);
                    anchor_spectrum(&mut corrected);
                }
                let mut out = [0.0; 3];
                for (slot, spec) in out.iter_mut().zip([&signal, &reference, &corrected]) {
                    let recon = sim.basis().reconstruct(spec)?;
                    *slot = coherent_efficiency_with(&truth, &recon, diameter, mode)?;
                }
                Ok(out)
            },
        )
        .collect::<Result<Vec<_>, _>>()
        .map_err(ExperimentError::from)
}
