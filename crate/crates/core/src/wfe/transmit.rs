use serde::{Deserialize, Serialize};

use super::WfeError;
use crate::grid::WavefrontField;
use crate::optics::{calibrate_zernike_rms, zernike_phase, ZernikeKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WfeEntry {
    pub kind: ZernikeKind,
    /// RMS error in waves.
    pub rms_waves: f64,
}

impl WfeEntry {
    pub const fn new(kind: ZernikeKind, rms_waves: f64) -> Self {
        Self { kind, rms_waves }
    }
}

/// Static aberrations picked up by each pulse type before launch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmitterConfig {
    pub signal_wfes: Vec<WfeEntry>,
    pub reference_wfes: Vec<WfeEntry>,
    /// Uniform phase offset of the reference branch, rad.
    pub reference_phase_shift: f64,
    /// Radius mapped to the unit disk of the Zernike terms, m. `None` inscribes
    /// the disk in the transmitter grid.
    #[serde(default)]
    pub aperture_radius: Option<f64>,
}

impl Default for TransmitterConfig {
    fn default() -> Self {
        use ZernikeKind::*;
        Self {
            signal_wfes: vec![
                WfeEntry::new(Astigmatism0, 0.081),
                WfeEntry::new(Spherical, 0.100),
                WfeEntry::new(Defocus, 0.078),
                WfeEntry::new(XComa, 0.091),
                WfeEntry::new(YTilt, 0.096),
            ],
            reference_wfes: vec![WfeEntry::new(YComa, 0.106), WfeEntry::new(Astigmatism45, 0.098)],
            reference_phase_shift: 0.869,
            aperture_radius: None,
        }
    }
}

impl TransmitterConfig {
    /// Perfect hardware.
    pub fn none() -> Self {
        Self {
            signal_wfes: Vec::new(),
            reference_wfes: Vec::new(),
            reference_phase_shift: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), WfeError> {
        let entries = self.signal_wfes.iter().chain(&self.reference_wfes);
        if entries.clone().any(|e| !(e.rms_waves >= 0.0 && e.rms_waves.is_finite())) {
            return Err(WfeError::InvalidConfig("WFE RMS must be finite and >= 0".into()));
        }
        if !self.reference_phase_shift.is_finite() {
            return Err(WfeError::InvalidConfig("reference phase shift must be finite".into()));
        }
        if self.aperture_radius.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return Err(WfeError::InvalidConfig("transmitter aperture radius must be > 0".into()));
        }
        Ok(())
    }

    /// Summed phase map for one branch on the field's grid.
    pub fn phase_map(&self, branch: Branch, field: &WavefrontField) -> Result<Vec<f64>, WfeError> {
        self.validate()?;
        let (entries, shift) = match branch {
            Branch::Signal => (&self.signal_wfes, 0.0),
            Branch::Reference => (&self.reference_wfes, self.reference_phase_shift),
        };
        let radius = self.aperture_radius.unwrap_or_else(|| field.geometry.half_width());
        let mut total = vec![shift; field.data.len()];
        for e in entries {
            if e.rms_waves == 0.0 {
                continue;
            }
            let spec = calibrate_zernike_rms(e.kind, e.rms_waves, radius)?;
            for (t, p) in total.iter_mut().zip(zernike_phase(&spec, field.geometry)?) {
                *t += p;
            }
        }
        Ok(total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Signal,
    Reference,
}

/// Multiplies the transmitter-plane beam by exp(i·ΣΔΦ) of the chosen branch.
pub fn apply_transmit_wfes(
    beam: &WavefrontField,
    branch: Branch,
    cfg: &TransmitterConfig,
) -> Result<WavefrontField, WfeError> {
    let phase = cfg.phase_map(branch, beam)?;
    let mut out = beam.clone();
    out.apply_phase(&phase);
    Ok(out)
}
