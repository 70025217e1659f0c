use serde::{Deserialize, Serialize};

use super::{ModeSpectrum, OpticsError};
use crate::grid::{WavefrontField, C64};

/// Numerator convention for the overlap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoherenceMode {
    /// |½∬(E_S*·E + E_S·E*)|², sensitive to a global phase between the fields.
    #[default]
    RealPart,
    /// |∬E_S*·E|², global-phase blind.
    Modulus,
}

/// Coherent efficiency over a centered circular aperture.
pub fn coherent_efficiency(
    e_true: &WavefrontField,
    e_recon: &WavefrontField,
    aperture_diameter: f64,
) -> Result<f64, OpticsError> {
    coherent_efficiency_with(e_true, e_recon, aperture_diameter, CoherenceMode::RealPart)
}

pub fn coherent_efficiency_with(
    e_true: &WavefrontField,
    e_recon: &WavefrontField,
    aperture_diameter: f64,
    mode: CoherenceMode,
) -> Result<f64, OpticsError> {
    e_true.check_same_grid(e_recon)?;
    let mask = e_true.geometry.disk_mask(0.5 * aperture_diameter);
    let mut overlap = C64::new(0.0, 0.0);
    let (mut p_true, mut p_recon) = (0.0, 0.0);
    for ((a, b), m) in e_true.data.iter().zip(&e_recon.data).zip(&mask) {
        if *m {
            overlap += a.conj() * b;
            p_true += a.norm_sqr();
            p_recon += b.norm_sqr();
        }
    }
    if p_true <= 0.0 || p_recon <= 0.0 {
        return Err(OpticsError::DegenerateInput("no power inside the aperture"));
    }
    let num = match mode {
        CoherenceMode::RealPart => overlap.re * overlap.re,
        CoherenceMode::Modulus => overlap.norm_sqr(),
    };
    Ok((num / (p_true * p_recon)).min(1.0))
}

/// Rotates the spectrum so its HG00 coefficient is real and non-negative.
/// Returns the applied rotation (radians); zero when HG00 is absent or null.
pub fn anchor_spectrum(spectrum: &mut ModeSpectrum) -> f64 {
    let Some(k) = spectrum.basis.position(0, 0) else {
        return 0.0;
    };
    let c = spectrum.coeffs[k];
    if c.norm() == 0.0 {
        return 0.0;
    }
    let rot = -c.arg();
    let r = C64::from_polar(1.0, rot);
    for v in &mut spectrum.coeffs {
        *v *= r;
    }
    rot
}
