//! Hermite-Gaussian mode analysis, Zernike aberrations and coherent
//! efficiency.

mod coherence;
mod hermite;
mod modes;
mod zernike;

pub use coherence::{anchor_spectrum, coherent_efficiency, coherent_efficiency_with, CoherenceMode};
pub use hermite::{hermite_poly, MAX_HERMITE_ORDER};
pub use modes::{
    decompose, hg_mode_field, mode_order, reconstruct, HgBasisSpec, ModeSpectrum, SampledBasis,
};
pub use zernike::{
    calibrate_zernike_rms, zernike_phase, zernike_value, ZernikeKind, ZernikeSpec,
};

use thiserror::Error;

use crate::grid::GridError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("Hermite order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },
    #[error("mode HG{m}{n} loses {lost:.3e} of its power outside the grid")]
    Truncation { m: usize, n: usize, lost: f64 },
    #[error("grid extent {extent:.4} m is smaller than 4 w(z) = {required:.4} m")]
    GridTooSmall { extent: f64, required: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("invalid Zernike indices p={p}, q={q}")]
    InvalidZernike { p: i32, q: i32 },
    #[error("unknown Zernike error type '{0}'")]
    UnknownZernike(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("wavelength mismatch: field {field} m, basis {basis} m")]
    WavelengthMismatch { field: f64, basis: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}
