//! Sampled complex fields on square grids and the 2-D FFT used by the
//! propagator and screen generator.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid size {0} must be a power of two and at least 16")]
    BadSize(usize),
    #[error("grid pitch must be positive and finite, got {0}")]
    BadPitch(f64),
    #[error("wavelength must be positive and finite, got {0}")]
    BadWavelength(f64),
    #[error("grid geometry mismatch: {0:?} vs {1:?}")]
    Mismatch(GridGeometry, GridGeometry),
}

/// Uniform square sampling. Sample `i` sits at `(i - n/2) * pitch`, so the
/// optical axis falls exactly on index `n/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub n: usize,
    pub pitch: f64,
}

impl GridGeometry {
    pub fn new(n: usize, pitch: f64) -> Result<Self, GridError> {
        if n < 16 || !n.is_power_of_two() {
            return Err(GridError::BadSize(n));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(GridError::BadPitch(pitch));
        }
        Ok(Self { n, pitch })
    }

    /// Grid of `n` samples whose half-width is `half_width`.
    pub fn spanning(n: usize, half_width: f64) -> Result<Self, GridError> {
        Self::new(n, 2.0 * half_width / n as f64)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.pitch
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Distance from the axis to the nearest grid edge.
    pub fn half_width(&self) -> f64 {
        (self.n / 2) as f64 * self.pitch
    }

    pub fn cell_area(&self) -> f64 {
        self.pitch * self.pitch
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Spatial frequencies (cycles per meter) in FFT storage order.
    pub fn fft_freqs(&self) -> Vec<f64> {
        let n = self.n as isize;
        let df = 1.0 / (self.n as f64 * self.pitch);
        (0..n)
            .map(|k| if k < n / 2 { k as f64 * df } else { (k - n) as f64 * df })
            .collect()
    }

    /// Circular mask of the given radius, row-major.
    pub fn disk_mask(&self, radius: f64) -> Vec<bool> {
        let c = self.coords();
        let r2 = radius * radius;
        let mut out = Vec::with_capacity(self.len());
        for y in &c {
            for x in &c {
                out.push(x * x + y * y <= r2);
            }
        }
        out
    }
}

/// Complex scalar field sampled on a [`GridGeometry`].
#[derive(Clone, PartialEq)]
pub struct WavefrontField {
    pub geometry: GridGeometry,
    pub wavelength: f64,
    pub z: f64,
    pub data: Vec<C64>,
}

impl fmt::Debug for WavefrontField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WavefrontField")
            .field("geometry", &self.geometry)
            .field("wavelength", &self.wavelength)
            .field("z", &self.z)
            .field("power", &self.power())
            .finish()
    }
}

impl WavefrontField {
    pub fn zeros(geometry: GridGeometry, wavelength: f64, z: f64) -> Result<Self, GridError> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(GridError::BadWavelength(wavelength));
        }
        Ok(Self { geometry, wavelength, z, data: vec![C64::new(0.0, 0.0); geometry.len()] })
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(
        geometry: GridGeometry,
        wavelength: f64,
        z: f64,
        mut f: impl FnMut(f64, f64) -> C64,
    ) -> Result<Self, GridError> {
        let mut field = Self::zeros(geometry, wavelength, z)?;
        let c = geometry.coords();
        for (iy, y) in c.iter().enumerate() {
            for (ix, x) in c.iter().enumerate() {
                field.data[iy * geometry.n + ix] = f(*x, *y);
            }
        }
        Ok(field)
    }

    /// Discrete ∬|E|² dx dy.
    pub fn power(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.geometry.cell_area()
    }

    /// Power inside a centered disk.
    pub fn power_within(&self, radius: f64) -> f64 {
        let mask = self.geometry.disk_mask(radius);
        self.data
            .iter()
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v.norm_sqr())
            .sum::<f64>()
            * self.geometry.cell_area()
    }

    /// Copy with everything outside the centered disk set to zero.
    pub fn masked(&self, radius: f64) -> Self {
        let mask = self.geometry.disk_mask(radius);
        let mut out = self.clone();
        for (v, m) in out.data.iter_mut().zip(&mask) {
            if !*m {
                *v = C64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Discrete ⟨self, other⟩ = ∬ conj(self)·other dx dy.
    pub fn inner(&self, other: &Self) -> Result<C64, GridError> {
        self.check_same_grid(other)?;
        let s: C64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.geometry.cell_area())
    }

    pub fn scale(&mut self, k: C64) {
        for v in &mut self.data {
            *v *= k;
        }
    }

    /// Multiplies by `exp(i·phase)` pointwise.
    pub fn apply_phase(&mut self, phase: &[f64]) {
        debug_assert_eq!(phase.len(), self.data.len());
        for (v, p) in self.data.iter_mut().zip(phase) {
            *v *= C64::from_polar(1.0, *p);
        }
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<(), GridError> {
        let (a, b) = (self.geometry, other.geometry);
        if a.n != b.n || (a.pitch - b.pitch).abs() > 1e-12 * a.pitch {
            return Err(GridError::Mismatch(a, b));
        }
        Ok(())
    }

    /// Relative L2 distance ‖self − other‖ / ‖other‖.
    pub fn relative_l2(&self, other: &Self) -> f64 {
        let num: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = other.data.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }
}

/// Wraps a phase into (−π, π].
#[inline]
pub fn wrap_phase(p: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = p - two_pi * ((p + PI) / two_pi).floor();
    // floor puts exactly −π (and rounding leftovers) on the open side
    if w <= -PI {
        w += two_pi;
    }
    if w > PI {
        w -= two_pi;
    }
    w
}

/// Square 2-D FFT with reusable plans and scratch.
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, kernel exp(−2πi·f·x).
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the 1/n² normalization.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inverse);
        let s = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn run(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.n * self.n);
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, self.n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, self.n);
    }
}

fn transpose_square(data: &mut [C64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
