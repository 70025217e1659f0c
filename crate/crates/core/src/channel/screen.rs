use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ChannelError;
use crate::grid::{Fft2, GridGeometry, C64};

const SUBHARMONIC_LEVELS: i32 = 3;

/// Modified von Kármán parameters of one screen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenParams {
    pub r0: f64,
    pub outer_scale: f64,
    /// Zero disables the inner-scale rolloff.
    pub inner_scale: f64,
}

impl ScreenParams {
    fn validate(&self) -> Result<(), ChannelError> {
        if !(self.r0 > 0.0) {
            return Err(ChannelError::InvalidScreen(format!("r0 = {}", self.r0)));
        }
        if !(self.outer_scale > 0.0) || !(self.inner_scale >= 0.0) || self.inner_scale.is_infinite() {
            return Err(ChannelError::InvalidScreen(format!(
                "L0 = {}, l0 = {}",
                self.outer_scale, self.inner_scale
            )));
        }
        Ok(())
    }

    /// Phase power spectral density at radial frequency `f` (cycles/m).
    pub fn psd(&self, f: f64) -> f64 {
        if self.r0.is_infinite() {
            return 0.0;
        }
        let f0 = 1.0 / self.outer_scale;
        let rolloff = if self.inner_scale > 0.0 {
            let fm = 5.92 / (2.0 * PI * self.inner_scale);
            (-(f / fm).powi(2)).exp()
        } else {
            1.0
        };
        0.023 * self.r0.powf(-5.0 / 3.0) * rolloff / (f * f + f0 * f0).powf(11.0 / 6.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScreenDiagnostic {
    /// Pitch coarser than r0/2; small-scale phase is under-resolved.
    Undersampled { pitch: f64, r0: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseScreen {
    pub geometry: GridGeometry,
    /// Radians, row-major.
    pub phase: Vec<f64>,
    pub diagnostics: Vec<ScreenDiagnostic>,
}

impl PhaseScreen {
    pub fn variance(&self) -> f64 {
        let n = self.phase.len() as f64;
        let mean = self.phase.iter().sum::<f64>() / n;
        self.phase.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n
    }
}

/// FFT screen generator with subharmonic low-frequency compensation.
pub struct ScreenSynth {
    n: usize,
    fft: Fft2,
}

impl ScreenSynth {
    pub fn new(n: usize) -> Self {
        Self { n, fft: Fft2::new(n) }
    }

    pub fn generate<R: Rng + ?Sized>(
        &self,
        params: &ScreenParams,
        pitch: f64,
        rng: &mut R,
    ) -> Result<PhaseScreen, ChannelError> {
        params.validate()?;
        let geometry = GridGeometry::new(self.n, pitch)?;
        let n = self.n;
        let df = 1.0 / (n as f64 * pitch);
        let freqs = geometry.fft_freqs();

        let mut spec = vec![C64::new(0.0, 0.0); n * n];
        for (iy, fy) in freqs.iter().enumerate() {
            for (ix, fx) in freqs.iter().enumerate() {
                let z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                let amp = if ix == 0 && iy == 0 { 0.0 } else { params.psd(fx.hypot(*fy)).sqrt() * df };
                spec[iy * n + ix] = z * amp;
            }
        }
        self.fft.inverse(&mut spec);
        let scale = (n * n) as f64;
        let mut phase: Vec<f64> = spec.iter().map(|v| v.re * scale).collect();

        let coords = geometry.coords();
        for level in 1..=SUBHARMONIC_LEVELS {
            let dfp = df / 3f64.powi(level);
            for jy in -1i32..=1 {
                for jx in -1i32..=1 {
                    let z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    if jx == 0 && jy == 0 {
                        continue;
                    }
                    let (fx, fy) = (f64::from(jx) * dfp, f64::from(jy) * dfp);
                    let c = z * params.psd(fx.hypot(fy)).sqrt() * dfp;
                    if c.norm() == 0.0 {
                        continue;
                    }
                    let ex: Vec<C64> = coords.iter().map(|x| C64::from_polar(1.0, 2.0 * PI * fx * x)).collect();
                    let ey: Vec<C64> = coords.iter().map(|y| C64::from_polar(1.0, 2.0 * PI * fy * y)).collect();
                    for (iy, eyv) in ey.iter().enumerate() {
                        let row = c * eyv;
                        for (ix, exv) in ex.iter().enumerate() {
                            phase[iy * n + ix] += (row * exv).re;
                        }
                    }
                }
            }
        }

        let mean = phase.iter().sum::<f64>() / phase.len() as f64;
        for p in &mut phase {
            *p -= mean;
        }
        let mut diagnostics = Vec::new();
        if pitch > 0.5 * params.r0 {
            diagnostics.push(ScreenDiagnostic::Undersampled { pitch, r0: params.r0 });
        }
        Ok(PhaseScreen { geometry, phase, diagnostics })
    }
}

/// One screen drawn from a fresh generator seeded with `seed`.
pub fn synthesize_screen(
    params: &ScreenParams,
    geometry: GridGeometry,
    seed: u64,
) -> Result<PhaseScreen, ChannelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScreenSynth::new(geometry.n).generate(params, geometry.pitch, &mut rng)
}
