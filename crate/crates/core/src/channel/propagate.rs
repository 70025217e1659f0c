use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    partition_slabs, AtmosphereProfile, ChannelError, ScreenDiagnostic, ScreenParams, ScreenSynth,
    SlabPartition,
};
use crate::grid::{Fft2, GridGeometry, WavefrontField, C64};

/// Energy fraction the absorbing boundary may remove before the run is
/// flagged as aliased.
const MAX_LOST_FRACTION: f64 = 0.05;

/// Sampling of the source and receiver planes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPlan {
    pub n: usize,
    /// Half-width of the receiver-plane grid, m.
    pub receiver_half_width: f64,
    /// Source pitch over receiver pitch.
    pub source_ratio: f64,
}

impl GridPlan {
    /// Receiver grid spanning ±4 w(L) for a beam with waist `w0` at the
    /// source, source pitch a quarter of the receiver pitch.
    pub fn for_beam(n: usize, w0: f64, wavelength: f64, length: f64) -> Self {
        let zr = PI * w0 * w0 / wavelength;
        let w = w0 * (1.0 + (length / zr).powi(2)).sqrt();
        Self { n, receiver_half_width: 4.0 * w, source_ratio: 0.25 }
    }

    pub fn receiver_pitch(&self) -> f64 {
        2.0 * self.receiver_half_width / self.n as f64
    }

    pub fn source_pitch(&self) -> f64 {
        self.source_ratio * self.receiver_pitch()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    /// Distance from the source, m.
    pub z: f64,
    pub pitch: f64,
    /// Index of the slab whose screen sits on this plane.
    pub screen: Option<usize>,
}

/// Propagation planes from the source (first) to the receiver (last).
/// Pitch grows linearly with z so the intermediate chirps cancel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub n: usize,
    pub wavelength: f64,
    pub length: f64,
    pub planes: Vec<Plane>,
}

impl ChannelGeometry {
    /// `screens` holds (distance from source, slab index) pairs.
    pub fn new(
        plan: &GridPlan,
        wavelength: f64,
        length: f64,
        screens: &[(f64, usize)],
    ) -> Result<Self, ChannelError> {
        GridGeometry::new(plan.n, plan.receiver_pitch())?;
        if !(plan.source_ratio > 0.0 && plan.source_ratio.is_finite()) {
            return Err(ChannelError::InvalidProfile(format!("source ratio {}", plan.source_ratio)));
        }
        if !(length > 0.0 && length.is_finite() && wavelength > 0.0) {
            return Err(ChannelError::InvalidProfile(format!("path length {length}")));
        }
        let (d1, dn) = (plan.source_pitch(), plan.receiver_pitch());
        let pitch = |z: f64| d1 + (dn - d1) * z / length;

        let mut keys: Vec<(f64, Option<usize>)> = vec![(0.0, None)];
        let mut sorted: Vec<(f64, usize)> =
            screens.iter().copied().filter(|(z, _)| *z > 0.0 && *z < length).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        keys.extend(sorted.into_iter().map(|(z, i)| (z, Some(i))));
        keys.push((length, None));

        let mut planes = vec![Plane { z: 0.0, pitch: d1, screen: None }];
        for w in keys.windows(2) {
            let ((za, _), (zb, screen)) = (w[0], w[1]);
            let gap = zb - za;
            if gap <= 0.0 {
                continue;
            }
            let dmin = pitch(za).min(pitch(zb));
            let max_step = dmin * dmin * plan.n as f64 / wavelength;
            let steps = (gap / max_step).ceil().max(1.0) as usize;
            for s in 1..=steps {
                let z = if s == steps { zb } else { za + gap * s as f64 / steps as f64 };
                planes.push(Plane { z, pitch: pitch(z), screen: if s == steps { screen } else { None } });
            }
        }
        Ok(Self { n: plan.n, wavelength, length, planes })
    }

    pub fn source_geometry(&self) -> GridGeometry {
        GridGeometry { n: self.n, pitch: self.planes[0].pitch }
    }

    pub fn receiver_geometry(&self) -> GridGeometry {
        GridGeometry { n: self.n, pitch: self.planes.last().map_or(0.0, |p| p.pitch) }
    }
}

/// One turbulence draw: the slab layout and a screen per slab.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub seed: u64,
    pub cn2_ground: f64,
    pub partition: SlabPartition,
    pub geometry: ChannelGeometry,
    /// Phase maps in slab order, each sampled at its plane's pitch.
    pub screens: Vec<Vec<f64>>,
    pub diagnostics: Vec<ScreenDiagnostic>,
}

impl ChannelRealization {
    pub fn generate(
        profile: &AtmosphereProfile,
        plan: &GridPlan,
        budget: usize,
        seed: u64,
    ) -> Result<Self, ChannelError> {
        let partition = partition_slabs(profile, budget)?;
        let top = profile.satellite_altitude;
        let sec = profile.sec_zenith();
        let at: Vec<(f64, usize)> = partition
            .slabs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.r0.is_finite())
            .map(|(i, s)| ((top - s.center()) * sec, i))
            .collect();
        let geometry = ChannelGeometry::new(plan, profile.wavelength, profile.path_length(), &at)?;

        let synth = ScreenSynth::new(plan.n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut screens = vec![Vec::new(); partition.len()];
        let mut diagnostics = Vec::new();
        for plane in &geometry.planes {
            let Some(i) = plane.screen else { continue };
            let params = ScreenParams {
                r0: partition.slabs[i].r0,
                outer_scale: profile.outer_scale,
                inner_scale: profile.inner_scale,
            };
            let s = synth.generate(&params, plane.pitch, &mut rng)?;
            diagnostics.extend(s.diagnostics);
            screens[i] = s.phase;
        }
        Ok(Self { seed, cn2_ground: profile.cn2_ground, partition, geometry, screens, diagnostics })
    }

    pub fn screen_count(&self) -> usize {
        self.screens.iter().filter(|s| !s.is_empty()).count()
    }
}

#[derive(Clone, Debug)]
pub struct Propagated {
    pub field: WavefrontField,
    /// Fraction of the input power removed by the absorbing boundary.
    pub lost_fraction: f64,
}

/// Multi-step scaled angular-spectrum propagator.
pub struct Propagator {
    n: usize,
    fft: Fft2,
    boundary: Vec<f64>,
}

impl Propagator {
    pub fn new(n: usize) -> Self {
        let half = (n / 2) as f64;
        let w = 0.47 * n as f64;
        let boundary = (0..n).map(|i| (-((i as f64 - half) / w).powi(16)).exp()).collect();
        Self { n, fft: Fft2::new(n), boundary }
    }

    /// Propagates `input` through the planes of `geometry`, applying
    /// `screens` (slab-indexed) where planes carry one.
    pub fn run(
        &self,
        input: &WavefrontField,
        geometry: &ChannelGeometry,
        screens: Option<&[Vec<f64>]>,
    ) -> Result<Propagated, ChannelError> {
        let src = geometry.source_geometry();
        if input.geometry.n != self.n
            || geometry.n != self.n
            || (input.geometry.pitch - src.pitch).abs() > 1e-9 * src.pitch
            || (input.wavelength - geometry.wavelength).abs() > 1e-12 * geometry.wavelength
        {
            return Err(ChannelError::SourceGrid);
        }
        let n = self.n;
        let k = 2.0 * PI / geometry.wavelength;
        let planes = &geometry.planes;
        let p_in = input.power();
        let mut u = input.data.clone();
        if planes.len() < 2 || p_in == 0.0 {
            let mut field = input.clone();
            field.z = geometry.length;
            return Ok(Propagated { field, lost_fraction: 0.0 });
        }

        let idx: Vec<f64> = (0..n).map(|i| i as f64 - (n / 2) as f64).collect();
        let chirp = |pitch: f64, coef: f64| -> Vec<C64> {
            idx.iter().map(|i| C64::from_polar(1.0, coef * (i * pitch).powi(2))).collect()
        };

        let dz0 = planes[1].z - planes[0].z;
        let m0 = planes[1].pitch / planes[0].pitch;
        let q1 = chirp(planes[0].pitch, -0.5 * k * (1.0 - m0) / dz0);
        apply_separable(&mut u, &q1, n);

        let mut lost = 0.0;
        for w in planes.windows(2) {
            let (a, b) = (w[0], w[1]);
            let dz = b.z - a.z;
            let m = b.pitch / a.pitch;
            let freqs = GridGeometry { n, pitch: a.pitch }.fft_freqs();
            let q2: Vec<C64> = freqs
                .iter()
                .map(|f| C64::from_polar(m.powf(-0.5), PI * geometry.wavelength * dz / m * f * f))
                .collect();
            // the 1/m amplitude factor is split evenly between the two axes
            self.fft.forward(&mut u);
            apply_separable(&mut u, &q2, n);
            self.fft.inverse(&mut u);

            let before: f64 = u.iter().map(|v| v.norm_sqr()).sum();
            for (iy, by) in self.boundary.iter().enumerate() {
                for (ix, bx) in self.boundary.iter().enumerate() {
                    u[iy * n + ix] *= bx * by;
                }
            }
            let after: f64 = u.iter().map(|v| v.norm_sqr()).sum();
            lost += (before - after) * b.pitch * b.pitch / p_in;

            if let (Some(i), Some(s)) = (b.screen, screens) {
                if let Some(phase) = s.get(i).filter(|p| !p.is_empty()) {
                    for (v, p) in u.iter_mut().zip(phase) {
                        *v *= C64::from_polar(1.0, *p);
                    }
                }
            }
        }

        let (a, b) = (planes[planes.len() - 2], planes[planes.len() - 1]);
        let m = b.pitch / a.pitch;
        let q3 = chirp(b.pitch, -0.5 * k * (m - 1.0) / (m * (b.z - a.z)));
        apply_separable(&mut u, &q3, n);

        if lost > MAX_LOST_FRACTION {
            return Err(ChannelError::Aliasing { lost: 100.0 * lost, limit: 100.0 * MAX_LOST_FRACTION });
        }
        let field = WavefrontField {
            geometry: geometry.receiver_geometry(),
            wavelength: geometry.wavelength,
            z: geometry.length,
            data: u,
        };
        Ok(Propagated { field, lost_fraction: lost })
    }
}

fn apply_separable(u: &mut [C64], axis: &[C64], n: usize) {
    for (iy, ay) in axis.iter().enumerate() {
        for (ix, ax) in axis.iter().enumerate() {
            u[iy * n + ix] *= ay * ax;
        }
    }
}

/// Receiver-plane field after the turbulent channel.
pub fn propagate(input: &WavefrontField, realization: &ChannelRealization) -> Result<Propagated, ChannelError> {
    Propagator::new(input.geometry.n).run(input, &realization.geometry, Some(&realization.screens))
}

/// Same planes, no screens.
pub fn propagate_vacuum(input: &WavefrontField, geometry: &ChannelGeometry) -> Result<Propagated, ChannelError> {
    Propagator::new(input.geometry.n).run(input, geometry, None)
}

/// T = η_det · P(receiver aperture) / P(transmitted).
pub fn transmissivity(rx: &WavefrontField, tx: &WavefrontField, receiver_radius: f64, eta_det: f64) -> f64 {
    let p_tx = tx.power();
    if p_tx <= 0.0 {
        return 0.0;
    }
    (eta_det * rx.power_within(receiver_radius) / p_tx).clamp(0.0, 1.0)
}
