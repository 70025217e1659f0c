use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::hermite::{hermite_table, MAX_HERMITE_ORDER};
use super::OpticsError;
use crate::grid::{wrap_phase, GridGeometry, WavefrontField, C64};

/// First `count` (m, n) pairs ordered by total order m+n, then by m.
pub fn mode_order(count: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(count);
    let mut order = 0;
    while out.len() < count {
        for m in 0..=order {
            if out.len() == count {
                break;
            }
            out.push((m, order - m));
        }
        order += 1;
    }
    out
}

/// Non-astigmatic Hermite-Gaussian basis: waist, waist position, wavelength
/// and the ordered list of retained modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HgBasisSpec {
    pub w0: f64,
    pub z0: f64,
    pub wavelength: f64,
    pub modes: Vec<(usize, usize)>,
}

impl HgBasisSpec {
    pub fn new(w0: f64, z0: f64, wavelength: f64, count: usize) -> Result<Self, OpticsError> {
        Self::with_modes(w0, z0, wavelength, mode_order(count))
    }

    pub fn with_modes(
        w0: f64,
        z0: f64,
        wavelength: f64,
        modes: Vec<(usize, usize)>,
    ) -> Result<Self, OpticsError> {
        if !(w0 > 0.0 && w0.is_finite()) {
            return Err(OpticsError::InvalidParameter(format!("beam waist {w0}")));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(OpticsError::InvalidParameter(format!("wavelength {wavelength}")));
        }
        if modes.is_empty() {
            return Err(OpticsError::InvalidParameter("empty mode list".into()));
        }
        if let Some(&(m, n)) = modes.iter().find(|(m, n)| *m.max(n) > MAX_HERMITE_ORDER) {
            return Err(OpticsError::UnsupportedOrder { order: m.max(n), max: MAX_HERMITE_ORDER });
        }
        Ok(Self { w0, z0, wavelength, modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn rayleigh_range(&self) -> f64 {
        PI * self.w0 * self.w0 / self.wavelength
    }

    pub fn beam_radius(&self, z: f64) -> f64 {
        let d = (z - self.z0) / self.rayleigh_range();
        self.w0 * (1.0 + d * d).sqrt()
    }

    /// Wavefront curvature 1/R(z); exactly zero at the waist.
    pub fn inverse_curvature(&self, z: f64) -> f64 {
        let d = z - self.z0;
        let zr = self.rayleigh_range();
        d / (d * d + zr * zr)
    }

    pub fn gouy_phase(&self, z: f64) -> f64 {
        ((z - self.z0) / self.rayleigh_range()).atan()
    }

    pub fn position(&self, m: usize, n: usize) -> Option<usize> {
        self.modes.iter().position(|&p| p == (m, n))
    }

    fn max_index(&self) -> usize {
        self.modes.iter().map(|(m, n)| *m.max(n)).max().unwrap_or(0)
    }

    /// Normalization and longitudinal phase factor of HG_mn at `z`.
    fn mode_scale(&self, m: usize, n: usize, z: f64) -> C64 {
        let w = self.beam_radius(z);
        let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
        let norm = 1.0
            / ((2f64.powi(m as i32 + n as i32 - 1) * PI * fact(n) * fact(m)).sqrt() * w);
        let phase = -(self.wavenumber() * (z - self.z0)
            - (n + m + 1) as f64 * self.gouy_phase(z));
        C64::from_polar(norm, phase)
    }

    /// Transverse factor H_j(√2x/w)·exp(−x²/w² − ikx²/2R) for j = 0..=max.
    fn axis_factors(&self, coords: &[f64], z: f64, max: usize) -> Vec<Vec<C64>> {
        let w = self.beam_radius(z);
        let k_over_2r = 0.5 * self.wavenumber() * self.inverse_curvature(z);
        let mut out = vec![Vec::with_capacity(coords.len()); max + 1];
        let mut h = Vec::with_capacity(max + 1);
        for &x in coords {
            hermite_table(max, 2f64.sqrt() * x / w, &mut h);
            let env = C64::from_polar((-x * x / (w * w)).exp(), -k_over_2r * x * x);
            for (j, col) in out.iter_mut().enumerate() {
                col.push(env * h[j]);
            }
        }
        out
    }

    /// Direct evaluation of HG_mn(x, y, z).
    pub fn mode_value(&self, m: usize, n: usize, x: f64, y: f64, z: f64) -> C64 {
        let w = self.beam_radius(z);
        let rho2 = x * x + y * y;
        let k = self.wavenumber();
        let env = C64::from_polar(
            (-rho2 / (w * w)).exp(),
            -0.5 * k * rho2 * self.inverse_curvature(z),
        );
        let hx = super::hermite::hermite_unchecked(m, 2f64.sqrt() * x / w);
        let hy = super::hermite::hermite_unchecked(n, 2f64.sqrt() * y / w);
        self.mode_scale(m, n, z) * env * hx * hy
    }
}

/// Samples HG_mn on `geometry` at axial position `z`.
pub fn hg_mode_field(
    basis: &HgBasisSpec,
    m: usize,
    n: usize,
    geometry: GridGeometry,
    z: f64,
) -> Result<WavefrontField, OpticsError> {
    if m.max(n) > MAX_HERMITE_ORDER {
        return Err(OpticsError::UnsupportedOrder { order: m.max(n), max: MAX_HERMITE_ORDER });
    }
    let coords = geometry.coords();
    let axes = basis.axis_factors(&coords, z, m.max(n));
    let scale = basis.mode_scale(m, n, z);
    let mut field = WavefrontField::zeros(geometry, basis.wavelength, z)?;
    for (iy, ay) in axes[n].iter().enumerate() {
        let row = &mut field.data[iy * geometry.n..(iy + 1) * geometry.n];
        for (v, ax) in row.iter_mut().zip(&axes[m]) {
            *v = scale * ax * ay;
        }
    }
    let captured = field.power();
    if captured < 0.99 {
        return Err(OpticsError::Truncation { m, n, lost: 1.0 - captured });
    }
    Ok(field)
}

/// Complex HG coefficients c_mn = a_mn·exp(iΔφ_mn), ordered as `basis.modes`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpectrum {
    pub basis: HgBasisSpec,
    pub coeffs: Vec<C64>,
}

impl ModeSpectrum {
    pub fn new(basis: HgBasisSpec, coeffs: Vec<C64>) -> Result<Self, OpticsError> {
        if coeffs.len() != basis.len() {
            return Err(OpticsError::InvalidParameter(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn from_polar(
        basis: HgBasisSpec,
        amplitudes: &[f64],
        phases: &[f64],
    ) -> Result<Self, OpticsError> {
        if amplitudes.len() != phases.len() {
            return Err(OpticsError::InvalidParameter("amplitude/phase length mismatch".into()));
        }
        let coeffs = amplitudes.iter().zip(phases).map(|(a, p)| C64::from_polar(*a, *p)).collect();
        Self::new(basis, coeffs)
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }

    /// Mode phases wrapped to (−π, π].
    pub fn phases(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| wrap_phase(c.arg())).collect()
    }

    pub fn power(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// A basis sampled on a particular grid and plane. Every mode factorizes as
/// s_mn·a_m(x)·a_n(y), so projections cost O(max_order·n²).
#[derive(Clone, Debug)]
pub struct SampledBasis {
    spec: HgBasisSpec,
    geometry: GridGeometry,
    z: f64,
    axes: Vec<Vec<C64>>,
    scales: Vec<C64>,
    norms: Vec<f64>,
}

impl SampledBasis {
    pub fn new(spec: &HgBasisSpec, geometry: GridGeometry, z: f64) -> Result<Self, OpticsError> {
        let extent = geometry.n as f64 * geometry.pitch;
        let required = 4.0 * spec.beam_radius(z);
        if extent < required {
            return Err(OpticsError::GridTooSmall { extent, required });
        }
        let coords = geometry.coords();
        let axes = spec.axis_factors(&coords, z, spec.max_index());
        let axis_energy: Vec<f64> =
            axes.iter().map(|a| a.iter().map(|v| v.norm_sqr()).sum()).collect();
        let mut scales = Vec::with_capacity(spec.len());
        let mut norms = Vec::with_capacity(spec.len());
        for &(m, n) in &spec.modes {
            let s = spec.mode_scale(m, n, z);
            scales.push(s);
            norms.push(s.norm_sqr() * axis_energy[m] * axis_energy[n] * geometry.cell_area());
        }
        Ok(Self { spec: spec.clone(), geometry, z, axes, scales, norms })
    }

    pub fn spec(&self) -> &HgBasisSpec {
        &self.spec
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Discrete ∬|HG_mn|² per mode.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// c_mn = ∬E·HG*_mn / ∬|HG_mn|² by Riemann sums at grid pitch.
    pub fn decompose(&self, field: &WavefrontField) -> Result<ModeSpectrum, OpticsError> {
        self.check_field(field)?;
        if field.power() <= 0.0 {
            return Err(OpticsError::DegenerateInput("field carries no power"));
        }
        let n = self.geometry.n;
        let rows = self.row_projections(field);
        let coeffs = self
            .spec
            .modes
            .iter()
            .enumerate()
            .map(|(k, &(m, nn))| {
                let s: C64 = rows[m].iter().zip(&self.axes[nn]).map(|(p, a)| a.conj() * p).sum();
                debug_assert_eq!(rows[m].len(), n);
                self.scales[k].conj() * s * self.geometry.cell_area() / self.norms[k]
            })
            .collect();
        ModeSpectrum::new(self.spec.clone(), coeffs)
    }

    // P[m][y] = Σ_x conj(a_m(x))·E(x, y)
    fn row_projections(&self, field: &WavefrontField) -> Vec<Vec<C64>> {
        let n = self.geometry.n;
        let mut rows = vec![vec![C64::new(0.0, 0.0); n]; self.axes.len()];
        for (iy, row) in field.data.chunks_exact(n).enumerate() {
            for (m, axis) in self.axes.iter().enumerate() {
                rows[m][iy] = axis.iter().zip(row).map(|(a, e)| a.conj() * e).sum();
            }
        }
        rows
    }

    /// E = Σ c_mn·HG_mn over the retained modes.
    pub fn reconstruct(&self, spectrum: &ModeSpectrum) -> Result<WavefrontField, OpticsError> {
        if spectrum.coeffs.len() != self.spec.len() || spectrum.basis.modes != self.spec.modes {
            return Err(OpticsError::InvalidParameter("spectrum does not match basis".into()));
        }
        let n = self.geometry.n;
        // Q[m][y] = Σ_n c_mn·s_mn·a_n(y)
        let mut q = vec![vec![C64::new(0.0, 0.0); n]; self.axes.len()];
        for (k, &(m, nn)) in self.spec.modes.iter().enumerate() {
            let c = spectrum.coeffs[k] * self.scales[k];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for (dst, a) in q[m].iter_mut().zip(&self.axes[nn]) {
                *dst += c * a;
            }
        }
        let used: Vec<usize> =
            (0..self.axes.len()).filter(|m| q[*m].iter().any(|v| v.norm_sqr() > 0.0)).collect();
        let mut field = WavefrontField::zeros(self.geometry, self.spec.wavelength, self.z)?;
        for (iy, row) in field.data.chunks_exact_mut(n).enumerate() {
            for &m in &used {
                let qm = q[m][iy];
                for (v, a) in row.iter_mut().zip(&self.axes[m]) {
                    *v += qm * a;
                }
            }
        }
        Ok(field)
    }

    fn check_field(&self, field: &WavefrontField) -> Result<(), OpticsError> {
        let rel = (field.wavelength - self.spec.wavelength).abs() / self.spec.wavelength;
        if rel > 1e-12 {
            return Err(OpticsError::WavelengthMismatch {
                field: field.wavelength,
                basis: self.spec.wavelength,
            });
        }
        let g = field.geometry;
        if g.n != self.geometry.n || (g.pitch - self.geometry.pitch).abs() > 1e-12 * g.pitch {
            return Err(crate::grid::GridError::Mismatch(g, self.geometry).into());
        }
        Ok(())
    }
}

/// Projects `field` onto `basis` at the field's own plane.
pub fn decompose(field: &WavefrontField, basis: &HgBasisSpec) -> Result<ModeSpectrum, OpticsError> {
    SampledBasis::new(basis, field.geometry, field.z)?.decompose(field)
}

/// Synthesizes Σ c_mn·HG_mn on `geometry` at plane `z`.
pub fn reconstruct(
    spectrum: &ModeSpectrum,
    geometry: GridGeometry,
    z: f64,
) -> Result<WavefrontField, OpticsError> {
    SampledBasis::new(&spectrum.basis, geometry, z)?.reconstruct(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(count: usize) -> HgBasisSpec {
        HgBasisSpec::new(1.0e-3, 0.0, 1.55e-6, count).unwrap()
    }

    #[test]
    fn ordering_by_total_order_then_m() {
        assert_eq!(mode_order(6), vec![(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]);
        let modes = mode_order(50);
        assert_eq!(modes.len(), 50);
        for w in modes.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(a.0 + a.1 < b.0 + b.1 || (a.0 + a.1 == b.0 + b.1 && a.0 < b.0));
        }
        assert_eq!(*modes.last().unwrap(), (4, 5));
    }

    #[test]
    fn fundamental_on_axis_at_waist() {
        let b = basis(1);
        let g = GridGeometry::spanning(64, 4.0e-3).unwrap();
        let f = hg_mode_field(&b, 0, 0, g, 0.0).unwrap();
        let centre = f.data[32 * 64 + 32];
        let expect = 1.0 / (1.0e-3 * (PI / 2.0).sqrt());
        assert!((centre.re - expect).abs() < 1e-9 * expect);
        assert!(centre.im.abs() < 1e-12 * expect);
    }

    #[test]
    fn normalization_and_orthogonality() {
        let b = basis(10);
        let g = GridGeometry::spanning(128, 4.0e-3).unwrap();
        let f11 = hg_mode_field(&b, 1, 1, g, 0.0).unwrap();
        assert!((f11.power() - 1.0).abs() < 1e-3);
        let f02 = hg_mode_field(&b, 0, 2, g, 0.0).unwrap();
        let f20 = hg_mode_field(&b, 2, 0, g, 0.0).unwrap();
        assert!(f02.inner(&f20).unwrap().norm() < 1e-3);
    }

    #[test]
    fn truncation_detected() {
        let b = basis(1);
        let g = GridGeometry::spanning(64, 0.5e-3).unwrap();
        assert!(matches!(hg_mode_field(&b, 3, 0, g, 0.0), Err(OpticsError::Truncation { .. })));
    }

    #[test]
    fn curvature_vanishes_at_waist_and_matches_direct_formula_elsewhere() {
        let b = basis(6);
        assert_eq!(b.inverse_curvature(0.0), 0.0);
        let z = 2.3 * b.rayleigh_range();
        let g = GridGeometry::spanning(64, 4.0 * b.beam_radius(z)).unwrap();
        let f = hg_mode_field(&b, 2, 1, g, z).unwrap();
        for &(ix, iy) in &[(32, 32), (40, 21), (10, 50)] {
            let direct = b.mode_value(2, 1, g.coord(ix), g.coord(iy), z);
            assert!((f.data[iy * 64 + ix] - direct).norm() < 1e-10 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn simple_superposition_decomposes() {
        let b = basis(10);
        let g = GridGeometry::spanning(128, 5.0e-3).unwrap();
        let mut field = hg_mode_field(&b, 0, 0, g, 0.0).unwrap();
        field.scale(C64::new(0.5, 0.0));
        let mut f01 = hg_mode_field(&b, 0, 1, g, 0.0).unwrap();
        f01.scale(C64::new(0.0, 0.5));
        for (a, v) in field.data.iter_mut().zip(&f01.data) {
            *a += v;
        }
        let s = decompose(&field, &b).unwrap();
        assert!((s.coeffs[0] - C64::new(0.5, 0.0)).norm() < 1e-6);
        assert!((s.coeffs[1] - C64::new(0.0, 0.5)).norm() < 1e-6);
        for c in &s.coeffs[2..] {
            assert!(c.norm() < 1e-6);
        }
        assert!((s.phases()[1] - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_basis_mode_projects_to_zero() {
        let b = basis(10);
        assert!(b.position(2, 3).is_none());
        let g = GridGeometry::spanning(128, 6.0e-3).unwrap();
        let field = hg_mode_field(&b, 2, 3, g, 0.0).unwrap();
        let s = decompose(&field, &b).unwrap();
        assert!(s.coeffs.iter().all(|c| c.norm() < 1e-6));
    }

    #[test]
    fn zero_field_rejected() {
        let b = basis(3);
        let g = GridGeometry::spanning(64, 4.0e-3).unwrap();
        let field = WavefrontField::zeros(g, 1.55e-6, 0.0).unwrap();
        assert_eq!(decompose(&field, &b), Err(OpticsError::DegenerateInput("field carries no power")));
    }

    #[test]
    fn small_grid_rejected() {
        let b = basis(3);
        let g = GridGeometry::spanning(64, 1.0e-3).unwrap();
        let field = WavefrontField::zeros(g, 1.55e-6, 0.0).unwrap();
        assert!(matches!(decompose(&field, &b), Err(OpticsError::GridTooSmall { .. })));
    }

    #[test]
    fn reconstruct_single_fundamental() {
        let b = basis(5);
        let g = GridGeometry::spanning(64, 4.0e-3).unwrap();
        let mut coeffs = vec![C64::new(0.0, 0.0); 5];
        coeffs[0] = C64::new(1.0, 0.0);
        let spec = ModeSpectrum::new(b.clone(), coeffs).unwrap();
        let f = reconstruct(&spec, g, 0.0).unwrap();
        let hg00 = hg_mode_field(&b, 0, 0, g, 0.0).unwrap();
        assert!(f.relative_l2(&hg00) < 1e-12);
    }
}
