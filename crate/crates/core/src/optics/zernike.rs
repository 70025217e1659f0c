use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::OpticsError;
use crate::grid::GridGeometry;

/// Transmitter hardware aberrations used by the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZernikeKind {
    YTilt,
    Defocus,
    Astigmatism0,
    Astigmatism45,
    XComa,
    YComa,
    Spherical,
}

impl ZernikeKind {
    pub const ALL: [ZernikeKind; 7] = [
        ZernikeKind::YTilt,
        ZernikeKind::Defocus,
        ZernikeKind::Astigmatism0,
        ZernikeKind::Astigmatism45,
        ZernikeKind::XComa,
        ZernikeKind::YComa,
        ZernikeKind::Spherical,
    ];

    /// Azimuthal and radial indices (p, q).
    pub fn indices(self) -> (i32, i32) {
        match self {
            ZernikeKind::YTilt => (-1, 1),
            ZernikeKind::Defocus => (0, 2),
            ZernikeKind::Astigmatism0 => (2, 2),
            ZernikeKind::Astigmatism45 => (-2, 2),
            ZernikeKind::XComa => (1, 3),
            ZernikeKind::YComa => (-1, 3),
            ZernikeKind::Spherical => (0, 4),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ZernikeKind::YTilt => "y-tilt",
            ZernikeKind::Defocus => "defocus",
            ZernikeKind::Astigmatism0 => "astigmatism0",
            ZernikeKind::Astigmatism45 => "astigmatism45",
            ZernikeKind::XComa => "x-coma",
            ZernikeKind::YComa => "y-coma",
            ZernikeKind::Spherical => "spherical",
        }
    }
}

impl fmt::Display for ZernikeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ZernikeKind {
    type Err = OpticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ZernikeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| OpticsError::UnknownZernike(s.to_string()))
    }
}

/// One Zernike term a·Z^p_q over a circular aperture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZernikeSpec {
    pub p: i32,
    pub q: i32,
    /// Radians of phase.
    pub coefficient: f64,
    /// Physical radius mapped to ρ = 1, meters.
    pub aperture_radius: f64,
}

impl ZernikeSpec {
    pub fn new(p: i32, q: i32, coefficient: f64, aperture_radius: f64) -> Result<Self, OpticsError> {
        validate_indices(p, q)?;
        if !(aperture_radius > 0.0 && aperture_radius.is_finite()) {
            return Err(OpticsError::InvalidParameter(format!(
                "aperture radius {aperture_radius}"
            )));
        }
        Ok(Self { p, q, coefficient, aperture_radius })
    }
}

fn validate_indices(p: i32, q: i32) -> Result<(), OpticsError> {
    let ap = p.abs();
    if q < 0 || ap > q || (q - ap) % 2 != 0 {
        return Err(OpticsError::InvalidZernike { p, q });
    }
    Ok(())
}

fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn radial(p: i32, q: i32, rho: f64) -> f64 {
    let p = p.abs();
    (0..=(q - p) / 2)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(q - j)
                / (factorial(j) * factorial((q + p) / 2 - j) * factorial((q - p) / 2 - j))
                * rho.powi(q - 2 * j)
        })
        .sum()
}

/// Z^p_q(ρ, β) with unit coefficient; cos for p ≥ 0, sin otherwise.
pub fn zernike_value(p: i32, q: i32, rho: f64, beta: f64) -> Result<f64, OpticsError> {
    validate_indices(p, q)?;
    let r = radial(p, q, rho);
    Ok(if p >= 0 { r * (f64::from(p) * beta).cos() } else { r * (f64::from(-p) * beta).sin() })
}

/// Phase map a·Z^p_q on the grid, zero outside the aperture.
pub fn zernike_phase(spec: &ZernikeSpec, geometry: GridGeometry) -> Result<Vec<f64>, OpticsError> {
    validate_indices(spec.p, spec.q)?;
    let c = geometry.coords();
    let mut out = Vec::with_capacity(geometry.len());
    for y in &c {
        for x in &c {
            let rho = (x * x + y * y).sqrt() / spec.aperture_radius;
            if rho <= 1.0 {
                let beta = y.atan2(*x);
                let r = radial(spec.p, spec.q, rho);
                let ang = if spec.p >= 0 {
                    (f64::from(spec.p) * beta).cos()
                } else {
                    (f64::from(-spec.p) * beta).sin()
                };
                out.push(spec.coefficient * r * ang);
            } else {
                out.push(0.0);
            }
        }
    }
    Ok(out)
}

/// RMS of Z^p_q over the unit disk (no piston removed).
fn unit_rms(p: i32, q: i32) -> f64 {
    let q1 = f64::from(q) + 1.0;
    if p == 0 {
        (1.0 / q1).sqrt()
    } else {
        (1.0 / (2.0 * q1)).sqrt()
    }
}

/// Coefficient that gives a map RMS of `rms_waves` waves (×2π radians).
pub fn calibrate_zernike_rms(
    kind: ZernikeKind,
    rms_waves: f64,
    aperture_radius: f64,
) -> Result<ZernikeSpec, OpticsError> {
    if !(rms_waves >= 0.0 && rms_waves.is_finite()) {
        return Err(OpticsError::InvalidParameter(format!("RMS {rms_waves} waves")));
    }
    let (p, q) = kind.indices();
    let target = rms_waves * 2.0 * std::f64::consts::PI;
    ZernikeSpec::new(p, q, target / unit_rms(p, q), aperture_radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn table_polynomials() {
        assert!((zernike_value(0, 2, 1.0, 0.3).unwrap() - 1.0).abs() < 1e-15);
        assert!((zernike_value(0, 4, 0.0, 1.1).unwrap() - 1.0).abs() < 1e-15);
        assert!((2.0 * zernike_value(-1, 1, 0.5, PI / 2.0).unwrap() - 1.0).abs() < 1e-15);
        let (r, b): (f64, f64) = (0.7, 0.4);
        let cases = [
            (ZernikeKind::Astigmatism0, r * r * (2.0 * b).cos()),
            (ZernikeKind::Astigmatism45, r * r * (2.0 * b).sin()),
            (ZernikeKind::XComa, (3.0 * r.powi(3) - 2.0 * r) * b.cos()),
            (ZernikeKind::YComa, (3.0 * r.powi(3) - 2.0 * r) * b.sin()),
            (ZernikeKind::Spherical, 6.0 * r.powi(4) - 6.0 * r * r + 1.0),
        ];
        for (k, v) in cases {
            let (p, q) = k.indices();
            assert!((zernike_value(p, q, r, b).unwrap() - v).abs() < 1e-14, "{k}");
        }
    }

    #[test]
    fn index_validation() {
        assert!(ZernikeSpec::new(1, 2, 1.0, 1.0).is_err());
        assert!(ZernikeSpec::new(3, 1, 1.0, 1.0).is_err());
        assert!(ZernikeSpec::new(-2, 4, 1.0, 1.0).is_ok());
        assert!(matches!("coma".parse::<ZernikeKind>(), Err(OpticsError::UnknownZernike(_))));
        assert_eq!("x-coma".parse::<ZernikeKind>().unwrap(), ZernikeKind::XComa);
    }

    #[test]
    fn zero_outside_aperture() {
        let g = GridGeometry::spanning(32, 2.0).unwrap();
        let spec = ZernikeSpec::new(0, 2, 1.0, 1.0).unwrap();
        let map = zernike_phase(&spec, g).unwrap();
        assert_eq!(map[0], 0.0);
        assert_eq!(map[16 * 32 + 16], -1.0);
    }

    #[test]
    fn calibration_values() {
        let s = calibrate_zernike_rms(ZernikeKind::Defocus, 0.078, 0.3).unwrap();
        assert!((s.coefficient - 3f64.sqrt() * 0.078 * 2.0 * PI).abs() < 1e-12);
        assert!((s.coefficient - 0.8488).abs() < 1e-4);
        assert_eq!(calibrate_zernike_rms(ZernikeKind::Spherical, 0.0, 0.3).unwrap().coefficient, 0.0);
        assert!(calibrate_zernike_rms(ZernikeKind::YTilt, -0.1, 0.3).is_err());
    }
}
