use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quad::integrate;
use super::ChannelError;

const QUAD_TOL: f64 = 1e-10;

fn default_background() -> f64 {
    2.7e-16
}

/// Origin of the height fed to the C²_n model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeightReference {
    /// Altitude above sea level; the ground term is damped at elevated sites.
    #[default]
    SeaLevel,
    /// Height above the receiver.
    Receiver,
}

/// Vertical turbulence model for a slant downlink.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereProfile {
    /// Satellite altitude H, m.
    pub satellite_altitude: f64,
    /// Receiver altitude h0, m.
    pub receiver_altitude: f64,
    /// Zenith angle, rad.
    pub zenith_angle: f64,
    /// Ground-level C²_n, m^(−2/3).
    pub cn2_ground: f64,
    /// Ground wind speed v_y, m/s.
    pub ground_wind: f64,
    /// RMS wind speed entering the C²_n model, m/s.
    pub rms_wind: f64,
    /// Constant of the 1.5 km background term, m^(−2/3).
    #[serde(default = "default_background")]
    pub background_cn2: f64,
    #[serde(default)]
    pub height_reference: HeightReference,
    pub outer_scale: f64,
    pub inner_scale: f64,
    pub wavelength: f64,
}

impl AtmosphereProfile {
    /// 500 km downlink at zenith to a 2 km site, 1550 nm.
    pub fn downlink(cn2_ground: f64) -> Self {
        Self {
            satellite_altitude: 500.0e3,
            receiver_altitude: 2.0e3,
            zenith_angle: 0.0,
            cn2_ground,
            ground_wind: 0.0,
            rms_wind: 21.0,
            background_cn2: default_background(),
            height_reference: HeightReference::SeaLevel,
            outer_scale: 5.0,
            inner_scale: 0.025,
            wavelength: 1550.0e-9,
        }
    }

    /// No turbulence anywhere on the path.
    pub fn vacuum() -> Self {
        Self { rms_wind: 0.0, background_cn2: 0.0, ..Self::downlink(0.0) }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: &str| Err(ChannelError::InvalidProfile(m.to_string()));
        let finite = [
            self.satellite_altitude,
            self.receiver_altitude,
            self.zenith_angle,
            self.cn2_ground,
            self.ground_wind,
            self.rms_wind,
            self.background_cn2,
            self.outer_scale,
            self.inner_scale,
            self.wavelength,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        if !(self.receiver_altitude >= 0.0 && self.satellite_altitude > self.receiver_altitude) {
            return bad("need H > h0 >= 0");
        }
        if !(0.0..PI / 2.0).contains(&self.zenith_angle) {
            return bad("zenith angle outside [0, pi/2)");
        }
        if self.cn2_ground < 0.0 || self.background_cn2 < 0.0 || self.rms_wind < 0.0 {
            return bad("negative turbulence strength");
        }
        if !(self.inner_scale >= 0.0 && self.inner_scale < self.outer_scale) {
            return bad("need 0 <= l0 < L0");
        }
        if self.wavelength <= 0.0 {
            return bad("wavelength must be positive");
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn sec_zenith(&self) -> f64 {
        1.0 / self.zenith_angle.cos()
    }

    /// Slant distance from the satellite to the receiver.
    pub fn path_length(&self) -> f64 {
        (self.satellite_altitude - self.receiver_altitude) * self.sec_zenith()
    }

    /// C²_n at altitude `h` under the configured height origin.
    pub fn cn2_at(&self, h: f64) -> f64 {
        match self.height_reference {
            HeightReference::SeaLevel => cn2_profile(self, h),
            HeightReference::Receiver => cn2_profile(self, (h - self.receiver_altitude).max(0.0)),
        }
    }

    fn check_interval(&self, lo: f64, hi: f64) -> Result<(), ChannelError> {
        if !(hi > lo) || lo < self.receiver_altitude || hi > self.satellite_altitude {
            return Err(ChannelError::EmptyInterval { lo, hi });
        }
        Ok(())
    }
}

/// C²_n(h) of the Hufnagel-Valley form, `h` being the model height in meters.
pub fn cn2_profile(profile: &AtmosphereProfile, h: f64) -> f64 {
    let w = profile.rms_wind / 27.0;
    0.00594 * w * w * (h * 1.0e-5).powi(10) * (-h / 1000.0).exp()
        + profile.background_cn2 * (-h / 1500.0).exp()
        + profile.cn2_ground * (-h / 100.0).exp()
}

pub fn bufton_wind(ground_wind: f64, h: f64) -> f64 {
    let u = (h - 9400.0) / 4800.0;
    ground_wind + 30.0 * (-u * u).exp()
}

/// RMS of a wind profile over 5–20 km.
pub fn rms_wind(v: impl Fn(f64) -> f64) -> f64 {
    (integrate(|h| v(h).powi(2), 5.0e3, 20.0e3, 1e-12) / 15.0e3).sqrt()
}

/// Rytov variance accumulated between altitudes `h_lo` and `h_hi`.
pub fn rytov_variance(profile: &AtmosphereProfile, h_lo: f64, h_hi: f64) -> Result<f64, ChannelError> {
    profile.check_interval(h_lo, h_hi)?;
    let h0 = profile.receiver_altitude;
    let i = integrate(|h| profile.cn2_at(h) * (h - h0).powf(5.0 / 6.0), h_lo, h_hi, QUAD_TOL);
    Ok(rytov_prefactor(profile) * i)
}

fn rytov_prefactor(profile: &AtmosphereProfile) -> f64 {
    2.25 * profile.wavenumber().powf(7.0 / 6.0) * profile.sec_zenith().powf(11.0 / 6.0)
}

pub fn scintillation_index(sigma2_r: f64) -> f64 {
    let s125 = sigma2_r.max(0.0).powf(6.0 / 5.0);
    let a = 0.49 * sigma2_r / (1.0 + 1.11 * s125).powf(7.0 / 6.0);
    let b = 0.51 * sigma2_r / (1.0 + 0.69 * s125).powf(5.0 / 6.0);
    (a + b).exp_m1()
}

/// Fried parameter of the layer between `h_lo` and `h_hi`; infinite when
/// the layer carries no turbulence.
pub fn fried_parameter(profile: &AtmosphereProfile, h_lo: f64, h_hi: f64) -> Result<f64, ChannelError> {
    profile.check_interval(h_lo, h_hi)?;
    let i = integrate(|h| profile.cn2_at(h), h_lo, h_hi, QUAD_TOL);
    Ok(fried_from_integral(profile, i))
}

pub(crate) fn fried_from_integral(profile: &AtmosphereProfile, cn2_integral: f64) -> f64 {
    let k = profile.wavenumber();
    let s = 0.423 * k * k * profile.sec_zenith() * cn2_integral;
    if s > 0.0 {
        s.powf(-3.0 / 5.0)
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cn2_ground_value() {
        let p = AtmosphereProfile::downlink(1e-14);
        let v = cn2_profile(&p, 0.0);
        assert!((v - (1e-14 + 2.7e-16)).abs() < 1e-30);
        assert!(cn2_profile(&p, 1e6) < 1e-25);
    }

    #[test]
    fn wind_profile() {
        assert_eq!(bufton_wind(3.0, 9400.0), 33.0);
        assert!((bufton_wind(3.0, 1e6) - 3.0).abs() < 1e-12);
        assert_eq!(rms_wind(|_| 21.0), 21.0);
    }

    #[test]
    fn scintillation_formula() {
        assert_eq!(scintillation_index(0.0), 0.0);
        let a = 0.49 / 2.11f64.powf(7.0 / 6.0);
        let b = 0.51 / 1.69f64.powf(5.0 / 6.0);
        assert!((scintillation_index(1.0) - ((a + b).exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn interval_checks() {
        let p = AtmosphereProfile::downlink(1e-14);
        assert!(rytov_variance(&p, 5e3, 5e3).is_err());
        assert!(rytov_variance(&p, 1e3, 5e3).is_err());
        assert!(fried_parameter(&p, 2e3, 6e5).is_err());
        assert!(fried_parameter(&AtmosphereProfile::vacuum(), 2e3, 5e5).unwrap().is_infinite());
    }

    #[test]
    fn validation() {
        assert!(AtmosphereProfile::downlink(1e-14).validate().is_ok());
        let mut p = AtmosphereProfile::downlink(1e-14);
        p.inner_scale = 6.0;
        assert!(p.validate().is_err());
        p = AtmosphereProfile::downlink(1e-14);
        p.zenith_angle = PI / 2.0;
        assert!(p.validate().is_err());
    }
}
