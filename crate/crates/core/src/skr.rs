//! GG02 secure key rate with reverse reconciliation, asymptotic regime,
//! collective attacks. Quadrature variances in shot-noise units.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack below 1 tolerated for symplectic eigenvalues.
pub const NU_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkrError {
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("unphysical state: symplectic eigenvalue {0} < 1")]
    Unphysical(f64),
}

/// Receiver and channel noise figures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub eta_det: f64,
    pub beta_r: f64,
    pub xi_el: f64,
    pub xi_ch: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { eta_det: 0.95, beta_r: 0.95, xi_el: 0.010, xi_ch: 0.0172 }
    }
}

/// Ensemble moments of the channel transmissivity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMoments {
    pub mean_t: f64,
    pub mean_sqrt_t: f64,
}

impl ChannelMoments {
    /// Non-fading channel of transmissivity `t`.
    pub fn fixed(t: f64) -> Self {
        Self { mean_t: t, mean_sqrt_t: t.sqrt() }
    }

    pub fn from_samples(ts: &[f64]) -> Result<Self, SkrError> {
        if ts.is_empty() || ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(SkrError::Domain("transmissivity samples must be nonempty and lie in [0, 1]".into()));
        }
        let n = ts.len() as f64;
        Ok(Self { mean_t: ts.iter().sum::<f64>() / n, mean_sqrt_t: ts.iter().map(|t| t.sqrt()).sum::<f64>() / n })
    }

    /// T_f = ⟨√T⟩².
    pub fn effective_transmissivity(&self) -> f64 {
        self.mean_sqrt_t * self.mean_sqrt_t
    }

    pub fn validate(&self) -> Result<(), SkrError> {
        let tf = self.effective_transmissivity();
        // Jensen: ⟨√T⟩² ≤ ⟨T⟩, up to rounding in the sample means
        if !(self.mean_sqrt_t >= 0.0 && self.mean_t <= 1.0 && tf <= self.mean_t * (1.0 + 1e-12)) {
            return Err(SkrError::Domain(format!(
                "moments ⟨T⟩ = {}, ⟨√T⟩ = {} violate 0 ≤ ⟨√T⟩² ≤ ⟨T⟩ ≤ 1",
                self.mean_t, self.mean_sqrt_t
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkrParams {
    pub v_mod: f64,
    pub noise: NoiseParams,
    /// Mean coherent efficiency γ̄ of the local-oscillator reconstruction.
    pub gamma: f64,
    pub moments: ChannelMoments,
}

impl SkrParams {
    pub fn validate(&self) -> Result<(), SkrError> {
        if !(self.v_mod >= 0.0 && self.v_mod.is_finite()) {
            return Err(SkrError::Domain(format!("V_mod = {}", self.v_mod)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(SkrError::Domain(format!("γ = {} outside (0, 1]", self.gamma)));
        }
        let n = &self.noise;
        if !(n.eta_det > 0.0 && n.eta_det <= 1.0 && n.beta_r >= 0.0 && n.beta_r <= 1.0) {
            return Err(SkrError::Domain("efficiencies must lie in (0, 1]".into()));
        }
        if !(n.xi_el >= 0.0 && n.xi_ch >= 0.0) {
            return Err(SkrError::Domain("noise terms must be >= 0".into()));
        }
        self.moments.validate()
    }
}

/// Two-mode covariance entries: M = [[a·1, c·σz], [c·σz, b·1]].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkrResult {
    pub v_mod: f64,
    pub xi_det: f64,
    pub t_f: f64,
    /// T_f·ξ_f.
    pub noise_product: f64,
    pub i_ab: f64,
    pub chi_be: f64,
    pub r_sec_raw: f64,
    /// max(R_raw, 0).
    pub r_sec: f64,
    pub nu: [f64; 3],
    pub cov: Covariance,
}

/// ξ_det = ((1 − γ) + ξ_el)·η_det / γ.
pub fn detector_noise(gamma: f64, xi_el: f64, eta_det: f64) -> Result<f64, SkrError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(SkrError::Domain(format!("γ = {gamma} outside (0, 1]")));
    }
    Ok(((1.0 - gamma) + xi_el) * eta_det / gamma)
}

/// T_f·ξ_f = ξ_ch⟨T⟩ + ⟨ξ_det⟩ + (⟨T⟩ − ⟨√T⟩²)·V_mod.
pub fn effective_noise_product(xi_ch: f64, moments: &ChannelMoments, xi_det: f64, v_mod: f64) -> f64 {
    xi_ch * moments.mean_t + xi_det + (moments.mean_t - moments.effective_transmissivity()) * v_mod
}

/// I_AB = ½·log2(1 + T_f·V / (1 + T_f·ξ_f)).
pub fn shared_information(v_mod: f64, t_f: f64, noise_product: f64) -> Result<f64, SkrError> {
    let den = 1.0 + noise_product;
    if den <= 0.0 {
        return Err(SkrError::Domain(format!("1 + T_f·ξ_f = {den}")));
    }
    Ok(0.5 * (1.0 + t_f * v_mod / den).log2())
}

pub fn covariance_matrix(v_mod: f64, t_f: f64, xi_ch: f64) -> Result<Covariance, SkrError> {
    if !(0.0..=1.0).contains(&t_f) {
        return Err(SkrError::Domain(format!("T_f = {t_f} outside [0, 1]")));
    }
    let rad = t_f * (v_mod * v_mod + 2.0 * v_mod);
    if rad < 0.0 || v_mod < 0.0 {
        return Err(SkrError::Domain(format!("negative radicand {rad}")));
    }
    Ok(Covariance { a: v_mod + 1.0, b: t_f * v_mod + 1.0 + xi_ch, c: rad.sqrt() })
}

/// g(x) = (x+1)/2·log2((x+1)/2) − (x−1)/2·log2((x−1)/2), with g(1) = 0.
pub fn g(x: f64) -> f64 {
    let hi = 0.5 * (x + 1.0);
    let lo = 0.5 * (x - 1.0);
    let tail = if lo > 0.0 { lo * lo.log2() } else { 0.0 };
    hi * hi.log2() - tail
}

/// ν1, ν2 of M_AB and ν3 of the conditional matrix after Bob's homodyne.
pub fn symplectic_eigenvalues(cov: &Covariance) -> Result<[f64; 3], SkrError> {
    let Covariance { a, b, c } = *cov;
    let z2 = (a + b).powi(2) - 4.0 * c * c;
    if z2 < 0.0 {
        return Err(SkrError::Domain(format!("z² = {z2} < 0")));
    }
    let z = z2.sqrt();
    let cond = a - c * c / b;
    if !(b > 0.0 && cond > 0.0) {
        return Err(SkrError::Domain(format!("a − c²/b = {cond} must be > 0")));
    }
    let nu = [0.5 * (z + (b - a)), 0.5 * (z - (b - a)), (a * cond).sqrt()];
    for v in nu {
        if v < 1.0 - NU_SLACK {
            return Err(SkrError::Unphysical(v));
        }
    }
    Ok(nu)
}

/// χ_BE = g(ν1) + g(ν2) − g(ν3). Eigenvalues within the slack below 1
/// are evaluated at 1.
pub fn holevo_information(cov: &Covariance) -> Result<(f64, [f64; 3]), SkrError> {
    let nu = symplectic_eigenvalues(cov)?;
    let gc = |v: f64| g(v.max(1.0));
    Ok((gc(nu[0]) + gc(nu[1]) - gc(nu[2]), nu))
}

pub fn secure_key_rate(params: &SkrParams) -> Result<SkrResult, SkrError> {
    params.validate()?;
    let n = &params.noise;
    let xi_det = detector_noise(params.gamma, n.xi_el, n.eta_det)?;
    let t_f = params.moments.effective_transmissivity();
    let noise_product = effective_noise_product(n.xi_ch, &params.moments, xi_det, params.v_mod);
    let i_ab = shared_information(params.v_mod, t_f, noise_product)?;
    let cov = covariance_matrix(params.v_mod, t_f, n.xi_ch)?;
    let (chi_be, nu) = holevo_information(&cov)?;
    let r_sec_raw = n.beta_r * i_ab - chi_be;
    Ok(SkrResult {
        v_mod: params.v_mod,
        xi_det,
        t_f,
        noise_product,
        i_ab,
        chi_be,
        r_sec_raw,
        r_sec: r_sec_raw.max(0.0),
        nu,
        cov,
    })
}

/// Evaluates the rate at every modulation variance in `v_mods`.
pub fn sweep(base: &SkrParams, v_mods: &[f64]) -> Result<Vec<SkrResult>, SkrError> {
    v_mods.iter().map(|&v_mod| secure_key_rate(&SkrParams { v_mod, ..*base })).collect()
}

/// `count` evenly spaced points on [lo, hi].
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

pub const SWEEP_CSV_HEADER: &str = "V_mod,I_AB,chi_BE,R_sec_raw,R_sec,nu1,nu2,nu3";

pub fn sweep_csv_row(r: &SkrResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.v_mod, r.i_ab, r.chi_be, r.r_sec_raw, r.r_sec, r.nu[0], r.nu[1], r.nu[2]
    )
}
