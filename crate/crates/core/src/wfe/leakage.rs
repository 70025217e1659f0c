use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::WfeError;

/// Number of sinusoidal harmonics per mode.
pub const HARMONICS: usize = 3;

/// Rule for drawing the coupling matrix and harmonic amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageSynthesis {
    pub diagonal: [f64; 2],
    pub off_diagonal: [f64; 2],
    /// Off-diagonal magnitude multiplier per extra index step.
    pub decay: f64,
    pub amplitude: [f64; 2],
    pub seed: u64,
}

impl Default for LeakageSynthesis {
    fn default() -> Self {
        Self { diagonal: [0.7, 1.0], off_diagonal: [0.0, 0.15], decay: 0.5, amplitude: [0.0, 0.5], seed: 7 }
    }
}

impl LeakageSynthesis {
    pub fn validate(&self) -> Result<(), WfeError> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ok(self.diagonal) || !ok(self.off_diagonal) || !ok(self.amplitude) {
            return Err(WfeError::InvalidConfig("leakage ranges must be finite with lo <= hi".into()));
        }
        if self.diagonal[0] <= self.off_diagonal[1] {
            return Err(WfeError::InvalidConfig("diagonal range must exceed the off-diagonal range".into()));
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(WfeError::InvalidConfig("decay must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Hardware leakage model for one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossLeakageConfig {
    pub n: usize,
    /// n×n, row = target mode, column = source mode.
    pub s: Vec<f64>,
    /// n×HARMONICS.
    pub a: Vec<f64>,
    pub seed: u64,
}

impl CrossLeakageConfig {
    pub fn synthesize(n: usize, rule: &LeakageSynthesis) -> Result<Self, WfeError> {
        rule.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(rule.seed);
        let uniform = |rng: &mut ChaCha8Rng, r: [f64; 2]| if r[1] > r[0] { rng.gen_range(r[0]..r[1]) } else { r[0] };
        let mut s = vec![0.0; n * n];
        for row in 0..n {
            for col in 0..n {
                s[row * n + col] = if row == col {
                    uniform(&mut rng, rule.diagonal)
                } else {
                    let steps = row.abs_diff(col) as i32 - 1;
                    uniform(&mut rng, rule.off_diagonal) * rule.decay.powi(steps)
                };
            }
        }
        let a = (0..n * HARMONICS).map(|_| uniform(&mut rng, rule.amplitude)).collect();
        Ok(Self { n, s, a, seed: rule.seed })
    }

    /// No leakage at all.
    pub fn zero(n: usize) -> Self {
        let mut s = vec![0.0; n * n];
        for k in 0..n {
            s[k * n + k] = 1.0;
        }
        Self { n, s, a: vec![0.0; n * HARMONICS], seed: 0 }
    }

    pub fn validate(&self) -> Result<(), WfeError> {
        if self.s.len() != self.n * self.n {
            return Err(WfeError::Dimension { expected: self.n * self.n, got: self.s.len() });
        }
        if self.a.len() != self.n * HARMONICS {
            return Err(WfeError::Dimension { expected: self.n * HARMONICS, got: self.a.len() });
        }
        Ok(())
    }
}

/// Δθ_X[k] = Σ_d A[k,d]·sin(d·(S·Θ)_k).
pub fn cross_leakage(theta_r: &[f64], cfg: &CrossLeakageConfig) -> Result<Vec<f64>, WfeError> {
    cfg.validate()?;
    let n = cfg.n;
    if theta_r.len() != n {
        return Err(WfeError::Dimension { expected: n, got: theta_r.len() });
    }
    Ok((0..n)
        .map(|k| {
            let arg: f64 = cfg.s[k * n..(k + 1) * n].iter().zip(theta_r).map(|(s, t)| s * t).sum();
            (0..HARMONICS).map(|d| cfg.a[k * HARMONICS + d] * ((d + 1) as f64 * arg).sin()).sum()
        })
        .collect())
}
