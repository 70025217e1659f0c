use serde::{Deserialize, Serialize};

use super::{PhaseSet, TnnError, TnnModel};
use crate::grid::wrap_phase;
use crate::wfe::PulsePairRecord;

/// Per-mode variances over a test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Var(wrap(Δφ_R − Δφ_S)).
    pub default_var: Vec<f64>,
    /// Var(wrap(Δφ̃_S − Δφ_S)).
    pub correction_var: Vec<f64>,
}

impl VarianceReport {
    pub fn n_modes(&self) -> usize {
        self.default_var.len()
    }

    /// Fraction of modes whose correction variance is below the default.
    pub fn improved_fraction(&self) -> f64 {
        let better = self.default_var.iter().zip(&self.correction_var).filter(|(d, c)| c < d).count();
        better as f64 / self.n_modes().max(1) as f64
    }

    /// Mean over modes of (default − correction).
    pub fn mean_gain(&self) -> f64 {
        let n = self.n_modes().max(1) as f64;
        self.default_var.iter().zip(&self.correction_var).map(|(d, c)| d - c).sum::<f64>() / n
    }
}

/// Unbiased sample variance of each column of wrapped differences.
pub fn wrapped_variances(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<f64>, TnnError> {
    if a.len() < 2 || a.len() != b.len() {
        return Err(TnnError::TooFewSamples(a.len().min(b.len())));
    }
    let n = a[0].len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| wrap_phase(x[k] - y[k])).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        out.push(d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64);
    }
    Ok(out)
}

/// Default and correction variances of a trained model on `records`.
pub fn evaluate_variances(records: &[PulsePairRecord], model: &TnnModel) -> Result<VarianceReport, TnnError> {
    if records.len() < 2 {
        return Err(TnnError::TooFewSamples(records.len()));
    }
    let set = PhaseSet::from_records(records)?;
    let pred = model.predict(set.inputs.view())?;
    let predicted: Vec<Vec<f64>> = pred.rows().into_iter().map(|r| r.to_vec()).collect();
    let refs: Vec<Vec<f64>> = records.iter().map(|r| r.phases_r.clone()).collect();
    let sig: Vec<Vec<f64>> = records.iter().map(|r| r.phases_s.clone()).collect();
    Ok(VarianceReport {
        default_var: wrapped_variances(&refs, &sig)?,
        correction_var: wrapped_variances(&predicted, &sig)?,
    })
}
