use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TnnError, TnnModel};
use crate::grid::wrap_phase;
use crate::wfe::PulsePairRecord;

/// RMS of wrapped phase differences over every element.
pub fn loss(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<f64, TnnError> {
    if pred.dim() != target.dim() {
        return Err(TnnError::Dimension { expected: target.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = pred.iter().zip(target).map(|(p, t)| wrap_phase(p - t).powi(2)).sum();
    Ok((sq / pred.len() as f64).sqrt())
}

/// Loss value and its gradient with respect to `pred`.
pub fn loss_and_grad(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let diff = Array2::from_shape_fn(pred.dim(), |ij| wrap_phase(pred[ij] - target[ij]));
    let count = diff.len() as f64;
    let l = (diff.iter().map(|v| v * v).sum::<f64>() / count).sqrt();
    let grad = if l > 0.0 { diff / (l * count) } else { Array2::zeros(pred.dim()) };
    (l, grad)
}

/// Inputs (reference phases) and targets (signal phases), one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSet {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl PhaseSet {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self, TnnError> {
        if inputs.dim() != targets.dim() {
            return Err(TnnError::Dimension { expected: inputs.len(), got: targets.len() });
        }
        Ok(Self { inputs, targets })
    }

    pub fn from_records(records: &[PulsePairRecord]) -> Result<Self, TnnError> {
        let n = records.first().map_or(0, |r| r.phases_r.len());
        let mut inputs = Array2::zeros((records.len(), n));
        let mut targets = Array2::zeros((records.len(), n));
        for (i, r) in records.iter().enumerate() {
            if r.phases_r.len() != n || r.phases_s.len() != n {
                return Err(TnnError::Dimension { expected: n, got: r.phases_s.len().min(r.phases_r.len()) });
            }
            inputs.row_mut(i).assign(&ndarray::aview1(&r.phases_r));
            targets.row_mut(i).assign(&ndarray::aview1(&r.phases_s));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_modes(&self) -> usize {
        self.inputs.ncols()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    /// Empty when no test split was given.
    pub test_loss: Vec<f64>,
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Trains with the model's own hyperparameters.
pub fn train(model: &mut TnnModel, train_set: &PhaseSet, test_set: Option<&PhaseSet>) -> Result<TrainHistory, TnnError> {
    train_with(model, train_set, test_set, |_, _, _| {})
}

/// As [`train`], calling `on_epoch(epoch, train_loss, test_loss)` after each epoch.
pub fn train_with(
    model: &mut TnnModel,
    train_set: &PhaseSet,
    test_set: Option<&PhaseSet>,
    mut on_epoch: impl FnMut(usize, f64, Option<f64>),
) -> Result<TrainHistory, TnnError> {
    let h = model.hyper().clone();
    if train_set.is_empty() {
        return Err(TnnError::EmptyDataset);
    }
    for set in std::iter::once(train_set).chain(test_set) {
        if set.n_modes() != h.n_modes {
            return Err(TnnError::Dimension { expected: h.n_modes, got: set.n_modes() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(model.param_count(), h.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();
    let n = h.n_modes;

    for epoch in 0..h.epochs {
        order.shuffle(&mut rng);
        let mut sq_sum = 0.0;
        for chunk in order.chunks(h.batch_size) {
            let mut x = Array2::zeros((chunk.len(), n));
            let mut y = Array2::zeros((chunk.len(), n));
            for (row, &i) in chunk.iter().enumerate() {
                x.row_mut(row).assign(&train_set.inputs.row(i));
                y.row_mut(row).assign(&train_set.targets.row(i));
            }
            let (pred, tape) = model.run(x.view(), Some(&mut rng));
            let (l, dpred) = loss_and_grad(pred.view(), y.view());
            if !l.is_finite() {
                return Err(TnnError::Diverged { epoch });
            }
            sq_sum += l * l * (chunk.len() * n) as f64;
            let grad = model.backward(&tape, dpred.view());
            adam.step(model.params_mut(), &grad);
        }
        let train_loss = (sq_sum / (train_set.len() * n) as f64).sqrt();
        if !train_loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(TnnError::Diverged { epoch });
        }
        history.train_loss.push(train_loss);
        let test_loss = match test_set {
            Some(t) if !t.is_empty() => {
                let l = loss(model.predict(t.inputs.view())?.view(), t.targets.view())?;
                history.test_loss.push(l);
                Some(l)
            }
            _ => None,
        };
        on_epoch(epoch, train_loss, test_loss);
    }
    Ok(history)
}

/// Largest per-tensor relative error between the analytic gradient and
/// central differences with step `1e-5`, dropout off. Each tensor's error
/// is ‖g_a − g_n‖ / max(‖g_a‖, ‖g_n‖, 1e-6); the floor keeps tensors
/// whose true gradient vanishes (e.g. key biases, which softmax ignores)
/// from dividing round-off by round-off.
pub fn gradients_check(model: &TnnModel, inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<f64, TnnError> {
    const STEP: f64 = 1e-5;
    let n = model.n_modes();
    if inputs.ncols() != n || inputs.dim() != targets.dim() {
        return Err(TnnError::Dimension { expected: n, got: inputs.ncols() });
    }
    let (pred, tape) = model.run(inputs, None);
    let (_, dpred) = loss_and_grad(pred.view(), targets);
    let analytic = model.backward(&tape, dpred.view());

    let mut probe = model.clone();
    let eval = |m: &TnnModel| loss(m.run(inputs, None).0.view(), targets);
    let mut worst: f64 = 0.0;
    for t in model.layout().tensors().to_vec() {
        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        for i in t.range() {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + STEP;
            let up = eval(&probe)?;
            probe.params_mut()[i] = orig - STEP;
            let down = eval(&probe)?;
            probe.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            diff2 += (analytic[i] - numeric).powi(2);
            a2 += analytic[i].powi(2);
            n2 += numeric.powi(2);
        }
        let rel = diff2.sqrt() / a2.sqrt().max(n2.sqrt()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Rows `start..end` of a set, for mini-batch helpers and tests.
pub fn slice_set(set: &PhaseSet, start: usize, end: usize) -> PhaseSet {
    PhaseSet {
        inputs: set.inputs.slice(s![start..end, ..]).to_owned(),
        targets: set.targets.slice(s![start..end, ..]).to_owned(),
    }
}
