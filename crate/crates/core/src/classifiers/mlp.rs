//! Fully connected classifier: ReLU hidden layers, 2-way softmax output,
//! mean cross-entropy loss, trained with Adam (or SGD) on shuffled
//! mini-batches with validation-accuracy early stopping.
//!
//! Parameters live in one flat vector, layer by layer, each layer as an
//! `outputs x inputs` row-major weight block followed by its biases.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::optim::{Adam, Optimizer, OptimizerKind, Sgd};
use super::{LabeledData, Prediction};
use crate::preprocess::Label;

pub const CLASSES: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("expected input dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training set contains only {0} samples")]
    SingleClassTrainingSet(Label),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Hidden layer widths; empty means a linear softmax model.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation-accuracy gain.
    pub patience: usize,
    pub seed: u64,
    /// Weight each class by `n / (2 n_c)` in the loss.
    pub class_weighting: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![100],
            learning_rate: 0.00005,
            batch_size: 5000,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 500,
            patience: 20,
            seed: 0,
            class_weighting: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// `[input, hidden..., 2]`
    sizes: Vec<usize>,
    params: Vec<f64>,
    pub config: MlpConfig,
}

/// Per-layer activations kept for the backward pass.
struct Trace {
    /// `activations[0]` is the input, the last entry the softmax output.
    activations: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn param_count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// All-zero parameters.
    pub fn zeros(input_dim: usize, config: MlpConfig) -> Self {
        let sizes = Self::layer_sizes(input_dim, &config.hidden);
        let params = vec![0.0; Self::param_count_for(&sizes)];
        Self { sizes, params, config }
    }

    /// Glorot-uniform weights and zero biases from `config.seed`.
    pub fn init(input_dim: usize, config: MlpConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::init_with(input_dim, config, &mut rng)
    }

    fn init_with(input_dim: usize, config: MlpConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut model = Self::zeros(input_dim, config);
        let mut offset = 0;
        for w in model.sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut model.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        model
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>, config: MlpConfig) -> Result<Self, MlpError> {
        if sizes.len() < 2 || *sizes.last().unwrap() != CLASSES || sizes.contains(&0) {
            return Err(MlpError::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        if params.len() != Self::param_count_for(&sizes) {
            return Err(MlpError::InvalidConfig(format!(
                "expected {} parameters, got {}",
                Self::param_count_for(&sizes),
                params.len()
            )));
        }
        Ok(Self { sizes, params, config })
    }

    fn layer_sizes(input_dim: usize, hidden: &[usize]) -> Vec<usize> {
        std::iter::once(input_dim).chain(hidden.iter().copied()).chain(std::iter::once(CLASSES)).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), MlpError> {
        if x.len() != self.input_dim() {
            return Err(MlpError::DimensionMismatch { expected: self.input_dim(), actual: x.len() });
        }
        Ok(())
    }

    fn forward_trace(&self, x: &[f64]) -> Trace {
        let mut activations = vec![x.to_vec()];
        let mut offset = 0;
        let last = self.sizes.len() - 2;
        for (layer, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let input = activations.last().unwrap();
            let mut z: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(biases)
                .map(|(row, b)| b + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>())
                .collect();
            if layer == last {
                softmax_in_place(&mut z);
            } else {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(z);
            offset += n_in * n_out + n_out;
        }
        Trace { activations }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, MlpError> {
        self.check_dim(x)?;
        let probs = self.forward_trace(x).activations.pop().unwrap();
        Ok(Prediction::from_probabilities([probs[0], probs[1]]))
    }

    pub fn predict_batch<R: AsRef<[f64]>>(&self, xs: &[R]) -> Result<Vec<Prediction>, MlpError> {
        xs.iter().map(|x| self.predict(x.as_ref())).collect()
    }

    /// Weighted mean cross-entropy over a batch and its gradient with
    /// respect to the flat parameter vector.
    pub fn loss_and_gradient<R: AsRef<[f64]>>(
        &self,
        xs: &[R],
        labels: &[Label],
        class_weights: [f64; 2],
    ) -> Result<(f64, Vec<f64>), MlpError> {
        assert_eq!(xs.len(), labels.len());
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let scale = 1.0 / xs.len().max(1) as f64;
        let offsets = self.layer_offsets();
        for (x, &label) in xs.iter().zip(labels) {
            let x = x.as_ref();
            self.check_dim(x)?;
            let trace = self.forward_trace(x);
            let y = label.index();
            let weight = class_weights[y];
            let probs = trace.activations.last().unwrap();
            loss -= weight * probs[y].max(f64::MIN_POSITIVE).ln() * scale;

            // dL/dz at the output
            let mut delta: Vec<f64> =
                probs.iter().enumerate().map(|(c, p)| weight * scale * (p - if c == y { 1.0 } else { 0.0 })).collect();
            for layer in (0..self.sizes.len() - 1).rev() {
                let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
                let off = offsets[layer];
                let input = &trace.activations[layer];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                    row.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
                    grad[off + n_in * n_out + o] += d;
                }
                if layer > 0 {
                    let weights = &self.params[off..off + n_in * n_out];
                    let mut prev = vec![0.0; n_in];
                    for (row, d) in weights.chunks_exact(n_in).zip(&delta) {
                        prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                    }
                    // ReLU derivative
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok((loss, grad))
    }

    /// Weighted mean cross-entropy without gradients.
    pub fn loss<R: AsRef<[f64]>>(&self, xs: &[R], labels: &[Label], class_weights: [f64; 2]) -> Result<f64, MlpError> {
        let mut loss = 0.0;
        for (x, &label) in xs.iter().zip(labels) {
            let p = self.predict(x.as_ref())?.probabilities[label.index()];
            loss -= class_weights[label.index()] * p.max(f64::MIN_POSITIVE).ln();
        }
        Ok(loss / xs.len().max(1) as f64)
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.sizes.len() - 1);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        offsets
    }

    pub fn accuracy(&self, data: &LabeledData) -> Result<f64, MlpError> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for (x, &y) in data.features.iter().zip(&data.labels) {
            if self.predict(x)?.label == y {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the per-batch training losses.
    pub loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Trains on `train`, early-stopping on accuracy over `val`. An empty
/// `val` falls back to training accuracy. Returns the parameters of the
/// first epoch that reached the best monitored accuracy.
pub fn train_mlp(train: &LabeledData, val: &LabeledData, config: &MlpConfig) -> Result<(MlpModel, TrainingHistory), MlpError> {
    if train.is_empty() {
        return Err(MlpError::EmptyTrainingSet);
    }
    let dim = train.dim();
    for x in train.features.iter().chain(&val.features) {
        if x.len() != dim {
            return Err(MlpError::DimensionMismatch { expected: dim, actual: x.len() });
        }
    }
    let counts = train.class_counts();
    if let Some(missing) = Label::ALL.into_iter().find(|l| counts[l.index()] == 0) {
        let present = Label::ALL[1 - missing.index()];
        return Err(MlpError::SingleClassTrainingSet(present));
    }
    if config.batch_size == 0 || config.max_epochs == 0 {
        return Err(MlpError::InvalidConfig("batch_size and max_epochs must be positive".into()));
    }
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(MlpError::InvalidConfig(format!("learning rate {}", config.learning_rate)));
    }
    if config.hidden.contains(&0) {
        return Err(MlpError::InvalidConfig("hidden layers need at least one unit".into()));
    }

    let class_weights = if config.class_weighting {
        let n = train.len() as f64;
        [n / (2.0 * counts[0] as f64), n / (2.0 * counts[1] as f64)]
    } else {
        [1.0, 1.0]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MlpModel::init_with(dim, config.clone(), &mut rng);
    let mut optimizer = match config.optimizer {
        OptimizerKind::Adam => {
            Optimizer::Adam(Adam::new(model.param_count(), config.learning_rate, config.beta1, config.beta2, config.epsilon))
        }
        OptimizerKind::Sgd => Optimizer::Sgd(Sgd { learning_rate: config.learning_rate }),
    };

    let mut history = TrainingHistory::default();
    let mut best_params = model.params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| train.features[i].as_slice()).collect();
            let ys: Vec<Label> = batch.iter().map(|&i| train.labels[i]).collect();
            let (loss, grad) = model.loss_and_gradient(&xs, &ys, class_weights)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(MlpError::NonFiniteLoss { epoch });
            }
            optimizer.step(&mut model.params, &grad);
            if model.params.iter().any(|p| !p.is_finite()) {
                return Err(MlpError::NonFiniteLoss { epoch });
            }
            loss_sum += loss;
            batches += 1;
        }
        let train_accuracy = model.accuracy(train)?;
        let val_accuracy = if val.is_empty() { train_accuracy } else { model.accuracy(val)? };
        history.epochs.push(EpochStats { epoch, loss: loss_sum / batches as f64, train_accuracy, val_accuracy });
        if val_accuracy > best_acc {
            best_acc = val_accuracy;
            best_params.copy_from_slice(&model.params);
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    log::debug!("mlp: {} epochs, best epoch {} with accuracy {:.4}", history.epochs.len(), history.best_epoch, best_acc);
    history.best_val_accuracy = best_acc;
    model.params = best_params;
    Ok((model, history))
}
