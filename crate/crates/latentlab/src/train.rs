//! Binary classifier training: full-batch gradient descent on log loss.
//!
//! Deliberately plain. No momentum, no minibatches, no schedules: determinism
//! given the seed matters more here than wall-clock optimality, and desk-scale
//! problems converge fine without them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{apply_update, params_finite, Activation, DiffModel, Layer, ParamGrads};

/// Architecture of a binary classifier: up to two hidden layers and a single
/// sigmoid output unit.
#[derive(Clone, Debug)]
pub struct ClassifierArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
}

impl ClassifierArch {
    /// Plain logistic regression.
    pub fn linear(input_dim: usize) -> Self {
        ClassifierArch {
            input_dim,
            hidden: Vec::new(),
            hidden_activation: Activation::Tanh,
        }
    }

    /// Tanh hidden layers of the given widths, then a sigmoid unit.
    pub fn tanh(input_dim: usize, hidden: Vec<usize>) -> Self {
        ClassifierArch {
            input_dim,
            hidden,
            hidden_activation: Activation::Tanh,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("classifier input dim is zero".into()));
        }
        if self.hidden.len() > 2 {
            return Err(Error::InvalidConfig(format!(
                "at most two hidden layers are supported, got {}",
                self.hidden.len()
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden width is zero".into()));
        }
        Ok(())
    }

    /// Seeded initialization: weights `N(0, 1/fan_in)`, biases zero.
    fn build(&self, seed: u64) -> Result<DiffModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        let mut layers = Vec::new();
        for (idx, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weights = Matrix::from_fn(fan_out, fan_in, |_, _| {
                let g: f64 = rng.sample(StandardNormal);
                g * scale
            });
            let activation = if idx + 1 == dims.len() - 1 {
                Activation::Sigmoid
            } else {
                self.hidden_activation
            };
            layers.push(Layer::new(weights, Vector::zeros(fan_out), activation)?);
        }
        DiffModel::new(layers)
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of the data held out for the accuracy report.
    pub holdout_fraction: f64,
    /// L2 penalty on weights. Keeps the norm finite on separable data, where
    /// plain gradient descent would chase the margin indefinitely and load
    /// weight onto low-variance feature directions.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1.0,
            epochs: 400,
            seed: 0,
            holdout_fraction: 0.2,
            weight_decay: 0.0,
        }
    }
}

/// A trained classifier plus the accuracy evidence it shipped with.
#[derive(Clone, Debug)]
pub struct TrainedClassifier {
    pub model: DiffModel,
    pub holdout_accuracy: f64,
    pub train_accuracy: f64,
    pub final_loss: f64,
}

/// Score above which a classifier output counts as label 1. Exactly 0.5 maps
/// to label 0, mirroring the oracle's tie rule.
pub fn score_to_label(score: f64) -> bool {
    score > 0.5
}

/// Train a binary classifier by full-batch gradient descent on mean log loss.
///
/// Deterministic given `cfg.seed`: the seed fixes both the holdout split and
/// the weight initialization. Fails with `DegenerateData` when all labels
/// agree and `NonFiniteLoss` when the loss diverges.
pub fn train_classifier(
    data: &[(Vector, bool)],
    arch: &ClassifierArch,
    cfg: &TrainConfig,
) -> Result<TrainedClassifier> {
    arch.validate()?;
    if data.is_empty() {
        return Err(Error::DegenerateData);
    }
    let positives = data.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::DegenerateData);
    }
    if !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction {} outside [0, 1)",
            cfg.holdout_fraction
        )));
    }
    if !cfg.weight_decay.is_finite() || cfg.weight_decay < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "weight decay {} must be finite and non-negative",
            cfg.weight_decay
        )));
    }
    for (x, _) in data {
        if x.len() != arch.input_dim {
            return Err(Error::DimensionMismatch {
                context: "training sample",
                expected: arch.input_dim,
                actual: x.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    // Fisher-Yates, driven by the same seed as the init.
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let holdout_len = ((data.len() as f64) * cfg.holdout_fraction).round() as usize;
    let holdout_len = holdout_len.min(data.len().saturating_sub(1));
    let (holdout_idx, train_idx) = order.split_at(holdout_len);

    let mut model = arch.build(rng.random())?;
    let inv_n = 1.0 / train_idx.len() as f64;
    let mut final_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        let mut grads = ParamGrads::zeros_like(&model);
        let mut loss = 0.0;
        for &i in train_idx {
            let (x, y) = &data[i];
            let trace = model.forward_trace(x)?;
            let h = trace.output()[0];
            let target = if *y { 1.0 } else { 0.0 };
            loss -= inv_n * if *y { h.ln() } else { (1.0 - h).ln() };
            // d(loss)/d(pre-activation) of the sigmoid unit is h - y.
            model.backward_params_from_final_pre(&trace, &[h - target], &mut grads, inv_n);
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        apply_update(&mut model, &grads, cfg.learning_rate, cfg.weight_decay);
        final_loss = loss;
    }
    if !params_finite(&model) {
        return Err(Error::NonFiniteLoss {
            epoch: cfg.epochs,
            loss: f64::NAN,
        });
    }

    let accuracy = |idx: &[usize]| -> Result<f64> {
        if idx.is_empty() {
            return Ok(f64::NAN);
        }
        let mut correct = 0usize;
        for &i in idx {
            let (x, y) = &data[i];
            let score = model.forward(x)?[0];
            if score_to_label(score) == *y {
                correct += 1;
            }
        }
        Ok(correct as f64 / idx.len() as f64)
    };
    let holdout_accuracy = accuracy(holdout_idx)?;
    let train_accuracy = accuracy(train_idx)?;
    Ok(TrainedClassifier {
        model,
        holdout_accuracy,
        train_accuracy,
        final_loss,
    })
}
