//! Differentiable feed-forward models.
//!
//! A model is a chain of dense layers, each `activation(W x + b)`, plus an
//! optional linear shortcut from input to output. The shortcut exists for
//! generators of the form `x = M z + branch(z)`; per-layer activations alone
//! cannot express that shape. Classifiers never use it.
//!
//! Reverse-mode differentiation is exact: one forward pass records the
//! post-activation of every layer, and a backward sweep pulls any seed
//! covector through the chain. All activations here have derivatives that are
//! functions of the layer output, so pre-activations are never stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Largest value the sigmoid may return: the f64 immediately below 1.
/// Clamping keeps classifier outputs strictly inside (0, 1) for every finite
/// input, which downstream log-losses and label thresholds rely on.
const SIGMOID_MAX: f64 = 1.0 - f64::EPSILON / 2.0;
const SIGMOID_MIN: f64 = f64::MIN_POSITIVE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => {
                // Split by sign so exp never overflows.
                let s = if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                };
                s.clamp(SIGMOID_MIN, SIGMOID_MAX)
            }
        }
    }

    /// Derivative expressed through the activation output `y = f(x)`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// One dense layer: `activation(W x + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer", into = "RawLayer")]
pub struct Layer {
    weights: Matrix,
    bias: Vector,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    weights: Matrix,
    bias: Vector,
    activation: Activation,
}

impl TryFrom<RawLayer> for Layer {
    type Error = Error;

    fn try_from(raw: RawLayer) -> Result<Self> {
        Layer::new(raw.weights, raw.bias, raw.activation)
    }
}

impl From<Layer> for RawLayer {
    fn from(l: Layer) -> RawLayer {
        RawLayer {
            weights: l.weights,
            bias: l.bias,
            activation: l.activation,
        }
    }
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vector, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: weights.rows(),
                actual: bias.len(),
            });
        }
        Ok(Layer {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &Vector {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn apply(&self, x: &Vector) -> Vector {
        let pre = self.weights.matvec(x);
        let post: Vec<f64> = pre
            .iter()
            .zip(self.bias.iter())
            .map(|(p, b)| self.activation.apply(p + b))
            .collect();
        Vector::from_raw(post)
    }
}

/// Feed-forward chain with an optional input-to-output linear shortcut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct DiffModel {
    layers: Vec<Layer>,
    skip: Option<Matrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    layers: Vec<Layer>,
    skip: Option<Matrix>,
}

impl TryFrom<RawModel> for DiffModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        DiffModel::from_parts(raw.layers, raw.skip)
    }
}

impl From<DiffModel> for RawModel {
    fn from(m: DiffModel) -> RawModel {
        RawModel {
            layers: m.layers,
            skip: m.skip,
        }
    }
}

impl DiffModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        DiffModel::from_parts(layers, None)
    }

    pub fn with_skip(layers: Vec<Layer>, skip: Matrix) -> Result<Self> {
        DiffModel::from_parts(layers, Some(skip))
    }

    pub fn from_parts(layers: Vec<Layer>, skip: Option<Matrix>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("a model needs at least one layer".into()));
        }
        for (a, b) in layers.iter().zip(layers.iter().skip(1)) {
            if a.out_dim() != b.in_dim() {
                return Err(Error::InvalidModel(format!(
                    "layer output dim {} feeds layer input dim {}",
                    a.out_dim(),
                    b.in_dim()
                )));
            }
        }
        if let Some(s) = &skip {
            let (input, output) = (layers[0].in_dim(), layers[layers.len() - 1].out_dim());
            if s.rows() != output || s.cols() != input {
                return Err(Error::InvalidModel(format!(
                    "shortcut is {}x{}, model maps {input} -> {output}",
                    s.rows(),
                    s.cols()
                )));
            }
        }
        Ok(DiffModel { layers, skip })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn skip(&self) -> Option<&Matrix> {
        self.skip.as_ref()
    }

    /// Evaluate the model. Purely sequential arithmetic: identical model and
    /// input give bit-identical output on every run.
    pub fn forward(&self, input: &Vector) -> Result<Vector> {
        Ok(self.forward_trace(input)?.output)
    }

    pub(crate) fn forward_trace(&self, input: &Vector) -> Result<ForwardTrace> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "model input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let mut posts = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            current = layer.apply(&current);
            posts.push(current.clone());
        }
        let output = match &self.skip {
            Some(s) => {
                let shortcut = s.matvec(input);
                current.add_scaled(1.0, &shortcut)
            }
            None => current,
        };
        Ok(ForwardTrace {
            input: input.clone(),
            posts,
            output,
        })
    }

    /// Pull the covector `seed` back through the chain: `J(input)^T seed`.
    pub(crate) fn backward_input(&self, trace: &ForwardTrace, seed: &[f64]) -> Vector {
        debug_assert_eq!(seed.len(), self.output_dim());
        let mut grad = self.backward_through_layers(trace, seed, self.layers.len());
        if let Some(s) = &self.skip {
            grad = grad.add_scaled(1.0, &s.tr_matvec(seed));
        }
        grad
    }

    /// Backward sweep through the topmost `depth` layers of the chain only.
    /// `depth == len` starts from the model output (without the shortcut,
    /// which `backward_input` adds separately).
    fn backward_through_layers(&self, trace: &ForwardTrace, seed: &[f64], depth: usize) -> Vector {
        let mut grad = seed.to_vec();
        for idx in (0..depth).rev() {
            let layer = &self.layers[idx];
            let post = &trace.posts[idx];
            for (g, y) in grad.iter_mut().zip(post.iter()) {
                *g *= layer.activation.derivative_from_output(*y);
            }
            grad = layer.weights.tr_matvec(&grad).into();
        }
        Vector::from_raw(grad)
    }

    /// Gradients of every parameter plus the input, for a scalar loss whose
    /// gradient at the final pre-activation is `final_pre_seed`. Feeding the
    /// pre-activation gradient directly avoids dividing by a saturated
    /// sigmoid derivative during training.
    pub(crate) fn backward_params_from_final_pre(
        &self,
        trace: &ForwardTrace,
        final_pre_seed: &[f64],
        grads: &mut ParamGrads,
        scale: f64,
    ) {
        debug_assert!(self.skip.is_none(), "training never uses shortcut models");
        let mut pre_grad = final_pre_seed.to_vec();
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let below: &[f64] = if idx == 0 {
                trace.input.as_slice()
            } else {
                trace.posts[idx - 1].as_slice()
            };
            let (w_grad, b_grad) = &mut grads.layers[idx];
            for (i, &g) in pre_grad.iter().enumerate() {
                b_grad[i] += scale * g;
                let row_base = i * layer.in_dim();
                for (j, &x) in below.iter().enumerate() {
                    w_grad[row_base + j] += scale * g * x;
                }
            }
            if idx == 0 {
                break;
            }
            let carried = layer.weights.tr_matvec(&pre_grad);
            let post_below = &trace.posts[idx - 1];
            let act_below = self.layers[idx - 1].activation;
            pre_grad = carried
                .iter()
                .zip(post_below.iter())
                .map(|(c, y)| c * act_below.derivative_from_output(*y))
                .collect();
        }
    }

    /// Gradient of the scalar output `output_index` with respect to the input.
    pub fn grad_input(&self, input: &Vector, output_index: usize) -> Result<Vector> {
        if output_index >= self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "output index",
                expected: self.output_dim(),
                actual: output_index,
            });
        }
        let trace = self.forward_trace(input)?;
        let mut seed = vec![0.0; self.output_dim()];
        seed[output_index] = 1.0;
        Ok(self.backward_input(&trace, &seed))
    }

    /// Vector-Jacobian product `J(input)^T seed`. This is how gradients chain
    /// across model boundaries: differentiate the outer model, then pull the
    /// resulting covector through the inner one.
    pub fn vjp(&self, input: &Vector, seed: &Vector) -> Result<Vector> {
        if seed.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "vjp seed",
                expected: self.output_dim(),
                actual: seed.len(),
            });
        }
        let trace = self.forward_trace(input)?;
        Ok(self.backward_input(&trace, seed.as_slice()))
    }
}

pub(crate) struct ForwardTrace {
    pub(crate) input: Vector,
    /// Post-activation of each layer, shortcut not included.
    pub(crate) posts: Vec<Vector>,
    pub(crate) output: Vector,
}

impl ForwardTrace {
    pub(crate) fn output(&self) -> &Vector {
        &self.output
    }
}

/// Flat accumulators for parameter gradients, one (weights, bias) pair per
/// layer, in layer order and row-major like the layers themselves.
pub(crate) struct ParamGrads {
    pub(crate) layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl ParamGrads {
    pub(crate) fn zeros_like(model: &DiffModel) -> Self {
        ParamGrads {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    (
                        vec![0.0; l.out_dim() * l.in_dim()],
                        vec![0.0; l.out_dim()],
                    )
                })
                .collect(),
        }
    }
}

/// Apply one gradient-descent update in place. `weight_decay` is an L2
/// penalty coefficient folded into the weight step; biases never decay.
pub(crate) fn apply_update(
    model: &mut DiffModel,
    grads: &ParamGrads,
    learning_rate: f64,
    weight_decay: f64,
) {
    for (layer, (w_grad, b_grad)) in model.layers.iter_mut().zip(&grads.layers) {
        let cols = layer.weights.cols();
        for i in 0..layer.weights.rows() {
            for j in 0..cols {
                let w = layer.weights.get(i, j);
                let updated = w - learning_rate * (w_grad[i * cols + j] + weight_decay * w);
                layer.weights.set(i, j, updated);
            }
        }
        let bias: Vec<f64> = layer
            .bias
            .iter()
            .zip(b_grad)
            .map(|(b, g)| b - learning_rate * g)
            .collect();
        // Divergence is caught by the per-epoch loss check, not here.
        layer.bias = Vector::from_raw(bias);
    }
}

/// True when every parameter of the model is finite.
pub(crate) fn params_finite(model: &DiffModel) -> bool {
    model.layers.iter().all(|l| {
        l.weights.data().iter().all(|w| w.is_finite()) && l.bias.iter().all(|b| b.is_finite())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_layer(weights: Vec<f64>, rows: usize, cols: usize, activation: Activation) -> DiffModel {
        let layer = Layer::new(
            Matrix::new(rows, cols, weights).unwrap(),
            Vector::zeros(rows),
            activation,
        )
        .unwrap();
        DiffModel::new(vec![layer]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let model = single_layer(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Identity);
        let out = model
            .forward(&Vector::new(vec![1.5, -2.0]).unwrap())
            .unwrap();
        assert_eq!(out.as_slice(), &[1.5, -2.0]);
    }

    #[test]
    fn zero_weight_logistic_gives_one_half() {
        let model = single_layer(vec![0.0, 0.0], 1, 2, Activation::Sigmoid);
        let out = model
            .forward(&Vector::new(vec![3.0, -1.0]).unwrap())
            .unwrap();
        assert_eq!(out.as_slice(), &[0.5]);
    }

    #[test]
    fn logistic_gradient_at_origin_is_quarter_of_weights() {
        // sigmoid'(0) = 1/4, so the input gradient is w/4 = (0.75, 1.0).
        let model = single_layer(vec![3.0, 4.0], 1, 2, Activation::Sigmoid);
        let grad = model
            .grad_input(&Vector::new(vec![0.0, 0.0]).unwrap(), 0)
            .unwrap();
        assert!((grad[0] - 0.75).abs() < 1e-15, "got {}", grad[0]);
        assert!((grad[1] - 1.0).abs() < 1e-15, "got {}", grad[1]);
    }

    #[test]
    fn sigmoid_stays_inside_open_unit_interval() {
        for x in [-1e4_f64, -800.0, -40.0, 0.0, 40.0, 800.0, 1e4] {
            let s = Activation::Sigmoid.apply(x);
            assert!(s > 0.0 && s < 1.0, "sigmoid({x}) = {s} left (0,1)");
        }
    }

    #[test]
    fn forward_is_bit_identical_across_runs() {
        let model = single_layer(vec![0.3, -1.7, 2.2, 0.9], 2, 2, Activation::Tanh);
        let input = Vector::new(vec![0.11, -0.37]).unwrap();
        let a = model.forward(&input).unwrap();
        let b = model.forward(&input).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn shortcut_adds_linear_term_and_its_gradient() {
        // Model: y = tanh(x) + 2x (scalar). Gradient: 1 - tanh(x)^2 + 2.
        let layer = Layer::new(
            Matrix::new(1, 1, vec![1.0]).unwrap(),
            Vector::zeros(1),
            Activation::Tanh,
        )
        .unwrap();
        let model =
            DiffModel::with_skip(vec![layer], Matrix::new(1, 1, vec![2.0]).unwrap()).unwrap();
        let x = Vector::new(vec![0.4]).unwrap();
        let out = model.forward(&x).unwrap();
        assert!((out[0] - (0.4_f64.tanh() + 0.8)).abs() < 1e-15);
        let grad = model.grad_input(&x, 0).unwrap();
        let expected = 1.0 - 0.4_f64.tanh().powi(2) + 2.0;
        assert!((grad[0] - expected).abs() < 1e-15, "got {}", grad[0]);
    }

    #[test]
    fn dimension_mismatches_are_reported() {
        let model = single_layer(vec![1.0, 2.0], 1, 2, Activation::Identity);
        let err = model.forward(&Vector::new(vec![1.0]).unwrap()).unwrap_err();
        assert!(matches!(err, crate::error::Error::DimensionMismatch { .. }));
        let err = model
            .grad_input(&Vector::new(vec![1.0, 2.0]).unwrap(), 3)
            .unwrap_err();
        assert!(matches!(err, crate::error::Error::DimensionMismatch { .. }));
    }
}
