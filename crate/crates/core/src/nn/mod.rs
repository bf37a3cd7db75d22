//! Dense feed-forward classifier with hand-written backpropagation.
//!
//! Hidden layers use ReLU, the output layer is linear and produces logits.
//! Weights are stored row-major with shape `(out_dim, in_dim)`.

mod checkpoint;
mod gradcheck;
mod loss;
mod matrix;
mod optim;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gradcheck::{grad_check, loss_value, standard_gradcheck, GRADCHECK_STEP};
pub use loss::{
    loss_cross_entropy, loss_kl, loss_mse_logits, softmax, softmax_rows, LossSpec, Targets,
    PROB_EPS,
};
pub use matrix::Matrix;
pub use optim::SgdConfig;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

/// One affine layer plus its momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub weight_velocity: Vec<f64>,
    pub bias_velocity: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            weight_velocity: vec![0.0; in_dim * out_dim],
            bias_velocity: vec![0.0; out_dim],
        }
    }
}

/// Parameters of a multilayer perceptron together with optimizer momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: Vec<usize>,
    layers: Vec<Dense>,
}

impl ModelParams {
    /// All-zero parameters for the given layer sizes `[d, hidden.., k]`.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self {
            dims: dims.to_vec(),
            layers,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(dims)?;
        for layer in &mut model.layers {
            let limit = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| Error::contract(format!("init range: {e}")))?;
            for w in &mut layer.weights {
                *w = dist.sample(rng);
            }
        }
        Ok(model)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.dims.last().expect("validated dims")
    }

    /// Width of the representation fed into the output layer.
    pub fn penultimate_dim(&self) -> usize {
        self.dims[self.dims.len() - 2]
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Drops the momentum buffers.
    pub fn reset_momentum(&mut self) {
        for l in &mut self.layers {
            l.weight_velocity.iter_mut().for_each(|v| *v = 0.0);
            l.bias_velocity.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights
                .iter()
                .chain(&l.biases)
                .chain(&l.weight_velocity)
                .chain(&l.bias_velocity)
                .all(|v| v.is_finite())
        })
    }

    /// Visits every trainable scalar in layer order (weights before biases).
    pub(crate) fn param_mut(&mut self, flat: usize) -> &mut f64 {
        let mut idx = flat;
        for l in &mut self.layers {
            if idx < l.weights.len() {
                return &mut l.weights[idx];
            }
            idx -= l.weights.len();
            if idx < l.biases.len() {
                return &mut l.biases[idx];
            }
            idx -= l.biases.len();
        }
        panic!("parameter index {flat} out of range");
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::shape(format!(
            "need at least input and output dims, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::shape(format!("layer dims must be positive: {dims:?}")));
    }
    Ok(())
}

/// Intermediate values of a forward pass, kept for backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `activations[0]` is the input; `activations[l]` feeds layer `l`.
    activations: Vec<Matrix>,
    /// Pre-activation output of each layer; the last one is the logits.
    pre_activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn logits(&self) -> &Matrix {
        self.pre_activations.last().expect("at least one layer")
    }

    pub fn penultimate(&self) -> &Matrix {
        self.activations.last().expect("input retained")
    }

    pub fn batch_size(&self) -> usize {
        self.activations[0].rows()
    }

    pub fn probabilities(&self) -> Matrix {
        softmax_rows(self.logits())
    }
}

fn affine(input: &Matrix, layer: &Dense) -> Matrix {
    let mut out = Matrix::zeros(input.rows(), layer.out_dim);
    for r in 0..input.rows() {
        let x = input.row(r);
        let z = out.row_mut(r);
        for (o, zo) in z.iter_mut().enumerate() {
            let w = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut acc = layer.biases[o];
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            *zo = acc;
        }
    }
    out
}

/// Runs the network on a batch of rows.
pub fn forward(model: &ModelParams, x: &Matrix) -> Result<ForwardTrace> {
    if x.cols() != model.input_dim() && x.rows() > 0 {
        return Err(Error::shape(format!(
            "input has {} columns, model expects {}",
            x.cols(),
            model.input_dim()
        )));
    }
    if !x.all_finite() {
        return Err(Error::Numeric("input batch contains non-finite values".into()));
    }
    let x = if x.rows() == 0 {
        Matrix::zeros(0, model.input_dim())
    } else {
        x.clone()
    };
    let n_layers = model.layers.len();
    let mut activations = Vec::with_capacity(n_layers);
    let mut pre_activations = Vec::with_capacity(n_layers);
    activations.push(x);
    for (i, layer) in model.layers.iter().enumerate() {
        let z = affine(activations.last().unwrap(), layer);
        if i + 1 < n_layers {
            let mut a = z.clone();
            for r in 0..a.rows() {
                a.row_mut(r).iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(a);
        }
        pre_activations.push(z);
    }
    Ok(ForwardTrace {
        activations,
        pre_activations,
    })
}

/// Gradient of a loss with respect to every weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }
}

/// Backpropagates the loss described by `spec` through `trace`.
pub fn backward(
    model: &ModelParams,
    trace: &ForwardTrace,
    spec: &LossSpec,
    targets: &Targets,
) -> Result<(f64, Gradients)> {
    if trace.pre_activations.len() != model.layers.len()
        || trace.logits().cols() != model.num_classes()
    {
        return Err(Error::contract("trace was not produced by this model"));
    }
    let (loss, mut delta) = spec.evaluate(trace.logits(), targets)?;
    backward_from_logit_grad(model, trace, &mut delta).map(|g| (loss, g))
}

pub(crate) fn backward_from_logit_grad(
    model: &ModelParams,
    trace: &ForwardTrace,
    delta: &mut Matrix,
) -> Result<Gradients> {
    let batch = trace.batch_size();
    let mut grads: Vec<LayerGradient> = Vec::with_capacity(model.layers.len());
    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let input = &trace.activations[l];
        let mut gw = vec![0.0; layer.weights.len()];
        let mut gb = vec![0.0; layer.out_dim];
        for r in 0..batch {
            let d = delta.row(r);
            let a = input.row(r);
            for (o, &dv) in d.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                gb[o] += dv;
                let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &ai) in row.iter_mut().zip(a) {
                    *g += dv * ai;
                }
            }
        }
        grads.push(LayerGradient {
            weights: gw,
            biases: gb,
        });
        if l > 0 {
            let z_prev = &trace.pre_activations[l - 1];
            let mut next = Matrix::zeros(batch, layer.in_dim);
            for r in 0..batch {
                let d = delta.row(r);
                let zp = z_prev.row(r);
                let out = next.row_mut(r);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    let w = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (acc, &wi) in out.iter_mut().zip(w) {
                        *acc += dv * wi;
                    }
                }
                for (acc, &z) in out.iter_mut().zip(zp) {
                    if z <= 0.0 {
                        *acc = 0.0;
                    }
                }
            }
            *delta = next;
        }
    }
    grads.reverse();
    Ok(Gradients { layers: grads })
}

/// Convenience: forward, then backward.
pub fn loss_and_gradients(
    model: &ModelParams,
    x: &Matrix,
    spec: &LossSpec,
    targets: &Targets,
) -> Result<(f64, Gradients)> {
    let trace = forward(model, x)?;
    backward(model, &trace, spec, targets)
}

/// Predicted class per row; ties go to the smaller class index.
pub fn predict(model: &ModelParams, x: &Matrix) -> Result<Vec<usize>> {
    let trace = forward(model, x)?;
    Ok(trace.logits().iter_rows().map(argmax).collect())
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_model_gives_zero_logits() {
        let model = ModelParams::zeros(&[3, 5, 4]).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [0.5, 0.5, 9.0]]).unwrap();
        let trace = forward(&model, &x).unwrap();
        assert!(trace.logits().as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(trace.logits().rows(), 2);
        assert_eq!(trace.penultimate().cols(), 5);
    }

    #[test]
    fn identity_single_layer() {
        let mut model = ModelParams::zeros(&[2, 2]).unwrap();
        model.layers_mut()[0].weights = vec![1.0, 0.0, 0.0, 1.0];
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let trace = forward(&model, &x).unwrap();
        assert_eq!(trace.logits().row(0), &[1.0, 2.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let model = ModelParams::zeros(&[3, 2]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(forward(&model, &x), Err(Error::Shape(_))));
        assert!(ModelParams::zeros(&[3]).is_err());
        assert!(ModelParams::zeros(&[3, 0, 2]).is_err());
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let model = ModelParams::init(&[4, 8, 3], &mut seeded(3)).unwrap();
        let x = Matrix::from_rows(&[[0.1, -0.2, 0.3, 0.4], [1.0, 2.0, -3.0, 0.0]]).unwrap();
        assert_eq!(forward(&model, &x).unwrap(), forward(&model, &x).unwrap());
    }

    #[test]
    fn argmax_ties_to_smaller_index() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
    }

    #[test]
    fn init_respects_glorot_bound() {
        let model = ModelParams::init(&[10, 6], &mut seeded(1)).unwrap();
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(model.layers()[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(model.layers()[0].biases.iter().all(|&b| b == 0.0));
    }
}
