//! Minimal fully-connected network stack used by both transmission schemes.
//!
//! Everything is 64-bit, batch-first (`rows = samples`), and deterministic:
//! initialization draws from a caller-supplied seeded generator, forward
//! passes in eval mode are pure, and training state (momentum buffers,
//! running statistics) lives in plain fields that serialize bit-exactly.

mod checkpoint;
mod layers;
mod loss;
mod optim;

pub use checkpoint::{read_network, write_network, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{BatchNorm, Dense, LeakyRelu, ParamKind, Prelu};
pub use loss::{cross_entropy, l1_loss};
pub use optim::{Sgd, SgdConfig};

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input has {got} features, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("backward needs a cached training-mode forward pass")]
    NoForwardCache,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Forward-pass mode. `Train` caches activations for backprop and updates
/// batch-norm running statistics; `Eval` is pure and uses the running
/// statistics instead of batch statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One network layer. An enum rather than a trait object so checkpoints can
/// reconstruct the exact architecture and tests can inspect it.
#[derive(Debug, Clone)]
pub enum Layer {
    Dense(Dense),
    BatchNorm(BatchNorm),
    LeakyRelu(LeakyRelu),
    Prelu(Prelu),
}

impl Layer {
    pub fn forward(&mut self, x: &Array2<f64>, mode: Mode) -> Result<Array2<f64>, NnError> {
        match self {
            Layer::Dense(l) => l.forward(x, mode),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::LeakyRelu(l) => l.forward(x, mode),
            Layer::Prelu(l) => l.forward(x, mode),
        }
    }

    pub fn infer(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        match self {
            Layer::Dense(l) => l.infer(x),
            Layer::BatchNorm(l) => l.infer(x),
            Layer::LeakyRelu(l) => l.infer(x),
            Layer::Prelu(l) => l.infer(x),
        }
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        match self {
            Layer::Dense(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::LeakyRelu(l) => l.backward(dy),
            Layer::Prelu(l) => l.backward(dy),
        }
    }

    pub(crate) fn visit_params(&self, f: &mut dyn FnMut(ParamKind, &[f64])) {
        match self {
            Layer::Dense(l) => l.visit_params(f),
            Layer::BatchNorm(l) => l.visit_params(f),
            Layer::LeakyRelu(_) => {}
            Layer::Prelu(l) => l.visit_params(f),
        }
    }

    pub(crate) fn visit_params_mut(&mut self, f: &mut dyn FnMut(ParamKind, &mut [f64])) {
        match self {
            Layer::Dense(l) => l.visit_params_mut(f),
            Layer::BatchNorm(l) => l.visit_params_mut(f),
            Layer::LeakyRelu(_) => {}
            Layer::Prelu(l) => l.visit_params_mut(f),
        }
    }

    /// Parameters and their gradients, tensor by tensor, for the optimizer.
    pub(crate) fn visit_param_grads(&mut self, f: &mut dyn FnMut(ParamKind, &mut [f64], &[f64])) {
        match self {
            Layer::Dense(l) => l.visit_param_grads(f),
            Layer::BatchNorm(l) => l.visit_param_grads(f),
            Layer::LeakyRelu(_) => {}
            Layer::Prelu(l) => l.visit_param_grads(f),
        }
    }
}

/// A plain sequence of layers.
#[derive(Debug, Clone, Default)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Network { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Run the batch through every layer. In `Train` mode each layer caches
    /// what its backward pass needs.
    pub fn forward(&mut self, x: &Array2<f64>, mode: Mode) -> Result<Array2<f64>, NnError> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, mode)?;
        }
        Ok(h)
    }

    /// Pure eval-mode pass; shareable across threads since nothing mutates.
    pub fn infer(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    /// Backpropagate the loss gradient through the cached forward pass,
    /// filling every layer's parameter gradients and returning the gradient
    /// with respect to the network input.
    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let mut g = dy.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        for l in &self.layers {
            l.visit_params(&mut |_, p| n += p.len());
        }
        n
    }

    pub fn get_param(&self, idx: usize) -> f64 {
        let mut seen = 0;
        let mut out = f64::NAN;
        for l in &self.layers {
            l.visit_params(&mut |_, p| {
                if idx >= seen && idx < seen + p.len() {
                    out = p[idx - seen];
                }
                seen += p.len();
            });
        }
        assert!(!out.is_nan() || idx < seen, "parameter index {idx} out of range");
        out
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        let mut seen = 0;
        let mut hit = false;
        for l in &mut self.layers {
            l.visit_params_mut(&mut |_, p| {
                if idx >= seen && idx < seen + p.len() {
                    p[idx - seen] = value;
                    hit = true;
                }
                seen += p.len();
            });
        }
        assert!(hit, "parameter index {idx} out of range");
    }

    /// Parameter gradients flattened in visitation order (after a backward
    /// pass).
    pub fn grads_flat(&mut self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            l.visit_param_grads(&mut |_, _, g| out.extend_from_slice(g));
        }
        out
    }
}

/// Compare every analytic parameter gradient of `loss ∘ net` against central
/// finite differences with step `h`, returning the worst guarded relative
/// error. The loss closure must return the scalar loss and its gradient with
/// respect to the network output.
///
/// Both gradients near zero (under `1e-7`) count as agreeing, since the
/// relative error of two numerical zeros is meaningless.
pub fn gradient_check(
    net: &mut Network,
    x: &Array2<f64>,
    loss: &dyn Fn(&Array2<f64>) -> (f64, Array2<f64>),
    h: f64,
) -> f64 {
    let out = net.forward(x, Mode::Train).expect("forward");
    let (_, dy) = loss(&out);
    net.backward(&dy).expect("backward");
    let analytic = net.grads_flat();

    let mut worst = 0.0f64;
    for i in 0..net.param_count() {
        let saved = net.get_param(i);
        net.set_param(i, saved + h);
        let (lp, _) = loss(&net.forward(x, Mode::Train).expect("forward"));
        net.set_param(i, saved - h);
        let (lm, _) = loss(&net.forward(x, Mode::Train).expect("forward"));
        net.set_param(i, saved);
        let fd = (lp - lm) / (2.0 * h);
        let a = analytic[i];
        let denom = a.abs().max(fd.abs());
        if denom > 1e-7 {
            worst = worst.max((a - fd).abs() / denom);
        }
    }
    worst
}
