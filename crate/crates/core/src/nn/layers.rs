//! Layer implementations: affine, batch normalization, and the two leaky
//! rectifier variants (fixed slope and learned scalar slope).

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::{Mode, NnError};

/// What a parameter tensor is, so the optimizer can apply weight decay to
/// weights and learned slopes but not to biases or normalization affines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Norm,
    Slope,
}

/// Affine layer `y = x Wᵀ + b` with `W` stored as `(out, in)`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub(crate) w: Array2<f64>,
    pub(crate) b: Array1<f64>,
    dw: Array2<f64>,
    db: Array1<f64>,
    cache_x: Option<Array2<f64>>,
}

impl Dense {
    /// Uniform `±1/√fan_in` initialization for both weights and bias.
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-bound..bound));
        let b = Array1::from_shape_fn(out_dim, |_| rng.gen_range(-bound..bound));
        Dense::from_parts(w, b)
    }

    pub fn from_parts(w: Array2<f64>, b: Array1<f64>) -> Self {
        let (dw, db) = (Array2::zeros(w.dim()), Array1::zeros(b.len()));
        Dense { w, b, dw, db, cache_x: None }
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        if x.ncols() != self.in_dim() {
            return Err(NnError::ShapeMismatch { expected: self.in_dim(), got: x.ncols() });
        }
        Ok(x.dot(&self.w.t()) + &self.b)
    }

    pub fn forward(&mut self, x: &Array2<f64>, _mode: Mode) -> Result<Array2<f64>, NnError> {
        let y = self.apply(x)?;
        self.cache_x = Some(x.clone());
        Ok(y)
    }

    pub fn infer(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        self.apply(x)
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let x = self.cache_x.as_ref().ok_or(NnError::NoForwardCache)?;
        if dy.ncols() != self.out_dim() || dy.nrows() != x.nrows() {
            return Err(NnError::ShapeMismatch { expected: self.out_dim(), got: dy.ncols() });
        }
        self.dw = dy.t().dot(x);
        self.db = dy.sum_axis(Axis(0));
        Ok(dy.dot(&self.w))
    }

    pub(crate) fn visit_params(&self, f: &mut dyn FnMut(ParamKind, &[f64])) {
        f(ParamKind::Weight, self.w.as_slice().expect("contiguous"));
        f(ParamKind::Bias, self.b.as_slice().expect("contiguous"));
    }

    pub(crate) fn visit_params_mut(&mut self, f: &mut dyn FnMut(ParamKind, &mut [f64])) {
        f(ParamKind::Weight, self.w.as_slice_mut().expect("contiguous"));
        f(ParamKind::Bias, self.b.as_slice_mut().expect("contiguous"));
    }

    pub(crate) fn visit_param_grads(&mut self, f: &mut dyn FnMut(ParamKind, &mut [f64], &[f64])) {
        f(
            ParamKind::Weight,
            self.w.as_slice_mut().expect("contiguous"),
            self.dw.as_slice().expect("contiguous"),
        );
        f(
            ParamKind::Bias,
            self.b.as_slice_mut().expect("contiguous"),
            self.db.as_slice().expect("contiguous"),
        );
    }
}

/// Per-feature batch normalization with learned affine and exponential
/// running statistics for eval mode. Batch variance is the biased (divide by
/// n) estimator, and the same estimator feeds the running average.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub(crate) gamma: Array1<f64>,
    pub(crate) beta: Array1<f64>,
    pub(crate) running_mean: Array1<f64>,
    pub(crate) running_var: Array1<f64>,
    pub(crate) momentum: f64,
    pub(crate) eps: f64,
    dgamma: Array1<f64>,
    dbeta: Array1<f64>,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        BatchNorm::from_parts(
            Array1::ones(dim),
            Array1::zeros(dim),
            Array1::zeros(dim),
            Array1::ones(dim),
            0.1,
            1e-5,
        )
    }

    pub fn from_parts(
        gamma: Array1<f64>,
        beta: Array1<f64>,
        running_mean: Array1<f64>,
        running_var: Array1<f64>,
        momentum: f64,
        eps: f64,
    ) -> Self {
        let dim = gamma.len();
        BatchNorm {
            gamma,
            beta,
            running_mean,
            running_var,
            momentum,
            eps,
            dgamma: Array1::zeros(dim),
            dbeta: Array1::zeros(dim),
            cache: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Array2<f64>) -> Result<(), NnError> {
        if x.ncols() != self.dim() {
            return Err(NnError::ShapeMismatch { expected: self.dim(), got: x.ncols() });
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Array2<f64>, mode: Mode) -> Result<Array2<f64>, NnError> {
        if mode == Mode::Eval {
            return self.infer(x);
        }
        self.check(x)?;
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).expect("nonempty batch");
        let var = x.map_axis(Axis(0), |col| {
            let m = col.sum() / n;
            col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
        });
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let xhat = (x - &mean) * &inv_std;
        let y = &xhat * &self.gamma + &self.beta;
        self.running_mean = &self.running_mean * (1.0 - self.momentum) + &mean * self.momentum;
        self.running_var = &self.running_var * (1.0 - self.momentum) + &var * self.momentum;
        self.cache = Some(BnCache { xhat, inv_std });
        Ok(y)
    }

    pub fn infer(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        self.check(x)?;
        let inv_std = self.running_var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let xhat = (x - &self.running_mean) * &inv_std;
        Ok(&xhat * &self.gamma + &self.beta)
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::NoForwardCache)?;
        if dy.dim() != cache.xhat.dim() {
            return Err(NnError::ShapeMismatch { expected: self.dim(), got: dy.ncols() });
        }
        self.dgamma = (dy * &cache.xhat).sum_axis(Axis(0));
        self.dbeta = dy.sum_axis(Axis(0));
        // dx = inv_std · (dxhat − mean(dxhat) − xhat·mean(dxhat·xhat))
        let dxhat = dy * &self.gamma;
        let mean_dxhat = dxhat.mean_axis(Axis(0)).expect("nonempty batch");
        let mean_dxhat_xhat = (&dxhat * &cache.xhat).mean_axis(Axis(0)).expect("nonempty batch");
        let dx = (dxhat - &mean_dxhat - &cache.xhat * &mean_dxhat_xhat) * &cache.inv_std;
        Ok(dx)
    }

    pub(crate) fn visit_params(&self, f: &mut dyn FnMut(ParamKind, &[f64])) {
        f(ParamKind::Norm, self.gamma.as_slice().expect("contiguous"));
        f(ParamKind::Norm, self.beta.as_slice().expect("contiguous"));
    }

    pub(crate) fn visit_params_mut(&mut self, f: &mut dyn FnMut(ParamKind, &mut [f64])) {
        f(ParamKind::Norm, self.gamma.as_slice_mut().expect("contiguous"));
        f(ParamKind::Norm, self.beta.as_slice_mut().expect("contiguous"));
    }

    pub(crate) fn visit_param_grads(&mut self, f: &mut dyn FnMut(ParamKind, &mut [f64], &[f64])) {
        f(
            ParamKind::Norm,
            self.gamma.as_slice_mut().expect("contiguous"),
            self.dgamma.as_slice().expect("contiguous"),
        );
        f(
            ParamKind::Norm,
            self.beta.as_slice_mut().expect("contiguous"),
            self.dbeta.as_slice().expect("contiguous"),
        );
    }
}

/// Elementwise `max(x, 0.01 x)`.
#[derive(Debug, Clone, Default)]
pub struct LeakyRelu {
    cache_x: Option<Array2<f64>>,
}

pub(crate) const LEAKY_SLOPE: f64 = 0.01;

impl LeakyRelu {
    pub fn new() -> Self {
        LeakyRelu { cache_x: None }
    }

    pub fn forward(&mut self, x: &Array2<f64>, _mode: Mode) -> Result<Array2<f64>, NnError> {
        self.cache_x = Some(x.clone());
        self.infer(x)
    }

    pub fn infer(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        Ok(x.mapv(|v| if v >= 0.0 { v } else { LEAKY_SLOPE * v }))
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let x = self.cache_x.as_ref().ok_or(NnError::NoForwardCache)?;
        if dy.dim() != x.dim() {
            return Err(NnError::ShapeMismatch { expected: x.ncols(), got: dy.ncols() });
        }
        Ok(ndarray::Zip::from(dy)
            .and(x)
            .map_collect(|&g, &v| if v >= 0.0 { g } else { LEAKY_SLOPE * g }))
    }
}

/// Leaky rectifier with one learned slope shared across all features.
#[derive(Debug, Clone)]
pub struct Prelu {
    pub(crate) slope: [f64; 1],
    dslope: [f64; 1],
    cache_x: Option<Array2<f64>>,
}

impl Prelu {
    pub fn new(slope: f64) -> Self {
        Prelu { slope: [slope], dslope: [0.0], cache_x: None }
    }

    pub fn slope(&self) -> f64 {
        self.slope[0]
    }

    pub fn forward(&mut self, x: &Array2<f64>, _mode: Mode) -> Result<Array2<f64>, NnError> {
        self.cache_x = Some(x.clone());
        self.infer(x)
    }

    pub fn infer(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let a = self.slope[0];
        Ok(x.mapv(|v| if v >= 0.0 { v } else { a * v }))
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let x = self.cache_x.as_ref().ok_or(NnError::NoForwardCache)?;
        if dy.dim() != x.dim() {
            return Err(NnError::ShapeMismatch { expected: x.ncols(), got: dy.ncols() });
        }
        let a = self.slope[0];
        self.dslope[0] = ndarray::Zip::from(dy)
            .and(x)
            .fold(0.0, |acc, &g, &v| if v >= 0.0 { acc } else { acc + g * v });
        Ok(ndarray::Zip::from(dy)
            .and(x)
            .map_collect(|&g, &v| if v >= 0.0 { g } else { a * g }))
    }

    pub(crate) fn visit_params(&self, f: &mut dyn FnMut(ParamKind, &[f64])) {
        f(ParamKind::Slope, &self.slope);
    }

    pub(crate) fn visit_params_mut(&mut self, f: &mut dyn FnMut(ParamKind, &mut [f64])) {
        f(ParamKind::Slope, &mut self.slope);
    }

    pub(crate) fn visit_param_grads(&mut self, f: &mut dyn FnMut(ParamKind, &mut [f64], &[f64])) {
        f(ParamKind::Slope, &mut self.slope, &self.dslope);
    }
}
