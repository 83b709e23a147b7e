//! Stochastic gradient descent with classical momentum and selective L2
//! weight decay (weights and learned slopes decay; biases and normalization
//! affines do not).

use super::{Network, ParamKind};

#[derive(Debug, Clone, Copy)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl SgdConfig {
    /// Momentum 0.9 and decay 5e-4, the usual small-classifier defaults.
    pub fn with_lr(lr: f64) -> Self {
        SgdConfig { lr, momentum: 0.9, weight_decay: 5e-4 }
    }
}

/// Velocity update `v ← μ·v + g + wd·p`, parameter update `p ← p − lr·v`.
/// Velocity buffers are laid out in the network's parameter visitation
/// order, so an optimizer must only ever step the network it was built for.
#[derive(Debug, Clone)]
pub struct Sgd {
    cfg: SgdConfig,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(net: &Network, cfg: SgdConfig) -> Self {
        let mut velocity = Vec::new();
        for layer in net.layers() {
            layer.visit_params(&mut |_, p| velocity.push(vec![0.0; p.len()]));
        }
        Sgd { cfg, velocity }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    pub fn lr(&self) -> f64 {
        self.cfg.lr
    }

    /// Apply one update from the gradients currently stored in the network.
    pub fn step(&mut self, net: &mut Network) {
        let cfg = self.cfg;
        let mut slot = 0;
        for layer in &mut net.layers {
            layer.visit_param_grads(&mut |kind, params, grads| {
                let v = &mut self.velocity[slot];
                slot += 1;
                debug_assert_eq!(v.len(), params.len());
                let decay = match kind {
                    ParamKind::Weight | ParamKind::Slope => cfg.weight_decay,
                    ParamKind::Bias | ParamKind::Norm => 0.0,
                };
                for i in 0..params.len() {
                    v[i] = cfg.momentum * v[i] + grads[i] + decay * params[i];
                    params[i] -= cfg.lr * v[i];
                }
            });
        }
    }
}
