use serde::{Deserialize, Serialize};

use super::{Gradients, ModelParams};
use crate::error::{Error, Result};

/// Heavy-ball SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::contract(format!("learning rate {} invalid", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::contract(format!(
                "momentum {} not in [0, 1)",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::contract(format!(
                "weight decay {} invalid",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

impl ModelParams {
    /// `v <- momentum * v + g + weight_decay * theta; theta <- theta - lr * v`.
    ///
    /// Nothing is modified when the gradients are malformed.
    pub fn sgd_step(&mut self, grads: &Gradients, cfg: &SgdConfig) -> Result<()> {
        cfg.validate()?;
        if grads.layers.len() != self.layers().len()
            || grads.layers.iter().zip(self.layers()).any(|(g, l)| {
                g.weights.len() != l.weights.len() || g.biases.len() != l.biases.len()
            })
        {
            return Err(Error::shape("gradient shapes do not match the model"));
        }
        if !grads.all_finite() {
            return Err(Error::Numeric("gradient contains non-finite values".into()));
        }
        for (layer, g) in self.layers_mut().iter_mut().zip(&grads.layers) {
            update(
                &mut layer.weights,
                &mut layer.weight_velocity,
                &g.weights,
                cfg,
            );
            update(&mut layer.biases, &mut layer.bias_velocity, &g.biases, cfg);
        }
        Ok(())
    }
}

fn update(params: &mut [f64], velocity: &mut [f64], grads: &[f64], cfg: &SgdConfig) {
    for ((p, v), &g) in params.iter_mut().zip(velocity.iter_mut()).zip(grads) {
        *v = cfg.momentum * *v + g + cfg.weight_decay * *p;
        *p -= cfg.lr * *v;
    }
}
