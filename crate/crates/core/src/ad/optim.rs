use serde::{Deserialize, Serialize};

use crate::ad::Matrix;
use crate::error::{shape_err, DmacError, Result};

/// RMSprop hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub decay_rho: f64,
    pub epsilon_stab: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            decay_rho: 0.99,
            epsilon_stab: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DmacError::Config {
                field: "learning_rate".into(),
                reason: format!("must be positive, got {}", self.learning_rate),
            });
        }
        if !(self.decay_rho > 0.0 && self.decay_rho < 1.0) {
            return Err(DmacError::Config {
                field: "decay_rho".into(),
                reason: format!("must lie in (0, 1), got {}", self.decay_rho),
            });
        }
        if !(self.epsilon_stab > 0.0) {
            return Err(DmacError::Config {
                field: "epsilon_stab".into(),
                reason: format!("must be positive, got {}", self.epsilon_stab),
            });
        }
        Ok(())
    }
}

/// RMSprop with one squared-gradient accumulator per parameter tensor.
///
/// `v ← ρ·v + (1−ρ)·g²` then `θ ← θ − η·g / (√v + ε)`, elementwise.
#[derive(Debug, Clone)]
pub struct RmsProp {
    cfg: OptimizerConfig,
    accum: Vec<Matrix>,
}

impl RmsProp {
    pub fn new(cfg: OptimizerConfig) -> Self {
        Self {
            cfg,
            accum: Vec::new(),
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn accumulators(&self) -> &[Matrix] {
        &self.accum
    }

    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != grads.len() {
            return shape_err(
                "rmsprop",
                format!("{} parameters but {} gradients", params.len(), grads.len()),
            );
        }
        if self.accum.is_empty() {
            self.accum = params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect();
        }
        if self.accum.len() != params.len() {
            return shape_err(
                "rmsprop",
                format!(
                    "{} accumulators for {} parameters",
                    self.accum.len(),
                    params.len()
                ),
            );
        }
        let OptimizerConfig {
            learning_rate: lr,
            decay_rho: rho,
            epsilon_stab: eps,
        } = self.cfg;
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.accum) {
            p.check_same_shape(g, "rmsprop")?;
            p.check_same_shape(v, "rmsprop")?;
            for ((theta, &gi), vi) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(v.as_mut_slice())
            {
                *vi = rho * *vi + (1.0 - rho) * gi * gi;
                *theta -= lr * gi / (vi.sqrt() + eps);
            }
        }
        Ok(())
    }
}
