use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `lr0 * (1 + cos(pi * epoch / total)) / 2`
    Cosine,
    /// `lr0 * gamma^(milestones passed)`
    Step { milestones: Vec<usize>, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub schedule: Schedule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            schedule: Schedule::Cosine,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if let Schedule::Step { gamma, .. } = self.schedule {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::InvalidArgument(format!("gamma must be > 0, got {gamma}")));
            }
        }
        Ok(())
    }
}

pub fn lr_at(schedule: &Schedule, epoch: usize, total_epochs: usize, initial_lr: f64) -> f64 {
    match schedule {
        Schedule::Cosine => {
            if total_epochs == 0 {
                return initial_lr;
            }
            let t = epoch as f64 / total_epochs as f64;
            initial_lr * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        }
        Schedule::Step { milestones, gamma } => {
            let passed = milestones.iter().filter(|&&m| epoch >= m).count();
            initial_lr * gamma.powi(passed as i32)
        }
    }
}

/// One SGD update with momentum and decoupled-from-bias weight decay:
/// `v <- mu v + g + wd theta`, `theta <- theta - lr v`. Clears gradients.
pub fn sgd_step(net: &mut Network, opt: &OptimizerConfig, lr_now: f64) {
    for p in net.params_mut() {
        let wd = if p.decay { opt.weight_decay } else { 0.0 };
        let mu = opt.momentum;
        for ((v, g), theta) in p
            .velocity
            .iter_mut()
            .zip(p.grad.iter_mut())
            .zip(p.value.iter_mut())
        {
            *v = mu * *v + *g + wd * *theta;
            *theta -= lr_now * *v;
            *g = 0.0;
        }
    }
    net.bump_version();
}
