use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transformer::{OptimizerState, Params};

/// AdamW with linear warmup followed by cosine decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay, applied to matrices only.
    pub weight_decay: f64,
    pub warmup_steps: usize,
    /// Floor of the cosine schedule as a fraction of `lr0`.
    pub min_lr_frac: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr0: 3e-4,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.1,
            warmup_steps: 0,
            min_lr_frac: 0.0,
            grad_clip: Some(1.0),
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr0 > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && (0.0..=1.0).contains(&self.min_lr_frac)
            && self.grad_clip.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }

    /// Learning rate for 0-based `step` out of `total` steps.
    pub fn lr(&self, step: usize, total: usize) -> f64 {
        if step < self.warmup_steps {
            return self.lr0 * (step + 1) as f64 / self.warmup_steps as f64;
        }
        let span = total.saturating_sub(self.warmup_steps).max(1);
        let t = (step - self.warmup_steps) as f64 / span as f64;
        let floor = self.lr0 * self.min_lr_frac;
        floor + (self.lr0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * t.min(1.0)).cos())
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: OptimConfig,
    pub state: OptimizerState,
    decay: Vec<bool>,
}

impl AdamW {
    pub fn new(config: OptimConfig, params: &Params<f32>) -> Self {
        let n = params.data.len();
        Self::with_state(
            config,
            params,
            OptimizerState {
                step: 0,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
        )
    }

    pub fn with_state(config: OptimConfig, params: &Params<f32>, state: OptimizerState) -> Self {
        let mut decay = vec![false; params.data.len()];
        for t in &params.layout.tensors {
            if t.shape.len() == 2 {
                decay[t.offset..t.offset + t.len()].fill(true);
            }
        }
        Self { config, state, decay }
    }

    /// Applies one update in place and returns the pre-clip gradient norm.
    pub fn step(&mut self, params: &mut Params<f32>, grad: &Params<f32>, lr: f64) -> Result<f64> {
        if grad.data.len() != params.data.len() || self.state.m.len() != params.data.len() {
            return Err(Error::Shape("optimizer state does not match the parameters".into()));
        }
        let c = self.config;
        let norm = grad.data.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
        let scale = match c.grad_clip {
            Some(clip) if norm > clip => clip / norm,
            _ => 1.0,
        };
        self.state.step += 1;
        let t = self.state.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (c.beta1 as f32, c.beta2 as f32);
        let step_size = (lr / bc1) as f32;
        let inv_bc2 = (1.0 / bc2) as f32;
        let decay = (lr * c.weight_decay) as f32;
        let eps = c.eps as f32;
        let s = scale as f32;
        for i in 0..params.data.len() {
            let g = grad.data[i] * s;
            let m = &mut self.state.m[i];
            let v = &mut self.state.v[i];
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let w = &mut params.data[i];
            if self.decay[i] {
                *w -= decay * *w;
            }
            *w -= step_size * *m / ((*v * inv_bc2).sqrt() + eps);
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_schedule_endpoints() {
        let c = OptimConfig {
            lr0: 1.0,
            warmup_steps: 10,
            min_lr_frac: 0.1,
            ..Default::default()
        };
        assert!((c.lr(0, 110) - 0.1).abs() < 1e-12);
        assert!((c.lr(9, 110) - 1.0).abs() < 1e-12);
        assert!((c.lr(10, 110) - 1.0).abs() < 1e-12);
        assert!((c.lr(60, 110) - 0.55).abs() < 1e-12);
        assert!((c.lr(110, 110) - 0.1).abs() < 1e-12);
    }
}
