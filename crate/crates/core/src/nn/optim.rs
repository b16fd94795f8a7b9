use serde::{Deserialize, Serialize};

use super::params::{GradStore, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Linear warmup of the learning rate, applied once per epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub lr_start: f64,
    pub lr_end: f64,
    pub warmup_epochs: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            lr_start: 1e-7,
            lr_end: 1e-6,
            warmup_epochs: 850,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_start <= self.lr_end) || self.lr_start < 0.0 {
            return Err(Error::Config(format!(
                "lr_start {} must not exceed lr_end {}",
                self.lr_start, self.lr_end
            )));
        }
        if self.warmup_epochs == 0 {
            return Err(Error::Config("warmup_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Learning rate for `epoch`: `lr_start` at 0, `lr_end` from `warmup_epochs` on.
pub fn warmup_lr(epoch: usize, schedule: &LrSchedule) -> f64 {
    let w = schedule.warmup_epochs.max(1);
    if epoch >= w {
        return schedule.lr_end;
    }
    let t = epoch as f64 / w as f64;
    schedule.lr_start + (schedule.lr_end - schedule.lr_start) * t
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(1.0),
        }
    }
}

/// Adaptive-moment optimizer state for one [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        Self {
            cfg,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update with `grads` already averaged over the batch.
    pub fn step(&mut self, store: &mut ParamStore, grads: &GradStore, lr: f64) {
        self.step += 1;
        let clip = match self.cfg.clip_norm {
            Some(max) => {
                let norm = grads.global_norm();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        let ids: Vec<_> = store.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let g = grads.tensors()[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = store.get_mut(id).data_mut();
            for j in 0..p.len() {
                let gj = g[j] * clip;
                m[j] = b1 * m[j] + (1.0 - b1) * gj;
                v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] -= lr * mh / (vh.sqrt() + self.cfg.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_examples() {
        let s = LrSchedule {
            lr_start: 1e-7,
            lr_end: 1e-6,
            warmup_epochs: 100,
        };
        assert_eq!(warmup_lr(0, &s), 1e-7);
        assert_eq!(warmup_lr(100, &s), 1e-6);
        assert_eq!(warmup_lr(250, &s), 1e-6);
        assert!((warmup_lr(50, &s) - 5.5e-7).abs() < 1e-20);
    }

    #[test]
    fn warmup_is_monotone() {
        let s = LrSchedule {
            lr_start: 1e-7,
            lr_end: 1e-6,
            warmup_epochs: 37,
        };
        let lrs: Vec<f64> = (0..60).map(|e| warmup_lr(e, &s)).collect();
        assert!(lrs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn schedule_validation() {
        let bad = LrSchedule {
            lr_start: 1e-3,
            lr_end: 1e-4,
            warmup_epochs: 1,
        };
        assert!(bad.validate().is_err());
        let zero = LrSchedule {
            warmup_epochs: 0,
            ..LrSchedule::default()
        };
        assert!(zero.validate().is_err());
        assert!(LrSchedule::default().validate().is_ok());
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(vec![3.0, -2.0]));
        let mut opt = Adam::new(AdamConfig::default(), &store);
        for _ in 0..2000 {
            let mut g = GradStore::zeros_like(&store);
            let x = store.get(id).clone();
            g.add(id, &x.map(|v| 2.0 * v));
            opt.step(&mut store, &g, 0.01);
        }
        assert!(store.get(id).data().iter().all(|v| v.abs() < 1e-2));
    }
}
