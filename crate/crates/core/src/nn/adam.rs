//! Adam with bias correction.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamSlot {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamSlot {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One update at step `t` (1-based).
pub fn adam_step(params: &mut [f64], grads: &[f64], slot: &mut AdamSlot, t: u64, cfg: &AdamConfig) {
    assert!(t >= 1, "adam steps are 1-based");
    assert_eq!(params.len(), grads.len());
    if slot.m.len() != params.len() {
        *slot = AdamSlot::zeros(params.len());
    }
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut slot.m).zip(&mut slot.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Optimizer state for a whole network, one slot per parameter tensor.
#[derive(Debug, Clone, Default)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    slots: Vec<AdamSlot>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            slots: Vec::new(),
        }
    }

    pub fn step<'a>(&mut self, tensors: impl IntoIterator<Item = (&'a mut [f64], &'a [f64])>) {
        self.t += 1;
        for (i, (p, g)) in tensors.into_iter().enumerate() {
            if self.slots.len() <= i {
                self.slots.push(AdamSlot::zeros(p.len()));
            }
            adam_step(p, g, &mut self.slots[i], self.t, &self.config);
        }
    }
}
