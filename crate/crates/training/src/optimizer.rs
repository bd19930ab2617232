//! AdamW with decoupled weight decay and global-norm gradient clipping.
//!
//! Decay multiplies the parameter before the moment update, moments use
//! bias correction, and parameters that received no gradient this step
//! are left untouched (no decay, no moment advance).

use autograd::tape::Grads;
use codec::layers::P;
use std::collections::HashMap;

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    state: HashMap<u64, Moments>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, t: 0, state: HashMap::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update over `params`, scaling every gradient by `clip/norm`
    /// when the global norm exceeds `clip`. Returns the pre-clip norm.
    pub fn step(&mut self, params: &[P], grads: &Grads<f64>, clip: Option<f64>) -> f64 {
        let norm = global_grad_norm(params, grads);
        let scale = match clip {
            Some(c) if norm > c && norm > 0.0 => c / norm,
            _ => 1.0,
        };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for p in params {
            let Some(g) = grads.by_key(p.key()) else { continue };
            let slot = self
                .state
                .entry(p.key())
                .or_insert_with(|| Moments { m: vec![0.0; p.len()], v: vec![0.0; p.len()] });
            p.update(|data| {
                for i in 0..data.len() {
                    let gi = g[i] * scale;
                    data[i] *= 1.0 - self.lr * self.weight_decay;
                    slot.m[i] = self.beta1 * slot.m[i] + (1.0 - self.beta1) * gi;
                    slot.v[i] = self.beta2 * slot.v[i] + (1.0 - self.beta2) * gi * gi;
                    let mhat = slot.m[i] / bc1;
                    let vhat = slot.v[i] / bc2;
                    data[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
                }
            });
        }
        norm
    }
}

/// L2 norm over every gradient present for `params`.
pub fn global_grad_norm(params: &[P], grads: &Grads<f64>) -> f64 {
    let mut sq = 0.0;
    for p in params {
        if let Some(g) = grads.by_key(p.key()) {
            sq += g.iter().map(|&x| x * x).sum::<f64>();
        }
    }
    sq.sqrt()
}
