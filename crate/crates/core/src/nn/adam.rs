use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::layers::ParamSet;
use super::tape::Grads;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer bound to one parameter set.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    t: i32,
    m: BTreeMap<usize, Array2<f64>>,
    v: BTreeMap<usize, Array2<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// Applies the gradients that belong to `set`; others are ignored.
    /// Tensors without a gradient are left untouched.
    pub fn step(&mut self, set: &mut ParamSet, grads: &Grads) {
        let tag = set.tag();
        let c = self.config;
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for (&(t, i), g) in grads.range((tag, 0)..(tag + 1, 0)) {
            debug_assert_eq!(t, tag);
            let m = self.m.entry(i).or_insert_with(|| Array2::zeros(g.raw_dim()));
            let v = self.v.entry(i).or_insert_with(|| Array2::zeros(g.raw_dim()));
            ndarray::Zip::from(&mut *m).and(&mut *v).and(g).for_each(|m, v, &g| {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            });
            let p = set.get_mut(i);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= c.lr * (m / bc1) / ((v / bc2).sqrt() + c.eps);
            });
        }
    }
}

/// Scales all gradients of one tag so their joint norm is at most `max_norm`.
pub fn clip_grad_norm(grads: &mut Grads, tag: u32, max_norm: f64) -> f64 {
    let norm = grads
        .range((tag, 0)..(tag + 1, 0))
        .map(|(_, g)| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let f = max_norm / norm;
        for (_, g) in grads.range_mut((tag, 0)..(tag + 1, 0)) {
            g.mapv_inplace(|x| x * f);
        }
    }
    norm
}
