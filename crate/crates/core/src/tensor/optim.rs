use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Element, ParamStore, Tensor};

/// First/second moment buffers for Adam.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Element> AdamState<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros(), v: zeros() }
    }

    pub fn first_moment(&self, i: usize) -> &[T] {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &[T] {
        &self.v[i]
    }
}

/// One bias-corrected Adam update. `grads[i]` pairs with parameter `i`.
pub fn adam_step<T: Element>(params: &mut ParamStore<T>, grads: &[Tensor<T>], state: &mut AdamState<T>, lr: f64) {
    assert_eq!(grads.len(), params.len(), "one gradient per parameter");
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(state.beta1), T::of(state.beta2));
    let c1 = T::of(1.0 - state.beta1.powi(t));
    let c2 = T::of(1.0 - state.beta2.powi(t));
    let (lr, eps) = (T::of(lr), T::of(state.eps));
    for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
        let g = grads[i].data();
        let p = params.get_mut(id).data_mut();
        assert_eq!(g.len(), p.len(), "gradient shape for parameter {i}");
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (T::one() - b1) * g[j];
            v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            p[j] = p[j] - lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Linear warmup followed by cosine annealing with warm restarts.
///
/// After `warmup` steps the schedule runs cycles of `cycle_len * mult^i`
/// steps. Position `u` of a cycle of length `T` has
/// `lr = w*lr_max + (1-w)*lr_min` with `w = (1 + cos(pi*u/T))/2`, so the
/// cycle opens at `lr_max` and its last position `u = T` sits at `lr_min`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_max: f64,
    pub lr_min: f64,
    pub warmup: u64,
    pub cycle_len: u64,
    pub cycle_mult: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { lr_max: 1e-2, lr_min: 1e-6, warmup: 200, cycle_len: 2000, cycle_mult: 2 }
    }
}

impl LrSchedule {
    pub fn lr_at(&self, step: u64) -> f64 {
        if step < self.warmup {
            let f = step as f64 / self.warmup as f64;
            return f * self.lr_max + (1.0 - f) * self.lr_min;
        }
        let (u, len) = self.cycle_position(step);
        let w = 0.5 * (1.0 + (PI * u as f64 / len as f64).cos());
        w * self.lr_max + (1.0 - w) * self.lr_min
    }

    /// `(position, length)` of the cycle containing `step`; a cycle of length
    /// `T` spans positions `0..=T`.
    pub fn cycle_position(&self, step: u64) -> (u64, u64) {
        let mut u = step.saturating_sub(self.warmup);
        let mut len = self.cycle_len.max(1);
        loop {
            if u <= len {
                return (u, len);
            }
            u -= len + 1;
            len = len.saturating_mul(self.cycle_mult.max(1));
        }
    }
}

/// Free-function form of [`LrSchedule::lr_at`].
pub fn lr_at(step: u64, schedule: &LrSchedule) -> f64 {
    schedule.lr_at(step)
}
