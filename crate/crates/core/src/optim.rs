//! Adam with step-wise exponential learning-rate decay, and the minibatch
//! rule that splits only the interior points.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{DdmError, Result};
use crate::net::{MlpNetwork, ParamGradient};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: ParamGradient,
    v: ParamGradient,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &MlpNetwork) -> Self {
        AdamState {
            m: ParamGradient::zeros_like(net),
            v: ParamGradient::zeros_like(net),
            t: 0,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &ParamGradient {
        &self.m
    }

    pub fn second_moment(&self) -> &ParamGradient {
        &self.v
    }

    /// One Adam update of `net` in place.
    pub fn step(&mut self, net: &mut MlpNetwork, grad: &ParamGradient, lr: f64) -> Result<()> {
        if grad.weights.len() != net.num_layers()
            || grad
                .weights
                .iter()
                .zip(net.weights())
                .any(|(g, w)| g.dim() != w.dim())
            || grad
                .biases
                .iter()
                .zip(net.biases())
                .any(|(g, b)| g.len() != b.len())
        {
            return Err(DdmError::Shape("gradient does not match network".into()));
        }
        if !grad.is_finite() {
            return Err(DdmError::Shape("non-finite gradient".into()));
        }
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        let (weights, biases) = net.params_mut();
        for l in 0..weights.len() {
            ndarray::Zip::from(&mut weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .and(&grad.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .and(&grad.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}

/// `lr(t) = lr0 · base^⌊t / every⌋`, with `t` counting minibatch updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub lr0: f64,
    pub decay_base: f64,
    pub decay_every: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            lr0: 1e-3,
            decay_base: 0.999,
            decay_every: 10,
        }
    }
}

impl LrSchedule {
    pub fn new(lr0: f64, decay_base: f64, decay_every: u64) -> Result<Self> {
        if !(lr0 > 0.0 && lr0.is_finite()) {
            return Err(DdmError::config(format!("lr0 must be positive, got {lr0}")));
        }
        if !(decay_base > 0.0 && decay_base <= 1.0) {
            return Err(DdmError::config(format!(
                "decay_base must be in (0, 1], got {decay_base}"
            )));
        }
        if decay_every == 0 {
            return Err(DdmError::config("decay_every must be at least 1"));
        }
        Ok(LrSchedule {
            lr0,
            decay_base,
            decay_every,
        })
    }

    pub fn lr_at(&self, t: u64) -> f64 {
        let events = t / self.decay_every;
        self.lr0 * self.decay_base.powf(events as f64)
    }
}

/// Partition of the interior points into minibatches. The boundary and
/// interface sets are not split: every batch uses them in full.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinibatchPlan {
    pub interior: Vec<Vec<usize>>,
}

impl MinibatchPlan {
    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }
}

/// Shuffles the interior indices `0..n_interior` and chunks them into
/// `ceil(n / batch_size)` parts.
pub fn make_minibatches<R: Rng + ?Sized>(
    n_interior: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<MinibatchPlan> {
    if n_interior == 0 {
        return Err(DdmError::EmptyBatch);
    }
    if batch_size == 0 {
        return Err(DdmError::config("batch_size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..n_interior).collect();
    order.shuffle(rng);
    Ok(MinibatchPlan {
        interior: order.chunks(batch_size).map(<[usize]>::to_vec).collect(),
    })
}
