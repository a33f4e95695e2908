//! Adam with bias correction and Glorot-uniform initialization.

use std::collections::HashMap;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub first: Tensor<T>,
    pub second: Tensor<T>,
    /// Updates this parameter has received; drives its bias correction.
    pub step: u64,
}

/// Adam optimizer state: per-parameter moments plus a global step counter.
///
/// Bias correction uses each parameter's own update count, so parameters
/// that join late (modulation subnets in the second stage) start with a
/// fully corrected first step.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: IndexMap<String, Moments<T>>,
}

impl<T: Element> Default for AdamState<T> {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl<T: Element> AdamState<T> {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            beta1,
            beta2,
            eps,
            step: 0,
            moments: IndexMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> &IndexMap<String, Moments<T>> {
        &self.moments
    }

    /// Rebuilds a state from serialized parts.
    pub fn from_parts(step: u64, moments: IndexMap<String, Moments<T>>) -> Self {
        AdamState {
            step,
            moments,
            ..Self::default()
        }
    }

    /// One update over every parameter that has a gradient. Parameters
    /// without a gradient are left untouched, moments included.
    pub fn step(
        &mut self,
        params: &mut IndexMap<String, Tensor<T>>,
        grads: &HashMap<String, Tensor<T>>,
        lr: impl Fn(&str) -> f64,
    ) -> Result<()> {
        for (name, g) in grads {
            let p = params
                .get(name)
                .ok_or_else(|| Error::UnknownTensor(name.clone()))?;
            if p.shape() != g.shape() {
                return Err(Error::TensorShape {
                    name: name.clone(),
                    expected: p.shape().to_vec(),
                    found: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (name, p) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            let m = self.moments.entry(name.clone()).or_insert_with(|| Moments {
                first: Tensor::zeros(p.shape()),
                second: Tensor::zeros(p.shape()),
                step: 0,
            });
            m.step += 1;
            let t = m.step.min(i32::MAX as u64) as i32;
            let bc1 = 1.0 - b1.powi(t);
            let bc2 = 1.0 - b2.powi(t);
            let rate = lr(name);
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.first.data_mut())
                .zip(m.second.data_mut())
            {
                let gf = gv.as_f64();
                let mf = b1 * mv.as_f64() + (1.0 - b1) * gf;
                let vf = b2 * vv.as_f64() + (1.0 - b2) * gf * gf;
                *mv = T::from_f64(mf);
                *vv = T::from_f64(vf);
                let update = rate * (mf / bc1) / ((vf / bc2).sqrt() + eps);
                *pv = T::from_f64(pv.as_f64() - update);
            }
        }
        Ok(())
    }
}

/// Glorot-uniform bound for a conv weight `(c_out, c_in, k, k)`.
pub fn xavier_bound(shape: &[usize]) -> f64 {
    let receptive: usize = shape[2..].iter().product();
    let fan_in = shape[1] * receptive;
    let fan_out = shape[0] * receptive;
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform weights for rank-4 shapes, zeros for rank-1 biases.
pub fn xavier_init<T: Element>(shape: &[usize], seed: u64) -> Result<Tensor<T>> {
    match shape.len() {
        1 => Ok(Tensor::zeros(shape)),
        4 => {
            let bound = xavier_bound(shape);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Tensor::from_fn(shape, |_| {
                T::from_f64(rng.gen_range(-bound..=bound))
            }))
        }
        _ => Err(Error::invalid(
            "xavier_init",
            format!("expected rank-4 weight or rank-1 bias, got {shape:?}"),
        )),
    }
}

/// Stable 64-bit FNV-1a, used to derive per-tensor seeds from names.
pub fn name_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
