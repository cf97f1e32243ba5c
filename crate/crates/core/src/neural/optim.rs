use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, NetworkParams};
use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptHyper {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub batch_size: usize,
}

impl Default for OptHyper {
    fn default() -> Self {
        OptHyper {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
            batch_size: 64,
        }
    }
}

/// RMSProp running mean of squared gradients, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub cache: Vec<Vec<f64>>,
    pub hyper: OptHyper,
}

impl OptState {
    pub fn new(params: &NetworkParams, hyper: OptHyper) -> Self {
        OptState {
            cache: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
            hyper,
        }
    }
}

/// `cache ← ρ·cache + (1−ρ)·g²`, `w ← w − η·g/(√cache + ε)`.
pub fn rmsprop_step(
    params: &mut NetworkParams,
    grads: &Gradients,
    opt: &mut OptState,
) -> Result<()> {
    let shapes_match = params.tensors.len() == grads.tensors.len()
        && params.tensors.len() == opt.cache.len()
        && params
            .tensors
            .iter()
            .zip(&grads.tensors)
            .zip(&opt.cache)
            .all(|((p, g), c)| p.len() == g.len() && p.len() == c.len());
    if !shapes_match {
        return Err(Error::Shape(
            "parameter, gradient and cache shapes differ".into(),
        ));
    }
    let OptHyper {
        learning_rate,
        decay,
        epsilon,
        ..
    } = opt.hyper;
    for ((w, g), c) in params
        .tensors
        .iter_mut()
        .zip(&grads.tensors)
        .zip(opt.cache.iter_mut())
    {
        for ((wi, &gi), ci) in w.iter_mut().zip(g).zip(c.iter_mut()) {
            *ci = decay * *ci + (1.0 - decay) * gi * gi;
            *wi = (*wi as f64 - learning_rate * gi / (sqrt(*ci) + epsilon)) as f32;
        }
    }
    Ok(())
}
