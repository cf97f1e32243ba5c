//! Central finite-difference check of analytic gradients.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;

use super::network::{backward, bce_with_logit, NetworkParams};
use super::TrainingSample;
use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::rng;
use crate::scene::PATCH_LEN;

const STEP: f64 = 1e-4;
const MAX_COORDS: usize = 100;

/// A model with scalar parameters addressed by flat index.
pub trait Differentiable {
    fn n_params(&self) -> usize;
    fn param(&self, i: usize) -> f32;
    fn set_param(&mut self, i: usize, value: f32);
    fn loss(&self, batch: &[TrainingSample]) -> f64;
    fn gradient(&self, batch: &[TrainingSample]) -> Result<Vec<f64>>;
    /// On/off state of every piecewise-linear unit over the batch. A probe
    /// that changes this pattern straddles a kink and is not compared.
    fn activation_pattern(&self, _batch: &[TrainingSample]) -> Vec<bool> {
        Vec::new()
    }
}

impl Differentiable for NetworkParams {
    fn n_params(&self) -> usize {
        self.param_count()
    }

    fn param(&self, i: usize) -> f32 {
        let (t, o) = self.locate(i);
        self.tensors[t][o]
    }

    fn set_param(&mut self, i: usize, value: f32) {
        let (t, o) = self.locate(i);
        self.tensors[t][o] = value;
    }

    fn loss(&self, batch: &[TrainingSample]) -> f64 {
        NetworkParams::loss(self, batch)
    }

    fn gradient(&self, batch: &[TrainingSample]) -> Result<Vec<f64>> {
        Ok(backward(self, batch)?.0.flatten())
    }

    fn activation_pattern(&self, batch: &[TrainingSample]) -> Vec<bool> {
        batch
            .iter()
            .flat_map(|s| {
                self.activations(&s.patch.pixels)
                    .relu_pattern()
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// A single dense sigmoid layer over the raw patch.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub n_outputs: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LinearProbe {
    pub fn random(n_outputs: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let limit = sqrt(6.0 / (PATCH_LEN + n_outputs) as f64);
        LinearProbe {
            n_outputs,
            weights: (0..n_outputs * PATCH_LEN)
                .map(|_| r.gen_range(-limit..limit) as f32)
                .collect(),
            bias: (0..n_outputs)
                .map(|_| r.gen_range(-0.5..0.5) as f32)
                .collect(),
        }
    }

    pub fn logit(&self, pixels: &[f32], k: usize) -> f64 {
        let row = &self.weights[k * PATCH_LEN..][..PATCH_LEN];
        row.iter()
            .zip(pixels)
            .fold(self.bias[k] as f64, |acc, (w, x)| {
                acc + *w as f64 * *x as f64
            })
    }
}

impl Differentiable for LinearProbe {
    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn param(&self, i: usize) -> f32 {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.bias[i - self.weights.len()]
        }
    }

    fn set_param(&mut self, i: usize, value: f32) {
        if i < self.weights.len() {
            self.weights[i] = value;
        } else {
            let n = self.weights.len();
            self.bias[i - n] = value;
        }
    }

    fn loss(&self, batch: &[TrainingSample]) -> f64 {
        let sum: f64 = batch
            .iter()
            .map(|s| bce_with_logit(self.logit(&s.patch.pixels, s.target_index), s.target_value))
            .sum();
        sum / batch.len() as f64
    }

    fn gradient(&self, batch: &[TrainingSample]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::invalid("batch", "must not be empty"));
        }
        let mut g = vec![0.0; self.n_params()];
        let scale = 1.0 / batch.len() as f64;
        for s in batch {
            let k = s.target_index;
            let d = (crate::math::sigmoid(self.logit(&s.patch.pixels, k)) - s.target_value) * scale;
            for (gi, x) in g[k * PATCH_LEN..][..PATCH_LEN]
                .iter_mut()
                .zip(&s.patch.pixels)
            {
                *gi += d * *x as f64;
            }
            g[self.weights.len() + k] += d;
        }
        Ok(g)
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Maximum relative error between the model's own gradient and central
/// differences on up to 100 random coordinates.
pub fn grad_check<M: Differentiable>(
    model: &mut M,
    batch: &[TrainingSample],
    seed: u64,
) -> Result<f64> {
    let analytic = model.gradient(batch)?;
    compare_gradients(model, batch, &analytic, seed)
}

/// Like [`grad_check`] but against a caller-supplied gradient.
pub fn compare_gradients<M: Differentiable>(
    model: &mut M,
    batch: &[TrainingSample],
    analytic: &[f64],
    seed: u64,
) -> Result<f64> {
    let n = model.n_params();
    if analytic.len() != n {
        return Err(Error::Shape(alloc::format!(
            "gradient has {} entries, model has {n}",
            analytic.len()
        )));
    }
    let mut r = rng::seeded(seed);
    let coords = index::sample(&mut r, n, n.min(MAX_COORDS));
    let pattern = model.activation_pattern(batch);
    let mut worst = 0.0f64;
    for i in coords.iter() {
        let w0 = model.param(i);
        let up = (w0 as f64 + STEP) as f32;
        let down = (w0 as f64 - STEP) as f32;
        model.set_param(i, up);
        let loss_up = model.loss(batch);
        let kink = model.activation_pattern(batch) != pattern;
        model.set_param(i, down);
        let loss_down = model.loss(batch);
        let kink = kink || model.activation_pattern(batch) != pattern;
        model.set_param(i, w0);
        if kink {
            continue;
        }
        let numeric = (loss_up - loss_down) / (up as f64 - down as f64);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}
