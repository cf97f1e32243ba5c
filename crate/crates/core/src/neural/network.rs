//! input 32×32×1 → conv 8@5×5/2 → relu → conv 16@3×3/2 → relu → dense 128
//! → relu → dense N → sigmoid.
//!
//! Parameters are stored as `f32`; every forward and backward pass
//! accumulates in `f64`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::TrainingSample;
use crate::error::{Error, Result};
use crate::math::{exp, ln_1p, sigmoid, sqrt};
use crate::rng;
use crate::scene::{PATCH_LEN, PATCH_SIZE};

const IN: usize = PATCH_SIZE;
const C1: usize = 8;
const K1: usize = 5;
const H1: usize = (IN - K1) / 2 + 1; // 14
const C2: usize = 16;
const K2: usize = 3;
const H2: usize = (H1 - K2) / 2 + 1; // 6
const FLAT: usize = C2 * H2 * H2; // 576
pub const FC_HIDDEN: usize = 128;
pub const TENSOR_COUNT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
    pub is_bias: bool,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tensor layout in storage (and checkpoint) order.
pub fn tensor_specs(n_outputs: usize) -> Vec<TensorSpec> {
    let t = |name, shape: Vec<usize>, fan_in, fan_out, is_bias| TensorSpec {
        name,
        shape,
        fan_in,
        fan_out,
        is_bias,
    };
    vec![
        t(
            "conv1.weight",
            vec![C1, 1, K1, K1],
            K1 * K1,
            C1 * K1 * K1,
            false,
        ),
        t("conv1.bias", vec![C1], 0, 0, true),
        t(
            "conv2.weight",
            vec![C2, C1, K2, K2],
            C1 * K2 * K2,
            C2 * K2 * K2,
            false,
        ),
        t("conv2.bias", vec![C2], 0, 0, true),
        t("fc1.weight", vec![FC_HIDDEN, FLAT], FLAT, FC_HIDDEN, false),
        t("fc1.bias", vec![FC_HIDDEN], 0, 0, true),
        t(
            "fc2.weight",
            vec![n_outputs, FC_HIDDEN],
            FC_HIDDEN,
            n_outputs,
            false,
        ),
        t("fc2.bias", vec![n_outputs], 0, 0, true),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub n_outputs: usize,
    pub seed: u64,
    pub tensors: Vec<Vec<f32>>,
}

/// Per-tensor gradients, same layout as [`NetworkParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradients {
            tensors: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flatten().copied().collect()
    }
}

/// Cached intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    z1: Vec<f64>,
    z2: Vec<f64>,
    z3: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    a3: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Activations {
    /// ReLU on/off pattern of all hidden units.
    pub fn relu_pattern(&self) -> impl Iterator<Item = bool> + '_ {
        self.z1
            .iter()
            .chain(&self.z2)
            .chain(&self.z3)
            .map(|&z| z > 0.0)
    }
}

/// `Σ w·x` with eight interleaved partial sums, combined pairwise.
#[inline]
fn dot(w: &[f32], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let wc = w.chunks_exact(8);
    let xc = x.chunks_exact(8);
    let tail: f64 = wc
        .remainder()
        .iter()
        .zip(xc.remainder())
        .map(|(a, b)| *a as f64 * b)
        .sum();
    for (a, b) in wc.zip(xc) {
        for i in 0..8 {
            acc[i] += a[i] as f64 * b[i];
        }
    }
    let quad = [
        acc[0] + acc[4],
        acc[1] + acc[5],
        acc[2] + acc[6],
        acc[3] + acc[7],
    ];
    (quad[0] + quad[2]) + (quad[1] + quad[3]) + tail
}

/// Stable `−[y·ln σ(z) + (1−y)·ln(1−σ(z))]`.
#[inline]
pub fn bce_with_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - target * logit + ln_1p(exp(-logit.abs()))
}

/// Binary cross-entropy of a probability against a (possibly soft) target.
pub fn bce_loss(pred: f64, target: f64) -> Result<f64> {
    if !(pred > 0.0 && pred < 1.0) {
        return Err(Error::invalid("pred", "must lie in (0, 1)"));
    }
    let logit = crate::math::ln(pred) - ln_1p(-pred);
    Ok(bce_with_logit(logit, target))
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases. Deterministic in `seed`.
    pub fn init(n_outputs: usize, seed: u64) -> Result<Self> {
        if !super::VALID_OUTPUTS.contains(&n_outputs) {
            return Err(Error::invalid("n_outputs", "must be 15, 18 or 36"));
        }
        Ok(Self::init_unchecked(n_outputs, seed))
    }

    /// Like [`NetworkParams::init`] without restricting the head size.
    pub fn init_unchecked(n_outputs: usize, seed: u64) -> Self {
        let mut r = rng::seeded(rng::derive(seed, 0x1417));
        let tensors = tensor_specs(n_outputs)
            .iter()
            .map(|spec| {
                if spec.is_bias {
                    vec![0.0f32; spec.len()]
                } else {
                    let limit = sqrt(6.0 / (spec.fan_in + spec.fan_out) as f64);
                    (0..spec.len())
                        .map(|_| r.gen_range(-limit..limit) as f32)
                        .collect()
                }
            })
            .collect();
        NetworkParams {
            n_outputs,
            seed,
            tensors,
        }
    }

    /// All weights and biases zero.
    pub fn zeros(n_outputs: usize) -> Self {
        NetworkParams {
            n_outputs,
            seed: 0,
            tensors: tensor_specs(n_outputs)
                .iter()
                .map(|s| vec![0.0; s.len()])
                .collect(),
        }
    }

    pub fn specs(&self) -> Vec<TensorSpec> {
        tensor_specs(self.n_outputs)
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let specs = self.specs();
        if specs.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                specs.len(),
                self.tensors.len()
            )));
        }
        for (spec, t) in specs.iter().zip(&self.tensors) {
            if spec.len() != t.len() {
                return Err(Error::Shape(format!(
                    "{}: expected {} values, found {}",
                    spec.name,
                    spec.len(),
                    t.len()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Shape(format!("{}: non-finite value", spec.name)));
            }
        }
        Ok(())
    }

    /// Flat index → (tensor, offset).
    pub fn locate(&self, mut flat: usize) -> (usize, usize) {
        for (i, t) in self.tensors.iter().enumerate() {
            if flat < t.len() {
                return (i, flat);
            }
            flat -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn activations(&self, pixels: &[f32]) -> Activations {
        debug_assert_eq!(pixels.len(), PATCH_LEN);
        let [w1, b1, w2, b2, w3, b3, w4, b4] = self.tensor_refs();

        // Convolutions accumulate tap by tap over whole output planes so the
        // inner loops carry independent sums.
        let mut z1 = vec![0.0f64; C1 * H1 * H1];
        for oc in 0..C1 {
            let plane = &mut z1[oc * H1 * H1..][..H1 * H1];
            plane.fill(b1[oc] as f64);
            for ky in 0..K1 {
                for kx in 0..K1 {
                    let w = w1[(oc * K1 + ky) * K1 + kx] as f64;
                    for oy in 0..H1 {
                        let row = &pixels[(2 * oy + ky) * IN + kx..];
                        let out = &mut plane[oy * H1..][..H1];
                        for (ox, z) in out.iter_mut().enumerate() {
                            *z += w * row[2 * ox] as f64;
                        }
                    }
                }
            }
        }
        let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();

        let mut z2 = vec![0.0f64; FLAT];
        for oc in 0..C2 {
            let plane = &mut z2[oc * H2 * H2..][..H2 * H2];
            plane.fill(b2[oc] as f64);
            for ic in 0..C1 {
                let input = &a1[ic * H1 * H1..][..H1 * H1];
                for ky in 0..K2 {
                    for kx in 0..K2 {
                        let w = w2[((oc * C1 + ic) * K2 + ky) * K2 + kx] as f64;
                        for oy in 0..H2 {
                            let row = &input[(2 * oy + ky) * H1 + kx..];
                            let out = &mut plane[oy * H2..][..H2];
                            for (ox, z) in out.iter_mut().enumerate() {
                                *z += w * row[2 * ox];
                            }
                        }
                    }
                }
            }
        }
        let a2: Vec<f64> = z2.iter().map(|&z| z.max(0.0)).collect();

        let z3: Vec<f64> = (0..FC_HIDDEN)
            .map(|j| b3[j] as f64 + dot(&w3[j * FLAT..][..FLAT], &a2))
            .collect();
        let a3: Vec<f64> = z3.iter().map(|&z| z.max(0.0)).collect();

        let logits = (0..self.n_outputs)
            .map(|k| b4[k] as f64 + dot(&w4[k * FC_HIDDEN..][..FC_HIDDEN], &a3))
            .collect();

        Activations {
            z1,
            z2,
            z3,
            a1,
            a2,
            a3,
            logits,
        }
    }

    pub fn logits(&self, pixels: &[f32]) -> Vec<f64> {
        self.activations(pixels).logits
    }

    /// Success probability for every output.
    pub fn forward(&self, pixels: &[f32]) -> Vec<f64> {
        self.logits(pixels).into_iter().map(sigmoid).collect()
    }

    /// Masked mean BCE over a batch.
    pub fn loss(&self, batch: &[TrainingSample]) -> f64 {
        let sum: f64 = batch
            .iter()
            .map(|s| bce_with_logit(self.logits(&s.patch.pixels)[s.target_index], s.target_value))
            .sum();
        sum / batch.len() as f64
    }

    fn tensor_refs(&self) -> [&[f32]; TENSOR_COUNT] {
        let t = &self.tensors;
        [&t[0], &t[1], &t[2], &t[3], &t[4], &t[5], &t[6], &t[7]]
    }

    /// Adds `scale · ∂BCE/∂θ` of one sample to `grads`. Returns the logit of
    /// the supervised output.
    pub fn accumulate_gradient(
        &self,
        sample: &TrainingSample,
        scale: f64,
        grads: &mut Gradients,
    ) -> f64 {
        let [_, _, w2, _, w3, _, w4, _] = self.tensor_refs();
        let pixels = &sample.patch.pixels;
        let act = self.activations(pixels);
        let k = sample.target_index;
        let logit = act.logits[k];
        let g = (sigmoid(logit) - sample.target_value) * scale;

        let [gw1, gb1, gw2, gb2, gw3, gb3, gw4, gb4] = &mut grads.tensors[..] else {
            panic!("gradient buffer does not match the architecture");
        };

        // Output layer: only the supervised row receives gradient.
        gb4[k] += g;
        let w4row = &w4[k * FC_HIDDEN..][..FC_HIDDEN];
        let gw4row = &mut gw4[k * FC_HIDDEN..][..FC_HIDDEN];
        let mut dz3 = [0.0f64; FC_HIDDEN];
        for j in 0..FC_HIDDEN {
            gw4row[j] += g * act.a3[j];
            if act.z3[j] > 0.0 {
                dz3[j] = g * w4row[j] as f64;
            }
        }

        let mut da2 = vec![0.0f64; FLAT];
        for j in 0..FC_HIDDEN {
            let d = dz3[j];
            if d == 0.0 {
                continue;
            }
            gb3[j] += d;
            let grow = &mut gw3[j * FLAT..][..FLAT];
            for (gw, a) in grow.iter_mut().zip(&act.a2) {
                *gw += d * a;
            }
            let wrow = &w3[j * FLAT..][..FLAT];
            for (da, w) in da2.iter_mut().zip(wrow) {
                *da += d * *w as f64;
            }
        }

        let mut dz2 = da2;
        for (d, &z) in dz2.iter_mut().zip(&act.z2) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        let mut da1 = vec![0.0f64; C1 * H1 * H1];
        for oc in 0..C2 {
            let d = &dz2[oc * H2 * H2..][..H2 * H2];
            gb2[oc] += d.iter().sum::<f64>();
            for ic in 0..C1 {
                let input = &act.a1[ic * H1 * H1..][..H1 * H1];
                let back = &mut da1[ic * H1 * H1..][..H1 * H1];
                for ky in 0..K2 {
                    for kx in 0..K2 {
                        let wi = ((oc * C1 + ic) * K2 + ky) * K2 + kx;
                        let w = w2[wi] as f64;
                        let mut acc = 0.0;
                        for oy in 0..H2 {
                            let base = (2 * oy + ky) * H1 + kx;
                            let drow = &d[oy * H2..][..H2];
                            for (ox, &dv) in drow.iter().enumerate() {
                                acc += dv * input[base + 2 * ox];
                                back[base + 2 * ox] += dv * w;
                            }
                        }
                        gw2[wi] += acc;
                    }
                }
            }
        }

        let mut dz1 = da1;
        for (d, &z) in dz1.iter_mut().zip(&act.z1) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        for oc in 0..C1 {
            let d = &dz1[oc * H1 * H1..][..H1 * H1];
            gb1[oc] += d.iter().sum::<f64>();
            for ky in 0..K1 {
                for kx in 0..K1 {
                    let mut acc = [0.0f64; 2];
                    for oy in 0..H1 {
                        let row = &pixels[(2 * oy + ky) * IN + kx..];
                        let drow = &d[oy * H1..][..H1];
                        for (ox, &dv) in drow.iter().enumerate() {
                            acc[ox & 1] += dv * row[2 * ox] as f64;
                        }
                    }
                    gw1[(oc * K1 + ky) * K1 + kx] += acc[0] + acc[1];
                }
            }
        }
        logit
    }
}

/// Exact gradients of the masked mean BCE over `batch`, plus the loss.
pub fn backward(params: &NetworkParams, batch: &[TrainingSample]) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::invalid("batch", "must not be empty"));
    }
    if let Some(s) = batch.iter().find(|s| s.target_index >= params.n_outputs) {
        return Err(Error::invalid(
            "target_index",
            format!(
                "{} out of range for {} outputs",
                s.target_index, params.n_outputs
            ),
        ));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros_like(params);
    let mut loss = 0.0;
    for s in batch {
        let logit = params.accumulate_gradient(s, scale, &mut grads);
        loss += bce_with_logit(logit, s.target_value);
    }
    Ok((grads, loss * scale))
}
