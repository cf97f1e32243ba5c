//! Turning networks into players: candidate sampling, the candidate × angle
//! probability matrix, and grasp / adversary action selection.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::Vec2;
use crate::math::{exp, ln};
use crate::neural::NetworkParams;
use crate::rng;
use crate::scene::{extract_rotated_patch, Image, Patch, IMAGE_SIZE, WORKSPACE_SIZE};
use crate::sim::{AdversaryAction, AdversaryKind, GraspAction, N_ANGLE_BINS};

/// Grasp centres drawn uniformly (with replacement) from the pixel centres
/// of the object mask. An empty mask falls back to uniform positions over
/// the whole workspace.
pub fn sample_candidates(image: &Image, n: usize, seed: u64) -> Result<Vec<Vec2>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let mask: Vec<u32> = image
        .pixels
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, _)| i as u32)
        .collect();
    let mut r = rng::seeded(seed);
    let out = if mask.is_empty() {
        (0..n)
            .map(|_| {
                Vec2::new(
                    r.gen_range(0.0..WORKSPACE_SIZE),
                    r.gen_range(0.0..WORKSPACE_SIZE),
                )
            })
            .collect()
    } else {
        (0..n)
            .map(|_| {
                let i = mask[r.gen_range(0..mask.len())] as usize;
                Image::pixel_center(i / IMAGE_SIZE, i % IMAGE_SIZE)
            })
            .collect()
    };
    Ok(out)
}

/// Success probabilities, one row per candidate centre, one column per
/// network output.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    entries: Vec<f64>,
    n_cols: usize,
    candidates: Vec<Vec2>,
}

impl ProbMatrix {
    pub fn new(entries: Vec<f64>, n_cols: usize, candidates: Vec<Vec2>) -> Result<Self> {
        if candidates.is_empty() || n_cols == 0 {
            return Err(Error::invalid(
                "matrix",
                "needs at least one row and column",
            ));
        }
        if entries.len() != candidates.len() * n_cols {
            return Err(Error::Shape(format!(
                "{} entries for {}×{n_cols}",
                entries.len(),
                candidates.len()
            )));
        }
        if entries.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::invalid("entries", "must be finite and in (0, 1)"));
        }
        Ok(ProbMatrix {
            entries,
            n_cols,
            candidates,
        })
    }

    pub fn rows(&self) -> usize {
        self.candidates.len()
    }

    pub fn cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n_cols..][..self.n_cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn candidates(&self) -> &[Vec2] {
        &self.candidates
    }
}

/// Grasp success probabilities for every candidate, from unrotated patches.
pub fn probability_matrix<E: Executor>(
    net: &NetworkParams,
    image: &Image,
    candidates: &[Vec2],
    exec: &E,
) -> Result<ProbMatrix> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidates", "must not be empty"));
    }
    let rows = exec.map_range(candidates.len(), |g| {
        net.forward(&extract_rotated_patch(image, candidates[g], 0.0).pixels)
    });
    let entries = rows.into_iter().flatten().collect();
    ProbMatrix::new(entries, net.n_outputs, candidates.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMode {
    Greedy,
    /// Sample with probability ∝ entry^temperature.
    Importance {
        temperature: f64,
    },
    UniformRandom,
}

impl SelectionMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionMode::Importance { temperature }
                if !(temperature > 0.0 && temperature.is_finite()) =>
            {
                Err(Error::invalid("temperature", "must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Index chosen from a flat list of probabilities. Greedy ties go to the
/// lowest index.
pub fn select_index(values: &[f64], mode: SelectionMode, seed: u64) -> Result<usize> {
    mode.validate()?;
    if values.is_empty() {
        return Err(Error::invalid("values", "must not be empty"));
    }
    let mut r = rng::seeded(seed);
    let idx = match mode {
        SelectionMode::Greedy => argmax(values),
        SelectionMode::UniformRandom => r.gen_range(0..values.len()),
        SelectionMode::Importance { temperature } => {
            // p^β relative to the largest entry, so large β cannot overflow.
            let top = ln(values[argmax(values)]);
            let weights: Vec<f64> = values
                .iter()
                .map(|&p| exp(temperature * (ln(p) - top)))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut u = r.gen::<f64>() * total;
            let mut pick = values.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        }
    };
    Ok(idx)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Chooses a cell of the matrix and turns it into a grasp. Row-major order
/// makes the greedy tie-break "lowest row, then lowest angle".
pub fn select_grasp(matrix: &ProbMatrix, mode: SelectionMode, seed: u64) -> Result<GraspAction> {
    if matrix.cols() != N_ANGLE_BINS {
        return Err(Error::invalid(
            "matrix",
            "grasp matrix needs 18 angle columns",
        ));
    }
    let cell = select_index(matrix.entries(), mode, seed)?;
    let c = matrix.candidates()[cell / matrix.cols()];
    GraspAction::new(c.x, c.y, (cell % matrix.cols()) as u8)
}

pub fn select_adversary(
    net: &NetworkParams,
    rotated_patch: &Patch,
    kind: AdversaryKind,
    mode: SelectionMode,
    seed: u64,
) -> Result<AdversaryAction> {
    if net.n_outputs != kind.n_actions() {
        return Err(Error::invalid(
            "n_actions",
            format!(
                "{} adversary needs {} outputs, network has {}",
                kind.name(),
                kind.n_actions(),
                net.n_outputs
            ),
        ));
    }
    let probs = net.forward(&rotated_patch.pixels);
    AdversaryAction::new(kind, select_index(&probs, mode, seed)?)
}
