//! On-disk artifacts: checkpoints, metrics and per-iteration directories.
//!
//! An iteration directory is written under a temporary name and renamed
//! once complete, so a directory that exists under its final name is whole.

use std::fs;
use std::path::{Path, PathBuf};

use advgrasp_core::neural::{decode_checkpoint, encode_checkpoint, NetworkParams};
use advgrasp_core::sim::AdversaryKind;
use advgrasp_core::trainer::{IterationMetrics, TrainReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const RECORDS: &str = "records.ndjson";
pub const PROTAGONIST: &str = "protagonist.ckpt";
pub const ADVERSARY: &str = "adversary.ckpt";
pub const METRICS: &str = "metrics.json";
pub const TARGETS: &str = "targets.json";

pub fn write_checkpoint(params: &NetworkParams, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params)).map_err(|e| HarnessError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<NetworkParams> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|source| HarnessError::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::artifact(path, e.to_string()))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

/// Writes a directory through `fill`, publishing it only on success.
pub fn write_atomic_dir(path: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = tmp_path(path);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    }
    create_dir(&tmp)?;
    fill(&tmp)?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Serializable mirror of [`TrainReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub samples: usize,
    pub epochs: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
}

impl From<TrainReport> for TrainSummary {
    fn from(r: TrainReport) -> Self {
        TrainSummary {
            samples: r.samples,
            epochs: r.epochs,
            loss: r.loss,
            accuracy: r.accuracy,
            balanced_accuracy: r.balanced_accuracy,
        }
    }
}

impl From<TrainSummary> for TrainReport {
    fn from(r: TrainSummary) -> Self {
        TrainReport {
            samples: r.samples,
            epochs: r.epochs,
            loss: r.loss,
            accuracy: r.accuracy,
            balanced_accuracy: r.balanced_accuracy,
        }
    }
}

/// Serializable mirror of [`IterationMetrics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub kind: Option<String>,
    pub iteration: Option<u32>,
    pub attempts: usize,
    pub successes: usize,
    pub adversary_attempts: usize,
    pub dislodged: usize,
    pub grasp_dataset_size: usize,
    pub adversary_dataset_size: usize,
    pub protagonist: TrainSummary,
    pub adversary: Option<TrainSummary>,
}

impl MetricsRecord {
    pub fn from_metrics(m: &IterationMetrics) -> Self {
        MetricsRecord {
            kind: m.kind.map(|k| k.name().to_string()),
            iteration: m.iteration,
            attempts: m.attempts,
            successes: m.successes,
            adversary_attempts: m.adversary_attempts,
            dislodged: m.dislodged,
            grasp_dataset_size: m.grasp_dataset_size,
            adversary_dataset_size: m.adversary_dataset_size,
            protagonist: m.protagonist.into(),
            adversary: m.adversary.map(Into::into),
        }
    }

    pub fn to_metrics(&self, path: &Path) -> Result<IterationMetrics> {
        let kind = match &self.kind {
            None => None,
            Some(k) => Some(
                AdversaryKind::parse(k)
                    .ok_or_else(|| HarnessError::artifact(path, format!("unknown kind `{k}`")))?,
            ),
        };
        Ok(IterationMetrics {
            kind,
            iteration: self.iteration,
            attempts: self.attempts,
            successes: self.successes,
            adversary_attempts: self.adversary_attempts,
            dislodged: self.dislodged,
            grasp_dataset_size: self.grasp_dataset_size,
            adversary_dataset_size: self.adversary_dataset_size,
            protagonist: self.protagonist.into(),
            adversary: self.adversary.map(Into::into),
        })
    }
}

/// Labels a phase step trained on, stored for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTargets {
    pub protagonist: Vec<f64>,
    pub adversary: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.ckpt");
        let net = NetworkParams::init(36, 4).unwrap();
        write_checkpoint(&net, &p).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), net);
        fs::write(&p, b"nope").unwrap();
        assert!(matches!(
            read_checkpoint(&p),
            Err(HarnessError::Checkpoint { .. })
        ));
    }

    #[test]
    fn failed_fill_leaves_no_directory() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("iter-0");
        let r = write_atomic_dir(&target, |_| Err(HarnessError::artifact("x", "boom")));
        assert!(r.is_err());
        assert!(!target.exists());
        write_atomic_dir(&target, |d| write_json(&1u32, &d.join("a.json"))).unwrap();
        assert_eq!(read_json::<u32>(&target.join("a.json")).unwrap(), 1);
    }

    #[test]
    fn floats_survive_json() {
        let v = vec![0.1f64, 1.0 - 0.5 * 0.7310585786300049, 1e-300, 0.3];
        let text = serde_json::to_string(&v).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert!(v.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
