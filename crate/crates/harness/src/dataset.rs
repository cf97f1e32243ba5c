//! Episode datasets as newline-delimited JSON.
//!
//! One flat object per episode. Patches are base64 strings of little-endian
//! f32 pixels; their centre and angle are implied by the grasp (the grasp
//! patch is unrotated, the rotated patch is aligned with the grasp angle).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use advgrasp_core::scene::{Difficulty, Patch, PATCH_LEN};
use advgrasp_core::sim::{AdversaryAction, AdversaryKind, GraspAction};
use advgrasp_core::trainer::{AdversaryAttempt, EpisodeRecord, ObjectSpec};
use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    object_seed: u64,
    difficulty: String,
    scene_seed: u64,
    grasp_x: f64,
    grasp_y: f64,
    theta_bin: u8,
    grasp_patch: String,
    rotated_patch: Option<String>,
    grasp_success: bool,
    margin: f64,
    adversary_kind: Option<String>,
    adversary_action: Option<u8>,
    adversary_success: Option<bool>,
    iteration: u32,
    config_id: u64,
}

pub fn encode_pixels(pixels: &[f32]) -> String {
    let bytes: Vec<u8> = pixels.iter().flat_map(|p| p.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_pixels(text: &str) -> std::result::Result<Vec<f32>, String> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() != PATCH_LEN * 4 {
        return Err(format!(
            "patch has {} bytes, expected {}",
            bytes.len(),
            PATCH_LEN * 4
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn to_line(r: &EpisodeRecord) -> Line {
    Line {
        object_seed: r.object.seed,
        difficulty: r.object.difficulty.name().to_string(),
        scene_seed: r.scene_seed,
        grasp_x: r.grasp.x,
        grasp_y: r.grasp.y,
        theta_bin: r.grasp.theta_bin,
        grasp_patch: encode_pixels(&r.grasp_patch.pixels),
        rotated_patch: r.rotated_patch.as_ref().map(|p| encode_pixels(&p.pixels)),
        grasp_success: r.grasp_success,
        margin: r.margin,
        adversary_kind: r.adversary.map(|a| a.action.kind.name().to_string()),
        adversary_action: r.adversary.map(|a| a.action.index),
        adversary_success: r.adversary.map(|a| a.success),
        iteration: r.iteration,
        config_id: r.config_id,
    }
}

fn from_line(l: Line) -> std::result::Result<EpisodeRecord, String> {
    let difficulty = Difficulty::parse(&l.difficulty)
        .ok_or_else(|| format!("unknown difficulty `{}`", l.difficulty))?;
    let grasp = GraspAction::new(l.grasp_x, l.grasp_y, l.theta_bin).map_err(|e| e.to_string())?;
    let grasp_patch = Patch::new(decode_pixels(&l.grasp_patch)?, grasp.center(), 0.0)
        .map_err(|e| e.to_string())?;
    let rotated_patch = match l.rotated_patch {
        Some(text) => Some(
            Patch::new(decode_pixels(&text)?, grasp.center(), grasp.angle())
                .map_err(|e| e.to_string())?,
        ),
        None => None,
    };
    let adversary = match (l.adversary_kind, l.adversary_action, l.adversary_success) {
        (None, None, None) => None,
        (Some(kind), Some(index), Some(success)) => {
            let kind = AdversaryKind::parse(&kind)
                .ok_or_else(|| format!("unknown adversary kind `{kind}`"))?;
            let action = AdversaryAction::new(kind, index as usize).map_err(|e| e.to_string())?;
            Some(AdversaryAttempt { action, success })
        }
        _ => return Err("adversary fields must be all present or all absent".into()),
    };
    let record = EpisodeRecord {
        object: ObjectSpec {
            seed: l.object_seed,
            difficulty,
        },
        scene_seed: l.scene_seed,
        grasp,
        grasp_patch,
        rotated_patch,
        grasp_success: l.grasp_success,
        margin: l.margin,
        adversary,
        iteration: l.iteration,
        config_id: l.config_id,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

pub fn record_to_json(r: &EpisodeRecord) -> String {
    serde_json::to_string(&to_line(r)).expect("dataset line serializes")
}

pub fn record_from_json(text: &str) -> std::result::Result<EpisodeRecord, String> {
    let line: Line = serde_json::from_str(text).map_err(|e| e.to_string())?;
    from_line(line)
}

pub fn write_dataset(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        writeln!(w, "{}", record_to_json(r)).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Vec<EpisodeRecord>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            record_from_json(line).map_err(|message| HarnessError::Dataset {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            })
        })
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_dataset(&text, path)
}
