//! Checkpoint codec: a text manifest followed by the raw tensors as
//! little-endian `f32`, concatenated in manifest order.
//!
//! ```text
//! advgrasp-checkpoint 1
//! arch conv8x5s2-conv16x3s2-fc128-sigmoid
//! n_outputs 18
//! seed 7
//! tensors 8
//! params 77554
//! tensor conv1.weight 8x1x5x5
//! ...
//! end
//! <4·params bytes>
//! ```

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::network::tensor_specs;
use super::NetworkParams;
use crate::error::{Error, Result};

pub const ARCH_DESCRIPTOR: &str = "conv8x5s2-conv16x3s2-fc128-sigmoid";
const MAGIC: &str = "advgrasp-checkpoint 1";

pub fn encode_checkpoint(params: &NetworkParams) -> Vec<u8> {
    let mut head = String::new();
    let specs = params.specs();
    let _ = writeln!(head, "{MAGIC}");
    let _ = writeln!(head, "arch {ARCH_DESCRIPTOR}");
    let _ = writeln!(head, "n_outputs {}", params.n_outputs);
    let _ = writeln!(head, "seed {}", params.seed);
    let _ = writeln!(head, "tensors {}", specs.len());
    let _ = writeln!(head, "params {}", params.param_count());
    for spec in &specs {
        let dims: Vec<String> = spec.shape.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(head, "tensor {} {}", spec.name, dims.join("x"));
    }
    let _ = writeln!(head, "end");
    let mut out = head.into_bytes();
    out.reserve(4 * params.param_count());
    for t in &params.tensors {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<NetworkParams> {
    const END: &[u8] = b"\nend\n";
    let split = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| bad("manifest has no `end` line"))?;
    let head = core::str::from_utf8(&bytes[..split]).map_err(|_| bad("manifest is not UTF-8"))?;
    let body = &bytes[split + END.len()..];

    let mut lines = head.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("unrecognised header"));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("missing `{key}`")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected `{key}`, found `{line}`")))
    };
    let arch = field("arch")?;
    if arch != ARCH_DESCRIPTOR {
        return Err(bad(format!("unsupported architecture `{arch}`")));
    }
    let n_outputs: usize = field("n_outputs")?
        .parse()
        .map_err(|_| bad("bad n_outputs"))?;
    let seed: u64 = field("seed")?.parse().map_err(|_| bad("bad seed"))?;
    let n_tensors: usize = field("tensors")?
        .parse()
        .map_err(|_| bad("bad tensor count"))?;
    let n_params: usize = field("params")?
        .parse()
        .map_err(|_| bad("bad param count"))?;
    let specs = tensor_specs(n_outputs);
    if n_tensors != specs.len() {
        return Err(bad(format!(
            "expected {} tensors, manifest lists {n_tensors}",
            specs.len()
        )));
    }
    for spec in &specs {
        let line = field("tensor")?;
        let (name, dims) = line.split_once(' ').ok_or_else(|| bad("bad tensor line"))?;
        let shape: Vec<usize> = dims
            .split('x')
            .map(|d| d.parse().map_err(|_| bad("bad tensor dims")))
            .collect::<Result<_>>()?;
        if name != spec.name || shape != spec.shape {
            return Err(bad(format!(
                "tensor `{name}` does not match the architecture"
            )));
        }
    }
    let expected: usize = specs.iter().map(|s| s.len()).sum();
    if n_params != expected || body.len() != 4 * expected {
        return Err(bad(format!(
            "payload holds {} bytes, expected {}",
            body.len(),
            4 * expected
        )));
    }
    let mut values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let tensors = specs
        .iter()
        .map(|s| values.by_ref().take(s.len()).collect())
        .collect();
    let params = NetworkParams {
        n_outputs,
        seed,
        tensors,
    };
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = NetworkParams::init(36, 99).unwrap();
        let back = decode_checkpoint(&encode_checkpoint(&p)).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let p = NetworkParams::init(15, 1).unwrap();
        let mut bytes = encode_checkpoint(&p);
        bytes.truncate(bytes.len() - 3);
        assert!(decode_checkpoint(&bytes).is_err());
    }

    #[test]
    fn wrong_head_size_is_rejected() {
        let p = NetworkParams::init(15, 1).unwrap();
        let bytes = encode_checkpoint(&p);
        let split = bytes.windows(5).position(|w| w == b"\nend\n").unwrap();
        let head = core::str::from_utf8(&bytes[..split])
            .unwrap()
            .replace("n_outputs 15", "n_outputs 18");
        let mut forged = head.into_bytes();
        forged.extend_from_slice(&bytes[split..]);
        assert!(decode_checkpoint(&forged).is_err());
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(decode_checkpoint(b"hello").is_err());
        assert!(decode_checkpoint(b"").is_err());
    }
}
