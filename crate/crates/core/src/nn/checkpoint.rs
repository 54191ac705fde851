//! Parameter checkpoint container.
//!
//! ```text
//! offset 0   8 bytes   magic "ONETCKPT"
//! offset 8   8 bytes   header length H, u64 little-endian
//! offset 16  H bytes   UTF-8 JSON header (CheckpointHeader)
//! 16 + H     8*N bytes parameter values, f64 little-endian, in the
//!                      visiting order of the networks listed in the header
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Activation, Conv1d, Mlp, NnError, Result};

pub const MAGIC: &[u8; 8] = b"ONETCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel_len: usize,
        stride: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    /// Model family, e.g. `mlp`, `deeponet`, `fcn`, `cnn`.
    pub model: String,
    pub networks: Vec<NetworkSpec>,
    pub seed: u64,
    pub step_count: u64,
    /// Model-specific metadata.
    #[serde(default)]
    pub envelope: serde_json::Value,
    pub n_values: usize,
    pub sha256: String,
}

impl NetworkSpec {
    pub fn of_mlp(name: &str, mlp: &Mlp) -> Self {
        Self {
            name: name.to_string(),
            layers: mlp
                .layers()
                .iter()
                .map(|l| LayerSpec::Dense {
                    inputs: l.input_dim(),
                    outputs: l.output_dim(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn of_conv(name: &str, conv: &Conv1d) -> Self {
        Self {
            name: name.to_string(),
            layers: vec![LayerSpec::Conv1d {
                in_channels: conv.in_channels(),
                out_channels: conv.out_channels(),
                kernel_len: conv.kernel_len(),
                stride: conv.stride,
            }],
        }
    }

    /// Zero-valued MLP with this spec's shapes.
    pub fn to_mlp(&self) -> Result<Mlp> {
        let layers = self
            .layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Dense {
                    inputs,
                    outputs,
                    activation,
                } => Ok(super::Dense::zeros(inputs, outputs, activation)),
                LayerSpec::Conv1d { .. } => Err(NnError::Checkpoint(format!(
                    "network '{}' contains a conv layer where a dense one was expected",
                    self.name
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(layers)
    }

    pub fn to_conv(&self) -> Result<Conv1d> {
        match self.layers.as_slice() {
            [LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_len,
                stride,
            }] => Conv1d::new(
                ndarray::Array3::zeros((*out_channels, *in_channels, *kernel_len)),
                ndarray::Array1::zeros(*out_channels),
                *stride,
            ),
            _ => Err(NnError::Checkpoint(format!(
                "network '{}' is not a single conv layer",
                self.name
            ))),
        }
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn values_to_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Serialise header and values into the container byte layout. The
/// header's `n_values` and `sha256` fields are filled in here.
pub fn encode(mut header: CheckpointHeader, values: &[f64]) -> Result<Vec<u8>> {
    let blob = values_to_bytes(values);
    header.version = FORMAT_VERSION;
    header.n_values = values.len();
    header.sha256 = digest(&blob);
    let json = serde_json::to_vec(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(CheckpointHeader, Vec<f64>)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(NnError::Checkpoint("missing magic bytes".into()));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() < header_len {
        return Err(NnError::Checkpoint("truncated header".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&body[..header_len])
        .map_err(|e| NnError::Checkpoint(e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported version {}",
            header.version
        )));
    }
    let blob = &body[header_len..];
    if blob.len() != header.n_values * 8 {
        return Err(NnError::Checkpoint(format!(
            "blob holds {} bytes, header declares {} values",
            blob.len(),
            header.n_values
        )));
    }
    if digest(blob) != header.sha256 {
        return Err(NnError::Checkpoint("checksum mismatch".into()));
    }
    let values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

pub fn write(path: &Path, header: CheckpointHeader, values: &[f64]) -> Result<()> {
    let bytes = encode(header, values)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(CheckpointHeader, Vec<f64>)> {
    decode(&fs::read(path)?)
}

/// Header with the derived fields left blank for [`encode`] to fill.
pub fn header(
    model: &str,
    networks: Vec<NetworkSpec>,
    seed: u64,
    step_count: u64,
    envelope: serde_json::Value,
) -> CheckpointHeader {
    CheckpointHeader {
        version: FORMAT_VERSION,
        model: model.to_string(),
        networks,
        seed,
        step_count,
        envelope,
        n_values: 0,
        sha256: String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Params;
    use crate::rng::seeded;

    fn sample() -> (Mlp, Vec<u8>) {
        let mlp = Mlp::glorot(
            &[3, 5, 2],
            Activation::Relu,
            Activation::Tanh,
            &mut seeded(4),
        );
        let h = header(
            "mlp",
            vec![NetworkSpec::of_mlp("net", &mlp)],
            4,
            17,
            serde_json::json!({"note": 1}),
        );
        let bytes = encode(h, &mlp.flatten()).unwrap();
        (mlp, bytes)
    }

    #[test]
    fn mlp_round_trip_is_bit_exact() {
        let (mlp, bytes) = sample();
        let (h, values) = decode(&bytes).unwrap();
        assert_eq!(h.seed, 4);
        assert_eq!(h.step_count, 17);
        let mut restored = h.networks[0].to_mlp().unwrap();
        restored.assign(&values);
        assert_eq!(restored, mlp);
    }

    #[test]
    fn corruption_detected() {
        let (_, bytes) = sample();
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 0x40;
        assert!(matches!(decode(&flipped), Err(NnError::Checkpoint(m)) if m.contains("checksum")));
        assert!(decode(b"NOTACKPT00000000").is_err());
    }

    #[test]
    fn file_round_trip() {
        let (mlp, _) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        write(
            &path,
            header(
                "mlp",
                vec![NetworkSpec::of_mlp("net", &mlp)],
                0,
                0,
                serde_json::Value::Null,
            ),
            &mlp.flatten(),
        )
        .unwrap();
        let (h, v) = read(&path).unwrap();
        assert_eq!(h.networks[0].to_mlp().unwrap().layer_sizes(), vec![3, 5, 2]);
        assert_eq!(v, mlp.flatten());
    }
}
