//! Binary model checkpoints.
//!
//! Layout: magic `SDF3AD\x01`, format version (u16), CRC-32 of the payload
//! (u32), then the payload. All integers and floats are little-endian. The
//! payload holds a length-prefixed JSON metadata block, the feature grids,
//! the network tensors and the loss history.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NormalizationTransform;
use crate::isd::{Linear, SdfNet};
use crate::mlf::{FeatureGridPyramid, FeatureVolume};
use crate::npg::SamplingConfig;

use super::{ModelConfig, TrainConfig, TrainedModel};

pub const MAGIC: &[u8; 7] = b"SDF3AD\x01";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = MAGIC.len() + 2 + 4;

#[derive(Serialize, Deserialize)]
struct Metadata {
    transform: NormalizationTransform,
    sampling: SamplingConfig,
    model: ModelConfig,
    train: TrainConfig,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f32s(&mut self, v: &[f32]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!(
                "truncated checkpoint: {what} needs {n} bytes at offset {}, {} available",
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let len = n.checked_mul(4).ok_or_else(|| Error::Format(format!("{what}: size overflow")))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Format(format!("{what}: size overflow")))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn encode(model: &TrainedModel<f32>) -> Result<Vec<u8>> {
    let meta = Metadata {
        transform: model.transform,
        sampling: model.sampling.clone(),
        model: model.model.clone(),
        train: model.train.clone(),
    };
    let json = serde_json::to_vec(&meta).map_err(|e| Error::Format(format!("metadata: {e}")))?;
    let mut w = Writer(Vec::new());
    w.u32(json.len());
    w.0.extend_from_slice(&json);

    w.u32(model.pyramid.levels.len());
    w.u32(model.pyramid.base_lod as usize);
    for v in &model.pyramid.levels {
        w.u32(v.level);
        w.u32(v.resolution);
        w.u32(v.dim);
        w.f32s(&v.features);
    }

    w.u32(model.net.layers.len());
    for layer in &model.net.layers {
        w.u32(layer.fan_in);
        w.u32(layer.fan_out);
        w.f32s(&layer.weight);
        w.f32s(&layer.bias);
    }

    w.u32(model.loss_history.len());
    for l in &model.loss_history {
        w.0.extend_from_slice(&l.to_le_bytes());
    }

    let payload = w.0;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<TrainedModel<f32>> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("truncated checkpoint header ({} bytes)", bytes.len())));
    }
    let version = u16::from_le_bytes([bytes[7], bytes[8]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version: expected {FORMAT_VERSION}, found {version}"
        )));
    }
    let stored = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];

    // Parse before verifying so that truncation is reported as such.
    let model = parse_payload(payload)?;
    let computed = crc32fast::hash(payload);
    if computed != stored {
        return Err(Error::Checksum { stored, computed });
    }
    Ok(model)
}

fn parse_payload(payload: &[u8]) -> Result<TrainedModel<f32>> {
    let mut r = Reader { bytes: payload, pos: 0 };
    let json_len = r.u32("metadata length")?;
    let json = r.take(json_len, "metadata")?;
    let meta: Metadata =
        serde_json::from_slice(json).map_err(|e| Error::Format(format!("metadata: {e}")))?;

    let level_count = r.u32("level count")?;
    let base_lod = r.u32("base level of detail")? as u32;
    let mut levels = Vec::with_capacity(level_count.min(64));
    for i in 0..level_count {
        let level = r.u32("level index")?;
        let resolution = r.u32("level resolution")?;
        let dim = r.u32("feature dimension")?;
        if resolution == 0 || dim == 0 {
            return Err(Error::Format(format!("level {i} has zero resolution or dimension")));
        }
        let mut volume = FeatureVolume::<f32>::zeros(level, resolution, dim);
        let n = volume.features.len();
        volume.features = r.f32s(n, "feature grid")?;
        levels.push(volume);
    }
    if levels.is_empty() {
        return Err(Error::Format("checkpoint has no feature levels".into()));
    }
    if levels.iter().any(|v| v.dim != levels[0].dim) {
        return Err(Error::Format("feature dimension differs between levels".into()));
    }

    let layer_count = r.u32("layer count")?;
    let mut layers = Vec::with_capacity(layer_count.min(64));
    for _ in 0..layer_count {
        let fan_in = r.u32("layer fan-in")?;
        let fan_out = r.u32("layer fan-out")?;
        let weight = r.f32s(
            fan_in.checked_mul(fan_out).ok_or_else(|| Error::Format("layer size overflow".into()))?,
            "layer weights",
        )?;
        let bias = r.f32s(fan_out, "layer bias")?;
        layers.push(Linear {
            fan_in,
            fan_out,
            weight,
            bias,
        });
    }
    if layers.is_empty() {
        return Err(Error::Format("checkpoint has no network layers".into()));
    }
    if layers.windows(2).any(|w| w[0].fan_out != w[1].fan_in) || layers.last().unwrap().fan_out != 1 {
        return Err(Error::Format("inconsistent layer shapes".into()));
    }
    if layers[0].fan_in != levels[0].dim + 3 {
        return Err(Error::Format(format!(
            "network input {} does not match feature dimension {} + 3",
            layers[0].fan_in, levels[0].dim
        )));
    }

    let loss_count = r.u32("loss history length")?;
    let loss_history = r.f64s(loss_count, "loss history")?;
    if r.pos != payload.len() {
        return Err(Error::Format(format!("{} trailing bytes after payload", payload.len() - r.pos)));
    }

    Ok(TrainedModel {
        pyramid: FeatureGridPyramid { base_lod, levels },
        net: SdfNet {
            layers,
            activation: meta.model.net.activation,
        },
        transform: meta.transform,
        sampling: meta.sampling,
        model: meta.model,
        train: meta.train,
        loss_history,
    })
}

pub fn save_checkpoint(model: &TrainedModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    crate::geometry::io::write_file(path.as_ref(), &encode(model)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainedModel<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlf::PyramidConfig;
    use crate::isd::NetConfig;

    fn tiny() -> TrainedModel<f32> {
        let model = ModelConfig {
            pyramid: PyramidConfig {
                base_lod: 1,
                levels: 2,
                feature_dim: 4,
                ..Default::default()
            },
            net: NetConfig {
                hidden: vec![8, 8],
                ..Default::default()
            },
            ..Default::default()
        };
        let mut m = TrainedModel::initialize(
            NormalizationTransform::identity(),
            SamplingConfig::default(),
            model,
            TrainConfig::default(),
        )
        .unwrap();
        m.loss_history = vec![0.5, 0.25, 0.125];
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = tiny();
        assert_eq!(decode(&encode(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        let bytes = encode(&tiny()).unwrap();
        for cut in [0, 3, 8, 12, 13, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::Format(_))), "cut at {cut}");
        }
    }

    #[test]
    fn flipped_payload_byte_is_a_checksum_error() {
        let mut bytes = encode(&tiny()).unwrap();
        let n = bytes.len();
        bytes[n - 3] ^= 0x10;
        assert!(matches!(decode(&bytes), Err(Error::Checksum { .. })));
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let mut bytes = encode(&tiny()).unwrap();
        bytes[7] = 9;
        match decode(&bytes) {
            Err(Error::Format(m)) => assert!(m.contains("expected 1") && m.contains("found 9"), "{m}"),
            other => panic!("{other:?}"),
        }
    }
}
