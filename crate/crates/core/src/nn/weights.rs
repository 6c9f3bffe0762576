//! Weights file: a UTF-8 JSON header, one `\0` byte, then every tensor as
//! little-endian `f64` values in the order the header lists them.
//!
//! Conv weights are `(filters, kh, kw, in_channels)`, dense weights are
//! `(outputs, inputs)`, and flattening is row-major over `(h, w, channel)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{parameter_shapes, LayerParams, ModelWeights, ScaleHint, WeightsMeta, ARCHITECTURE_NAME};
use super::{Activation, NnError, Tensor};
use crate::approx::{Approximant, Interval, MonomialPoly};

pub const FORMAT_TAG: &str = "litd-weights";
pub const FORMAT_VERSION: u32 = 1;
pub const FLATTEN_ORDER: &str = "hwc";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    architecture: String,
    flatten_order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation: Option<ActivationHeader>,
    tensors: Vec<TensorHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale_hint: Option<ScaleHint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training: Option<TrainingHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ActivationHeader {
    Relu,
    Sigmoid,
    Poly { coeffs: Vec<f64>, interval: [f64; 2] },
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainingHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    test_accuracy: Option<f64>,
}

fn header_err(msg: impl Into<String>) -> NnError {
    NnError::Header(msg.into())
}

pub fn to_bytes(model: &ModelWeights) -> Vec<u8> {
    let meta = model.meta();
    let mut tensors = Vec::new();
    for layer in model.layers() {
        tensors.push(TensorHeader {
            name: format!("{}.weight", layer.name),
            shape: layer.weight.shape().to_vec(),
        });
        tensors.push(TensorHeader {
            name: format!("{}.bias", layer.name),
            shape: layer.bias.shape().to_vec(),
        });
    }
    let header = Header {
        format: FORMAT_TAG.into(),
        version: FORMAT_VERSION,
        architecture: ARCHITECTURE_NAME.into(),
        flatten_order: FLATTEN_ORDER.into(),
        activation: meta.activation.as_ref().map(|a| match a {
            Activation::Relu => ActivationHeader::Relu,
            Activation::Sigmoid => ActivationHeader::Sigmoid,
            Activation::Poly(p) => ActivationHeader::Poly {
                coeffs: p.coeffs().to_vec(),
                interval: [p.interval().lo(), p.interval().hi()],
            },
        }),
        tensors,
        scale_hint: meta.scale_hint,
        training: meta.training_accuracy.map(|a| TrainingHeader { test_accuracy: Some(a) }),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(0);
    for layer in model.layers() {
        for v in layer.weight.data().iter().chain(layer.bias.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelWeights, NnError> {
    let split = bytes
        .iter()
        .position(|&b| b == 0)
        .ok_or_else(|| header_err("missing header terminator"))?;
    let header: Header =
        serde_json::from_slice(&bytes[..split]).map_err(|e| header_err(format!("bad header json: {e}")))?;
    if header.format != FORMAT_TAG {
        return Err(header_err(format!("format {:?} is not {FORMAT_TAG:?}", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(header_err(format!("unsupported version {}", header.version)));
    }
    if header.architecture != ARCHITECTURE_NAME {
        return Err(header_err(format!("unknown architecture {:?}", header.architecture)));
    }
    if header.flatten_order != FLATTEN_ORDER {
        return Err(header_err(format!("unsupported flatten order {:?}", header.flatten_order)));
    }
    let mut payload = &bytes[split + 1..];
    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    for th in &header.tensors {
        let count = th
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| header_err(format!("{}: shape overflows", th.name)))?;
        let need = count.checked_mul(8).ok_or_else(|| header_err("shape overflows"))?;
        if payload.len() < need {
            return Err(NnError::Truncated);
        }
        let data = payload[..need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        payload = &payload[need..];
        tensors.push((th.name.clone(), Tensor::new(th.shape.clone(), data)?));
    }
    if !payload.is_empty() {
        return Err(header_err(format!("{} trailing bytes after the last tensor", payload.len())));
    }
    let mut take = |name: String| -> Result<Tensor, NnError> {
        let i = tensors
            .iter()
            .position(|(n, _)| *n == name)
            .ok_or_else(|| NnError::Incomplete(format!("missing tensor {name}")))?;
        Ok(tensors.swap_remove(i).1)
    };
    let mut layers = Vec::new();
    for (name, _, _) in parameter_shapes() {
        layers.push(LayerParams {
            name: name.into(),
            weight: take(format!("{name}.weight"))?,
            bias: take(format!("{name}.bias"))?,
        });
    }
    if let Some((name, _)) = tensors.first() {
        return Err(header_err(format!("unexpected tensor {name}")));
    }
    let activation = match header.activation {
        None => None,
        Some(ActivationHeader::Relu) => Some(Activation::Relu),
        Some(ActivationHeader::Sigmoid) => Some(Activation::Sigmoid),
        Some(ActivationHeader::Poly { coeffs, interval }) => {
            let iv = Interval::new(interval[0], interval[1]).map_err(|e| header_err(e.to_string()))?;
            Some(Activation::Poly(MonomialPoly::new(coeffs, iv).map_err(|e| header_err(e.to_string()))?))
        }
    };
    let meta = WeightsMeta {
        activation,
        training_accuracy: header.training.and_then(|t| t.test_accuracy),
        scale_hint: header.scale_hint,
    };
    ModelWeights::new(layers, meta)
}

pub fn save_weights(model: &ModelWeights, path: impl AsRef<Path>) -> Result<(), NnError> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights, NnError> {
    from_bytes(&std::fs::read(path)?)
}
