//! Portable weight bundle shared with the external trainer.
//!
//! Byte layout (all integers little-endian):
//!
//! | offset        | size | content                                    |
//! |---------------|------|--------------------------------------------|
//! | 0             | 8    | magic `b"MPCWB\0\0\x01"`                   |
//! | 8             | 8    | `u64` header length `H` in bytes           |
//! | 16            | H    | UTF-8 JSON [`BundleHeader`]                |
//! | 16 + H        | …    | tensor blob, IEEE 754 binary32, row-major  |
//!
//! Each header tensor entry gives a byte offset relative to the blob start;
//! tensors are contiguous and the blob holds nothing else. Kernel layouts
//! follow the channels-last convention: conv kernels `[k, in, out]`, dense
//! kernels `[in, out]`, biases `[out]`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const BUNDLE_MAGIC: [u8; 8] = *b"MPCWB\0\0\x01";
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Start-parameter network: stride-1 same-padded convolutions,
/// non-overlapping max pools with floor truncation.
pub const MPC_CNN_ARCH: &str = "mpc-cnn-v1/conv-same-stride1/pool-nonoverlap-floor";
/// Dense classifier over normalized mode singular values.
pub const MODEL_ORDER_ARCH: &str = "mo-dense-v1/top8-per-mode-normalized";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv1d { name: String, filters: usize, kernel_size: usize, activation: Activation },
    Maxpool1d { name: String, pool: usize },
    Flatten { name: String },
    Dense { name: String, units: usize, activation: Activation },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub format_version: u32,
    pub architecture_id: String,
    /// Model order L for the start-parameter network; number of classes for
    /// the model order classifier.
    pub model_order: usize,
    /// Input rows (W taps, or the feature length for the classifier).
    pub input_window: usize,
    pub input_channels: usize,
    /// Flattened length after the convolutional stack.
    pub flatten_len: usize,
    pub layers: Vec<LayerSpec>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Validated network weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightBundle {
    header: BundleHeader,
    tensors: BTreeMap<String, Tensor>,
}

/// Feature map shape while walking the layer list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    Map { len: usize, ch: usize },
    Flat(usize),
}

/// The fixed layer stack of the start-parameter network for model order `l`.
pub fn mpc_cnn_layers(l: usize) -> Vec<LayerSpec> {
    use Activation::*;
    vec![
        LayerSpec::Conv1d { name: "conv1".into(), filters: 12, kernel_size: 3, activation: Relu },
        LayerSpec::Maxpool1d { name: "pool1".into(), pool: 2 },
        LayerSpec::Conv1d { name: "conv2".into(), filters: 12, kernel_size: 3, activation: Relu },
        LayerSpec::Maxpool1d { name: "pool2".into(), pool: 4 },
        LayerSpec::Flatten { name: "flatten".into() },
        LayerSpec::Dense { name: "dense1".into(), units: 50, activation: Relu },
        LayerSpec::Dense { name: "dense2".into(), units: 50, activation: Relu },
        LayerSpec::Dense { name: "out".into(), units: 3 * l, activation: Linear },
    ]
}

/// Flattened length of the start-parameter network for window `w`.
pub fn mpc_cnn_flatten_len(w: usize) -> usize {
    (w / 2 / 4) * 12
}

/// Expected `(name, shape)` of every weight tensor, in layer order.
fn tensor_shapes(layers: &[LayerSpec], input: (usize, usize)) -> Result<(Vec<(String, Vec<usize>)>, Shape)> {
    let mut shape = Shape::Map { len: input.0, ch: input.1 };
    let mut out = Vec::new();
    for layer in layers {
        shape = match (layer, shape) {
            (LayerSpec::Conv1d { name, filters, kernel_size, .. }, Shape::Map { len, ch }) => {
                if *kernel_size == 0 || *filters == 0 {
                    return Err(Error::Format(format!("layer {name}: empty convolution")));
                }
                out.push((format!("{name}.kernel"), vec![*kernel_size, ch, *filters]));
                out.push((format!("{name}.bias"), vec![*filters]));
                Shape::Map { len, ch: *filters }
            }
            (LayerSpec::Maxpool1d { name, pool }, Shape::Map { len, ch }) => {
                if *pool == 0 || len / pool == 0 {
                    return Err(Error::Format(format!("layer {name}: pool {pool} leaves no output")));
                }
                Shape::Map { len: len / pool, ch }
            }
            (LayerSpec::Flatten { .. }, Shape::Map { len, ch }) => Shape::Flat(len * ch),
            (LayerSpec::Dense { name, units, .. }, Shape::Flat(n)) => {
                out.push((format!("{name}.kernel"), vec![n, *units]));
                out.push((format!("{name}.bias"), vec![*units]));
                Shape::Flat(*units)
            }
            (l, s) => return Err(Error::Format(format!("layer {l:?} cannot follow shape {s:?}"))),
        };
    }
    Ok((out, shape))
}

fn flatten_len_of(layers: &[LayerSpec], input: (usize, usize)) -> Result<usize> {
    let mut shape = Shape::Map { len: input.0, ch: input.1 };
    for layer in layers {
        match (layer, shape) {
            (LayerSpec::Flatten { .. }, Shape::Map { len, ch }) => return Ok(len * ch),
            (LayerSpec::Conv1d { filters, .. }, Shape::Map { len, .. }) => shape = Shape::Map { len, ch: *filters },
            (LayerSpec::Maxpool1d { pool, .. }, Shape::Map { len, ch }) => {
                shape = Shape::Map { len: len / (*pool).max(1), ch }
            }
            _ => break,
        }
    }
    Err(Error::Format("layer list has no flatten layer".into()))
}

impl WeightBundle {
    /// Builds a bundle from layer specs and named tensors, assigning blob
    /// offsets in layer order.
    pub fn new(
        architecture_id: &str,
        model_order: usize,
        input: (usize, usize),
        layers: Vec<LayerSpec>,
        mut tensors: BTreeMap<String, Tensor>,
    ) -> Result<Self> {
        let (expected, _) = tensor_shapes(&layers, input)?;
        let mut entries = Vec::with_capacity(expected.len());
        let mut offset = 0;
        for (name, shape) in &expected {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
            entries.push(TensorEntry { name: name.clone(), shape: t.shape.clone(), offset });
            offset += 4 * t.data.len();
            let _ = shape;
        }
        tensors.retain(|k, _| expected.iter().any(|(n, _)| n == k));
        let header = BundleHeader {
            format_version: BUNDLE_FORMAT_VERSION,
            architecture_id: architecture_id.to_string(),
            model_order,
            input_window: input.0,
            input_channels: input.1,
            flatten_len: flatten_len_of(&layers, input)?,
            layers,
            tensors: entries,
        };
        let bundle = Self { header, tensors };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Start-parameter network for model order `l` and window `w` with every
    /// weight produced by `f(tensor_name, flat_index)`.
    pub fn mpc_cnn_with(l: usize, w: usize, mut f: impl FnMut(&str, usize) -> f32) -> Result<Self> {
        let layers = mpc_cnn_layers(l);
        let (shapes, _) = tensor_shapes(&layers, (w, 2))?;
        let tensors = shapes
            .into_iter()
            .map(|(name, shape)| {
                let n = shape.iter().product();
                let data = (0..n).map(|i| f(&name, i)).collect();
                (name, Tensor { shape, data })
            })
            .collect();
        Self::new(MPC_CNN_ARCH, l, (w, 2), layers, tensors)
    }

    pub fn header(&self) -> &BundleHeader {
        &self.header
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
    }

    /// Checks shape chaining, tensor shapes and architecture-specific rules.
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported bundle version {}", h.format_version)));
        }
        let input = (h.input_window, h.input_channels);
        let (expected, out_shape) = tensor_shapes(&h.layers, input)?;
        if flatten_len_of(&h.layers, input)? != h.flatten_len {
            return Err(Error::Format(format!("header flatten_len {} disagrees with the layer stack", h.flatten_len)));
        }
        if expected.len() != h.tensors.len() || expected.len() != self.tensors.len() {
            return Err(Error::Format("tensor list does not match the layer stack".into()));
        }
        for (name, shape) in &expected {
            let t = self.tensor(name)?;
            if &t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Format(format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape)));
            }
        }
        match h.architecture_id.as_str() {
            MPC_CNN_ARCH => {
                if h.input_channels != 2 || h.layers != mpc_cnn_layers(h.model_order) || h.model_order == 0 {
                    return Err(Error::Format("layer stack does not match the start-parameter network".into()));
                }
                if out_shape != Shape::Flat(3 * h.model_order) {
                    return Err(Error::Format("final layer width must be 3L".into()));
                }
            }
            MODEL_ORDER_ARCH => {
                if out_shape != Shape::Flat(h.model_order) || h.model_order == 0 {
                    return Err(Error::Format("classifier output width must equal the class count".into()));
                }
            }
            other => return Err(Error::Format(format!("unknown architecture '{other}'"))),
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(16 + header.len());
        out.extend_from_slice(&BUNDLE_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let mut entries: Vec<&TensorEntry> = self.header.tensors.iter().collect();
        entries.sort_by_key(|e| e.offset);
        for e in entries {
            for v in &self.tensors[&e.name].data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || bytes[..8] != BUNDLE_MAGIC {
            return Err(Error::Format("not a weight bundle (bad magic)".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let blob_start = 16usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format("header length exceeds file".into()))?;
        let header: BundleHeader = serde_json::from_slice(&bytes[16..blob_start])
            .map_err(|e| Error::Format(format!("bundle header: {e}")))?;
        let blob = &bytes[blob_start..];
        let mut tensors = BTreeMap::new();
        let mut covered = 0usize;
        for e in &header.tensors {
            let n: usize = e.shape.iter().product();
            let end = e.offset.checked_add(4 * n).filter(|&x| x <= blob.len()).ok_or_else(|| {
                Error::Format(format!("tensor {} exceeds the blob", e.name))
            })?;
            let data = blob[e.offset..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            covered += 4 * n;
            if tensors.insert(e.name.clone(), Tensor { shape: e.shape.clone(), data }).is_some() {
                return Err(Error::Format(format!("duplicate tensor {}", e.name)));
            }
        }
        if covered != blob.len() {
            return Err(Error::Format("blob size does not match the tensor list".into()));
        }
        let bundle = Self { header, tensors };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Writes atomically: temp file in the same directory, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}
