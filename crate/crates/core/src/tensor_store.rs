//! Named-tensor weight files.
//!
//! A weight set is a JSON manifest plus a little-endian `f32` blob:
//!
//! ```text
//! {"format": "vecmap-weights", "version": 1, "blob": "weights.bin", "seed": 7,
//!  "tensors": [{"name": "decoder.cls.weight", "shape": [3, 256], "offset": 0}, ...]}
//! ```
//!
//! `offset` is in bytes from the start of the blob; each tensor occupies
//! `4 · Π shape` bytes, row-major. `seed` is present when the tensors came
//! from the seeded generator in [`crate::rng`].

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{LayerNorm, Linear, Mlp};
use crate::scalar::Scalar;

const FORMAT: &str = "vecmap-weights";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    blob: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    tensors: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorStore {
    tensors: BTreeMap<String, Tensor>,
    pub seed: Option<u64>,
}

fn to_f32<T: Scalar>(v: &[T]) -> Vec<f32> {
    v.iter().map(|x| x.to_f32().unwrap_or(f32::NAN)).collect()
}

fn from_f32<T: Scalar>(v: &[f32]) -> Vec<T> {
    v.iter().map(|x| T::lit(*x as f64)).collect()
}

impl TensorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<()> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!("tensor `{name}`: shape {shape:?} vs {} values", data.len())));
        }
        self.tensors.insert(name, Tensor { shape, data });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    /// Fetches a tensor and checks its shape.
    pub fn get_as<T: Scalar>(&self, name: &str, shape: &[usize]) -> Result<Vec<T>> {
        let t = self.get(name)?;
        if t.shape != shape {
            return Err(Error::ShapeMismatch(format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.shape)));
        }
        Ok(from_f32(&t.data))
    }

    pub fn put<T: Scalar>(&mut self, name: impl Into<String>, shape: Vec<usize>, data: &[T]) {
        self.insert(name, shape, to_f32(data)).expect("caller supplies consistent shape");
    }

    pub fn put_linear<T: Scalar>(&mut self, prefix: &str, l: &Linear<T>) {
        self.put(format!("{prefix}.weight"), vec![l.out_dim, l.in_dim], &l.weight);
        if let Some(b) = &l.bias {
            self.put(format!("{prefix}.bias"), vec![l.out_dim], b);
        }
    }

    pub fn linear<T: Scalar>(&self, prefix: &str, in_dim: usize, out_dim: usize, with_bias: bool) -> Result<Linear<T>> {
        let w = self.get_as(&format!("{prefix}.weight"), &[out_dim, in_dim])?;
        let b = if with_bias { Some(self.get_as(&format!("{prefix}.bias"), &[out_dim])?) } else { None };
        Linear::new(in_dim, out_dim, w, b)
    }

    pub fn put_mlp<T: Scalar>(&mut self, prefix: &str, m: &Mlp<T>) {
        self.put_linear(&format!("{prefix}.hidden"), &m.hidden);
        self.put_linear(&format!("{prefix}.output"), &m.output);
    }

    pub fn mlp<T: Scalar>(&self, prefix: &str, in_dim: usize, hidden: usize, out_dim: usize) -> Result<Mlp<T>> {
        Ok(Mlp {
            hidden: self.linear(&format!("{prefix}.hidden"), in_dim, hidden, true)?,
            output: self.linear(&format!("{prefix}.output"), hidden, out_dim, true)?,
        })
    }

    pub fn put_layer_norm<T: Scalar>(&mut self, prefix: &str, ln: &LayerNorm<T>) {
        self.put(format!("{prefix}.gain"), vec![ln.dim()], &ln.gain);
        self.put(format!("{prefix}.bias"), vec![ln.dim()], &ln.bias);
    }

    pub fn layer_norm<T: Scalar>(&self, prefix: &str, dim: usize, eps: T) -> Result<LayerNorm<T>> {
        Ok(LayerNorm {
            gain: self.get_as(&format!("{prefix}.gain"), &[dim])?,
            bias: self.get_as(&format!("{prefix}.bias"), &[dim])?,
            eps,
        })
    }

    /// Writes the manifest at `path` and the blob next to it (`<stem>.bin`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("weights");
        let blob_name = format!("{stem}.bin");
        if path.file_name().and_then(|s| s.to_str()) == Some(blob_name.as_str()) {
            return Err(Error::InvalidArgument(format!("manifest path {} would collide with its blob", path.display())));
        }
        let mut blob = Vec::new();
        let mut entries = Vec::with_capacity(self.tensors.len());
        for (name, t) in &self.tensors {
            entries.push(ManifestEntry { name: name.clone(), shape: t.shape.clone(), offset: blob.len() as u64 });
            for v in &t.data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Manifest { format: FORMAT.into(), version: 1, blob: blob_name.clone(), seed: self.seed, tensors: entries };
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        std::fs::File::create(dir.join(&blob_name))?.write_all(&blob)?;
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("weight manifest: {e}")))?;
        if manifest.format != FORMAT {
            return Err(Error::Format(format!("unexpected weight format `{}`", manifest.format)));
        }
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let mut blob = Vec::new();
        std::fs::File::open(dir.join(&manifest.blob))?.read_to_end(&mut blob)?;
        let mut store = TensorStore { tensors: BTreeMap::new(), seed: manifest.seed };
        for e in manifest.tensors {
            let count: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let end = start + 4 * count;
            let bytes = blob
                .get(start..end)
                .ok_or_else(|| Error::Format(format!("tensor `{}` extends past the end of the blob", e.name)))?;
            let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            store.insert(e.name, e.shape, data)?;
        }
        Ok(store)
    }
}
