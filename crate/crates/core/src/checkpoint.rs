//! Single-file checkpoint: manifest plus named `f32` tensors.
//!
//! Layout: magic `HYCK`, `u32` LE format version, `u64` LE manifest length,
//! manifest JSON, then every tensor's values as little-endian `f32` in
//! manifest order. The manifest records the format version, a hash of the
//! model shape configuration, the training step and a named-tensor index.

use std::path::Path;

use hytex_tensor::{Adam, ParamStore, Real, Shape, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{put_f32s, write_bytes, Cursor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HYCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 4],
    /// Offset into the payload, in values.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    /// `"pretrain"` or `"train"`.
    pub kind: String,
    pub config_hash: String,
    pub step: u64,
    pub epoch: u64,
    pub config: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config_hash: String,
    pub step: u64,
    pub epoch: u64,
    pub config: serde_json::Value,
    tensors: Vec<(String, Tensor<f32>)>,
}

/// Hex SHA-256 of the JSON serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl Checkpoint {
    pub fn new(kind: &str, config: serde_json::Value, config_hash: String, step: u64, epoch: u64) -> Self {
        Checkpoint { kind: kind.into(), config_hash, step, epoch, config, tensors: Vec::new() }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<f32>) {
        let name = name.into();
        assert!(self.get(&name).is_none(), "duplicate checkpoint entry {name}");
        self.tensors.push((name, t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor<f32>> {
        self.get(name).ok_or_else(|| Error::Version(format!("checkpoint has no entry {name}")))
    }

    /// Store every parameter as `prefix/name`.
    pub fn insert_store<F: Real>(&mut self, prefix: &str, store: &ParamStore<F>) {
        for (name, t) in store.iter() {
            self.insert(format!("{prefix}/{name}"), t.cast());
        }
    }

    /// Overwrite `store` from `prefix/name` entries, checking shapes.
    pub fn load_store<F: Real>(&self, prefix: &str, store: &mut ParamStore<F>) -> Result<()> {
        let names: Vec<String> = store.names().to_vec();
        for (i, name) in names.iter().enumerate() {
            let key = format!("{prefix}/{name}");
            let t = self.require(&key)?;
            let dst = &mut store.values_mut()[i];
            if t.shape() != dst.shape() {
                return Err(Error::Version(format!("{key} has shape {}, model expects {}", t.shape(), dst.shape())));
            }
            *dst = t.cast();
        }
        Ok(())
    }

    /// Store Adam moments as `prefix/<group>/{m,v}/<index>` and the step counter.
    pub fn insert_optimizer<F: Real>(&mut self, prefix: &str, opt: &Adam<F>) {
        self.insert(format!("{prefix}/steps"), Tensor::scalar(opt.steps_taken() as f32));
        for g in opt.groups() {
            for (i, (m, v)) in g.m.iter().zip(&g.v).enumerate() {
                self.insert(format!("{prefix}/{}/m/{i}", g.name), m.cast());
                self.insert(format!("{prefix}/{}/v/{i}", g.name), v.cast());
            }
        }
    }

    pub fn load_optimizer<F: Real>(&self, prefix: &str, opt: &mut Adam<F>) -> Result<()> {
        let steps = self.require(&format!("{prefix}/steps"))?.item();
        opt.set_steps_taken(steps as u64);
        for gi in 0..opt.groups().len() {
            let g = opt.group_mut(gi);
            let name = g.name.clone();
            for i in 0..g.m.len() {
                for (kind, dst) in [("m", &mut g.m[i]), ("v", &mut g.v[i])] {
                    let key = format!("{prefix}/{name}/{kind}/{i}");
                    let t = self.require(&key)?;
                    if t.shape() != dst.shape() {
                        return Err(Error::Version(format!("{key} has shape {}, expected {}", t.shape(), dst.shape())));
                    }
                    *dst = t.cast();
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let tensors = self
            .tensors
            .iter()
            .map(|(name, t)| {
                let e = TensorEntry { name: name.clone(), shape: t.shape().dims(), offset };
                offset += t.len();
                e
            })
            .collect();
        let manifest = Manifest {
            version: FORMAT_VERSION,
            kind: self.kind.clone(),
            config_hash: self.config_hash.clone(),
            step: self.step,
            epoch: self.epoch,
            config: self.config.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&manifest)?;
        let mut out = Vec::with_capacity(16 + json.len() + 4 * offset);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.tensors {
            put_f32s(&mut out, t.data().iter().copied());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut cur = Cursor::new(bytes, path);
        cur.magic(CHECKPOINT_MAGIC)?;
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Version(format!("{}: format version {version}, expected {FORMAT_VERSION}", path.display())));
        }
        let len = cur.u64()? as usize;
        let manifest: Manifest =
            serde_json::from_slice(cur.take(len)?).map_err(|e| Error::format(path, format!("manifest: {e}")))?;
        if manifest.version != version {
            return Err(Error::format(path, "manifest version disagrees with header"));
        }
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        let mut expected_offset = 0;
        for e in &manifest.tensors {
            let shape = Shape::from_dims(e.shape);
            if e.offset != expected_offset {
                return Err(Error::format(path, format!("entry {} at offset {}, expected {expected_offset}", e.name, e.offset)));
            }
            let vals = cur.f32s(shape.numel())?;
            expected_offset += shape.numel();
            tensors.push((e.name.clone(), Tensor::from_vec(shape, vals).expect("length matches shape")));
        }
        cur.finish()?;
        Ok(Checkpoint {
            kind: manifest.kind,
            config_hash: manifest.config_hash,
            step: manifest.step,
            epoch: manifest.epoch,
            config: manifest.config,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.encode()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Data(format!("checkpoint {} does not exist", path.display())));
        }
        Self::decode(&std::fs::read(path)?, path)
    }

    /// Fail with a version error unless the stored hash equals `expected`.
    pub fn check_hash(&self, expected: &str) -> Result<()> {
        if self.config_hash != expected {
            return Err(Error::Version(format!(
                "checkpoint was written for configuration {}, current configuration is {expected}",
                &self.config_hash
            )));
        }
        Ok(())
    }
}
