//! Named trainable tensors and the portable checkpoint container.
//!
//! # Checkpoint layout (version 1)
//!
//! All integers little-endian.
//!
//! ```text
//! magic      4 bytes  "RNPS"
//! version    u32      1
//! meta_len   u32      length of the metadata block
//! meta       bytes    UTF-8 JSON (run metadata, may be empty)
//! count      u32      number of parameters
//! repeated `count` times, sorted by name:
//!   name_len u32, name UTF-8 bytes
//!   flags    u8       bit 0 = regularized
//!   ndim     u32, dims u64 × ndim
//!   nslots   u32      optimizer state tensors (same shape as the value)
//!   value    f64 × product(dims)
//!   slots    f64 × product(dims), nslots times
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RNPS";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
    pub regularize: bool,
    /// Optimizer state, each the same shape as `value`.
    pub slots: Vec<Tensor>,
}

/// Parameters keyed by name; iteration is sorted by name.
#[derive(Clone, Debug, Default)]
pub struct ParameterStore {
    entries: BTreeMap<String, Parameter>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor, regularize: bool) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::DuplicateParameter(name.to_string()));
        }
        let grad = Tensor::zeros(value.shape().to_vec());
        self.entries.insert(
            name.to_string(),
            Parameter {
                value,
                grad,
                regularize,
                slots: Vec::new(),
            },
        );
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.entries.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name).map(|p| &p.value)
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name).map(|p| &p.grad)
    }

    pub fn set_value(&mut self, name: &str, value: Tensor) -> Result<()> {
        let p = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        if p.value.shape() != value.shape() {
            return Err(Error::shape("set_value", p.value.shape(), value.shape()));
        }
        p.value = value;
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    pub fn regularized_names(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|(_, p)| p.regularize)
            .map(|(k, _)| k.as_str())
    }

    /// `Σ‖W‖²` over regularized parameters.
    pub fn regularized_sum_squares(&self) -> f64 {
        self.entries
            .values()
            .filter(|p| p.regularize)
            .map(|p| p.value.sum_squares())
            .sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn accumulate_grad(&mut self, name: &str, delta: &[f64]) -> Result<()> {
        let p = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        if delta.len() != p.grad.len() {
            return Err(Error::shape("accumulate_grad", p.grad.shape(), &[delta.len()]));
        }
        for (g, d) in p.grad.data_mut().iter_mut().zip(delta) {
            *g += d;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, meta: &str) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf, meta)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }

    pub fn write_to<W: Write>(&self, w: &mut W, meta: &str) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        write_bytes(w, meta.as_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, p) in &self.entries {
            write_bytes(w, name.as_bytes())?;
            w.write_all(&[u8::from(p.regularize)])?;
            w.write_all(&(p.value.shape().len() as u32).to_le_bytes())?;
            for &d in p.value.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            w.write_all(&(p.slots.len() as u32).to_le_bytes())?;
            for t in std::iter::once(&p.value).chain(&p.slots) {
                for v in t.data() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<(Self, String)> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a parameter checkpoint".into()));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let meta = String::from_utf8(read_bytes(r)?)
            .map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        let count = read_u32(r)?;
        let mut store = ParameterStore::new();
        for _ in 0..count {
            let name = String::from_utf8(read_bytes(r)?)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
            let mut flags = [0u8; 1];
            r.read_exact(&mut flags)?;
            let ndim = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u64(r)? as usize);
            }
            let nslots = read_u32(r)? as usize;
            let len: usize = shape.iter().product();
            let mut read_tensor = || -> Result<Tensor> {
                let mut data = Vec::with_capacity(len);
                for _ in 0..len {
                    let mut b = [0u8; 8];
                    r.read_exact(&mut b)?;
                    data.push(f64::from_le_bytes(b));
                }
                Tensor::new(shape.clone(), data)
            };
            let value = read_tensor()?;
            let slots = (0..nslots).map(|_| read_tensor()).collect::<Result<Vec<_>>>()?;
            store.insert(&name, value, flags[0] & 1 == 1)?;
            store.entries.get_mut(&name).expect("just inserted").slots = slots;
        }
        Ok((store, meta))
    }
}

fn write_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> Result<()> {
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
