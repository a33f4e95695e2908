use std::path::Path;

use indexmap::IndexMap;

use super::arch::ConvSpec;
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::optim::{name_seed, xavier_init};
use crate::tensor::{Element, Tensor};

pub const WEIGHT_MAGIC: &[u8] = b"SRITM\x01";

/// Named parameter tensors in registration order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore<T: Element> {
    tensors: IndexMap<String, Tensor<T>>,
}

impl<T: Element> Default for WeightStore<T> {
    fn default() -> Self {
        WeightStore {
            tensors: IndexMap::new(),
        }
    }
}

impl<T: Element> WeightStore<T> {
    pub fn zeros(specs: &[ConvSpec]) -> Self {
        let mut s = Self::default();
        for c in specs {
            s.tensors
                .insert(c.weight_name(), Tensor::zeros(&[c.c_out, c.c_in, c.k, c.k]));
            s.tensors.insert(c.bias_name(), Tensor::zeros(&[c.c_out]));
        }
        s
    }

    /// Glorot-uniform weights and zero biases; each tensor's stream is
    /// derived from `seed` and its name, so adding layers never reshuffles
    /// the others.
    pub fn xavier(specs: &[ConvSpec], seed: u64) -> Result<Self> {
        let mut s = Self::zeros(specs);
        for (name, t) in s.tensors.iter_mut() {
            if name.ends_with(".weight") {
                *t = xavier_init::<f64>(t.shape(), name_seed(seed, name))?.cast();
            }
        }
        Ok(s)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    /// Replaces an existing tensor of the same shape.
    pub fn set(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let slot = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| Error::UnknownTensor(name.to_string()))?;
        if slot.shape() != value.shape() {
            return Err(Error::TensorShape {
                name: name.to_string(),
                expected: slot.shape().to_vec(),
                found: value.shape().to_vec(),
            });
        }
        *slot = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn map_mut(&mut self) -> &mut IndexMap<String, Tensor<T>> {
        &mut self.tensors
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Scalar counts of (weights, biases).
    pub fn partition_counts(&self) -> (usize, usize) {
        self.tensors.iter().fold((0, 0), |(w, b), (n, t)| {
            if is_bias(n) {
                (w, b + t.len())
            } else {
                (w + t.len(), b)
            }
        })
    }

    pub fn cast<U: Element>(&self) -> WeightStore<U> {
        WeightStore {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        write_section(&mut w, self.tensors.iter().map(|(k, v)| (k.as_str(), v.cast())));
        w.buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Overwrites every tensor from `bytes`, which must hold exactly this
    /// store's names with matching shapes.
    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let mut r = Reader::new("weight file", bytes);
        let entries = read_section(&mut r)?;
        if !r.at_end() {
            return Err(Error::Truncated {
                what: "weight file",
                offset: r.offset() as u64,
                detail: "trailing bytes after last tensor".into(),
            });
        }
        self.assign(entries)
    }

    pub fn load(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.load_bytes(&bytes)
    }

    pub(crate) fn assign(&mut self, entries: Vec<(String, Tensor<f32>)>) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (name, t) in entries {
            self.set(&name, t.cast())?;
            seen.insert(name);
        }
        match self.tensors.keys().find(|k| !seen.contains(*k)) {
            Some(missing) => Err(Error::MissingTensor(missing.clone())),
            None => Ok(()),
        }
    }
}

pub fn is_bias(name: &str) -> bool {
    name.ends_with(".bias")
}

/// Parameters that belong to SMF subnets or per-block modulation heads.
pub fn is_modulation_param(name: &str) -> bool {
    name.contains(".smf.") || name.contains(".mod.")
}

pub(crate) fn write_section<'a>(
    w: &mut Writer,
    entries: impl ExactSizeIterator<Item = (&'a str, Tensor<f32>)>,
) {
    w.bytes(WEIGHT_MAGIC);
    w.u32(entries.len() as u32);
    for (name, t) in entries {
        w.u16(name.len() as u16);
        w.bytes(name.as_bytes());
        w.tensor(&t);
    }
}

pub(crate) fn read_section(r: &mut Reader) -> Result<Vec<(String, Tensor<f32>)>> {
    r.magic(WEIGHT_MAGIC)?;
    let count = r.u32("tensor count")? as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    let mut names = std::collections::HashSet::new();
    for i in 0..count {
        let len = r.u16(&format!("name length of tensor {i}"))? as usize;
        let start = r.offset();
        let raw = r.take(len, &format!("name of tensor {i}"))?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::Truncated {
                what: "weight file",
                offset: start as u64,
                detail: format!("tensor {i} name is not UTF-8"),
            })?
            .to_string();
        if !names.insert(name.clone()) {
            return Err(Error::Truncated {
                what: "weight file",
                offset: start as u64,
                detail: format!("duplicate tensor name `{name}`"),
            });
        }
        let t = r.tensor(&format!("tensor `{name}`"))?;
        out.push((name, t));
    }
    Ok(out)
}
