//! Binary weight sidecar.
//!
//! Little-endian layout:
//!
//! ```text
//! magic        4 bytes  "NNWB"
//! version      u16      1
//! tensor_count u32
//! per tensor:
//!   key_len    u16
//!   key        key_len bytes, UTF-8
//!   rank       u8
//!   dims       rank x u32
//!   data       product(dims) x f32
//! ```
//!
//! Layer weights are stored as two tensors keyed `<weights_key>.kernel` and
//! `<weights_key>.bias`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model_ir::LayerWeights;
use crate::tensor::{TensorData, TensorError};

pub const SIDECAR_MAGIC: &[u8; 4] = b"NNWB";
pub const SIDECAR_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SidecarError {
    #[error("bad sidecar magic {0:02x?}, expected \"NNWB\"")]
    Magic(Vec<u8>),
    #[error("unsupported sidecar version {0}")]
    Version(u16),
    #[error("sidecar truncated reading {what}: need {needed} bytes at offset {offset}, {available} available")]
    Truncation {
        what: &'static str,
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("duplicate sidecar tensor key `{0}`")]
    DuplicateKey(String),
    #[error("sidecar tensor key at offset {0} is not valid UTF-8")]
    InvalidKey(usize),
    #[error("sidecar tensor `{key}`: {source}")]
    InvalidTensor { key: String, source: TensorError },
    #[error("{0} trailing bytes after the last sidecar tensor")]
    TrailingBytes(usize),
    #[error("sidecar key `{0}` exceeds 65535 bytes")]
    KeyTooLong(String),
    #[error("sidecar tensor `{0}` has a rank or dimension that does not fit the format")]
    ShapeTooLarge(String),
}

pub fn kernel_key(weights_key: &str) -> String {
    format!("{weights_key}.kernel")
}

pub fn bias_key(weights_key: &str) -> String {
    format!("{weights_key}.bias")
}

/// Tensors decoded from a sidecar, keyed by tensor key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightSidecar {
    tensors: BTreeMap<String, TensorData>,
}

impl WeightSidecar {
    pub fn get(&self, key: &str) -> Option<&TensorData> {
        self.tensors.get(key)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Kernel and bias stored under `weights_key`, if both are present.
    pub fn layer_weights(&self, weights_key: &str) -> Option<LayerWeights> {
        let kernel = self.tensors.get(&kernel_key(weights_key))?;
        let bias = self.tensors.get(&bias_key(weights_key))?;
        Some(LayerWeights::new(kernel.clone(), bias.clone()))
    }

    /// True if either half of `weights_key` is present.
    pub fn mentions(&self, weights_key: &str) -> bool {
        self.tensors.contains_key(&kernel_key(weights_key)) || self.tensors.contains_key(&bias_key(weights_key))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, needed: usize, what: &'static str) -> Result<&'a [u8], SidecarError> {
        let available = self.bytes.len() - self.offset;
        if needed > available {
            return Err(SidecarError::Truncation {
                what,
                offset: self.offset,
                needed,
                available,
            });
        }
        let out = &self.bytes[self.offset..self.offset + needed];
        self.offset += needed;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], SidecarError> {
        Ok(self.take(N, what)?.try_into().expect("exact length"))
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, SidecarError> {
        Ok(self.array::<1>(what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, SidecarError> {
        self.array(what).map(u16::from_le_bytes)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, SidecarError> {
        self.array(what).map(u32::from_le_bytes)
    }
}

pub fn read_weight_sidecar(bytes: &[u8]) -> Result<WeightSidecar, SidecarError> {
    if bytes.len() < SIDECAR_MAGIC.len() || &bytes[..4] != SIDECAR_MAGIC {
        return Err(SidecarError::Magic(bytes[..bytes.len().min(4)].to_vec()));
    }
    let mut cur = Cursor { bytes, offset: 4 };
    let version = cur.u16("version")?;
    if version != SIDECAR_VERSION {
        return Err(SidecarError::Version(version));
    }
    let count = cur.u32("tensor count")?;

    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let key_len = cur.u16("key length")? as usize;
        let key_offset = cur.offset;
        let key = std::str::from_utf8(cur.take(key_len, "key")?)
            .map_err(|_| SidecarError::InvalidKey(key_offset))?
            .to_string();
        let rank = cur.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32("dimension")? as usize);
        }
        let len = crate::tensor::checked_len(&shape).map_err(|source| SidecarError::InvalidTensor {
            key: key.clone(),
            source,
        })?;
        let raw = cur.take(len.saturating_mul(4), "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        let tensor = TensorData::new(shape, data).expect("length checked");
        if tensors.contains_key(&key) {
            return Err(SidecarError::DuplicateKey(key));
        }
        tensors.insert(key, tensor);
    }
    if cur.offset != bytes.len() {
        return Err(SidecarError::TrailingBytes(bytes.len() - cur.offset));
    }
    Ok(WeightSidecar { tensors })
}

/// Encodes tensors in the given order.
pub fn write_weight_sidecar<'a, I>(tensors: I) -> Result<Vec<u8>, SidecarError>
where
    I: IntoIterator<Item = (&'a str, &'a TensorData)>,
{
    let tensors: Vec<_> = tensors.into_iter().collect();
    let count = u32::try_from(tensors.len()).map_err(|_| SidecarError::ShapeTooLarge("<count>".into()))?;
    let mut out = Vec::new();
    out.extend_from_slice(SIDECAR_MAGIC);
    out.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for (key, tensor) in tensors {
        let key_len = u16::try_from(key.len()).map_err(|_| SidecarError::KeyTooLong(key.to_string()))?;
        let rank = u8::try_from(tensor.rank()).map_err(|_| SidecarError::ShapeTooLarge(key.to_string()))?;
        out.extend_from_slice(&key_len.to_le_bytes());
        out.extend_from_slice(key.as_bytes());
        out.push(rank);
        for &d in tensor.shape() {
            let d = u32::try_from(d).map_err(|_| SidecarError::ShapeTooLarge(key.to_string()))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}
