use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("tensor shape must have at least one dimension")]
    EmptyShape,
    #[error("tensor shape {0:?} contains a zero dimension")]
    ZeroDimension(Vec<usize>),
    #[error("tensor shape {shape:?} holds {expected} elements but buffer has {actual}")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
}

/// Dense row-major tensor of 32-bit floats.
#[derive(Clone, PartialEq)]
pub struct TensorData {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl TensorData {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let expected = checked_len(&shape)?;
        if expected != data.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self, TensorError> {
        let len = checked_len(&shape)?;
        Ok(Self {
            shape,
            data: vec![0.0; len],
        })
    }

    /// Rank-1 tensor over `data`. Fails only for an empty buffer.
    pub fn vector(data: Vec<f32>) -> Result<Self, TensorError> {
        Self::new(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<f32>) {
        (self.shape, self.data)
    }

    /// Largest absolute value in the buffer; NaN entries are ignored.
    pub fn max_abs(&self) -> f32 {
        self.data
            .iter()
            .fold(0.0f32, |m, v| if v.abs() > m { v.abs() } else { m })
    }

    /// Bitwise equality, distinguishing -0.0 from 0.0 and comparing NaN payloads.
    pub fn bit_eq(&self, other: &TensorData) -> bool {
        self.shape == other.shape
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl fmt::Debug for TensorData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        let mut s = f.debug_struct("TensorData");
        s.field("shape", &self.shape);
        if self.data.len() <= PREVIEW {
            s.field("data", &self.data);
        } else {
            s.field(
                "data",
                &format_args!("{:?}.. ({} values)", &self.data[..PREVIEW], self.data.len()),
            );
        }
        s.finish()
    }
}

/// Element count of `shape`, rejecting empty shapes, zero dimensions and overflow.
pub fn checked_len(shape: &[usize]) -> Result<usize, TensorError> {
    if shape.is_empty() {
        return Err(TensorError::EmptyShape);
    }
    let mut n: usize = 1;
    for &d in shape {
        if d == 0 {
            return Err(TensorError::ZeroDimension(shape.to_vec()));
        }
        n = n.checked_mul(d).ok_or(TensorError::LengthMismatch {
            shape: shape.to_vec(),
            expected: usize::MAX,
            actual: 0,
        })?;
    }
    Ok(n)
}
