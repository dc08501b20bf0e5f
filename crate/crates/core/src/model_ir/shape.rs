use std::collections::BTreeMap;

use thiserror::Error;

use super::layer::{Activation, LayerKind, Padding};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("layer `{layer}` ({kind}) expects a rank-{expected} input, got shape {actual:?}")]
    RankMismatch {
        layer: String,
        kind: &'static str,
        expected: usize,
        actual: Vec<usize>,
    },
    #[error("layer `{layer}`: window {window} with stride {stride} does not fit input length {input} (no positive output length)")]
    NonPositiveLength {
        layer: String,
        input: usize,
        window: usize,
        stride: usize,
    },
    #[error("layer `{layer}`: hyperparameter `{name}` must be positive")]
    ZeroHyperparameter { layer: String, name: &'static str },
    #[error("layer `{layer}`: softmax requires a rank-1 output, got shape {shape:?}")]
    SoftmaxRank { layer: String, shape: Vec<usize> },
    #[error("input shape mismatch: expected {expected:?}, got {actual:?}")]
    InputMismatch { expected: Vec<usize>, actual: Vec<usize> },
}

/// Output shape of every layer, keyed by layer id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ShapeMap(BTreeMap<String, Vec<usize>>);

impl ShapeMap {
    pub fn get(&self, id: &str) -> Option<&[usize]> {
        self.0.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub(crate) fn insert(&mut self, id: String, shape: Vec<usize>) {
        self.0.insert(id, shape);
    }
}

/// Output length and leading pad along one axis of a windowed layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisGeometry {
    pub out_len: usize,
    pub pad_before: usize,
}

/// `valid`: floor((L - K) / s) + 1, `same`: ceil(L / s) with the total pad
/// max((out - 1) * s + K - L, 0) split so the smaller half goes first.
pub fn axis_geometry(input: usize, window: usize, stride: usize, padding: Padding) -> Option<AxisGeometry> {
    if input == 0 || window == 0 || stride == 0 {
        return None;
    }
    match padding {
        Padding::Valid => {
            if window > input {
                return None;
            }
            Some(AxisGeometry {
                out_len: (input - window) / stride + 1,
                pad_before: 0,
            })
        }
        Padding::Same => {
            let out_len = input.div_ceil(stride);
            let total = ((out_len - 1) * stride + window).saturating_sub(input);
            Some(AxisGeometry {
                out_len,
                pad_before: total / 2,
            })
        }
    }
}

fn expect_rank(layer: &str, kind: &LayerKind, input: &[usize], rank: usize) -> Result<(), ShapeError> {
    if input.len() != rank {
        return Err(ShapeError::RankMismatch {
            layer: layer.to_string(),
            kind: kind.type_name(),
            expected: rank,
            actual: input.to_vec(),
        });
    }
    Ok(())
}

fn axis(layer: &str, input: usize, window: usize, stride: usize, padding: Padding) -> Result<AxisGeometry, ShapeError> {
    axis_geometry(input, window, stride, padding).ok_or_else(|| ShapeError::NonPositiveLength {
        layer: layer.to_string(),
        input,
        window,
        stride,
    })
}

/// Output shape of a single layer applied to `input` (channels-last).
pub fn output_shape(layer: &str, kind: &LayerKind, input: &[usize]) -> Result<Vec<usize>, ShapeError> {
    if let Some((name, _)) = kind.int_params().into_iter().find(|&(_, v)| v == 0) {
        return Err(ShapeError::ZeroHyperparameter {
            layer: layer.to_string(),
            name,
        });
    }
    let out = match *kind {
        LayerKind::Dense { units, .. } => {
            expect_rank(layer, kind, input, 1)?;
            vec![units]
        }
        LayerKind::Conv1D {
            filters,
            kernel_size,
            stride,
            padding,
            ..
        } => {
            expect_rank(layer, kind, input, 2)?;
            vec![axis(layer, input[0], kernel_size, stride, padding)?.out_len, filters]
        }
        LayerKind::Conv2D {
            filters,
            kernel_h,
            kernel_w,
            stride_h,
            stride_w,
            padding,
            ..
        } => {
            expect_rank(layer, kind, input, 3)?;
            vec![
                axis(layer, input[0], kernel_h, stride_h, padding)?.out_len,
                axis(layer, input[1], kernel_w, stride_w, padding)?.out_len,
                filters,
            ]
        }
        LayerKind::MaxPool1D { pool_size, stride } => {
            expect_rank(layer, kind, input, 2)?;
            vec![
                axis(layer, input[0], pool_size, stride, Padding::Valid)?.out_len,
                input[1],
            ]
        }
        LayerKind::MaxPool2D {
            pool_h,
            pool_w,
            stride_h,
            stride_w,
        } => {
            expect_rank(layer, kind, input, 3)?;
            vec![
                axis(layer, input[0], pool_h, stride_h, Padding::Valid)?.out_len,
                axis(layer, input[1], pool_w, stride_w, Padding::Valid)?.out_len,
                input[2],
            ]
        }
        LayerKind::Flatten => vec![input.iter().product()],
    };
    if kind.activation() == Some(Activation::Softmax) && out.len() != 1 {
        return Err(ShapeError::SoftmaxRank {
            layer: layer.to_string(),
            shape: out,
        });
    }
    Ok(out)
}

/// Expected `(kernel, bias)` shapes for a weighted layer with the given input shape.
pub fn weight_shapes(kind: &LayerKind, input: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    let channels = *input.last()?;
    match *kind {
        LayerKind::Dense { units, .. } => Some((vec![input.iter().product(), units], vec![units])),
        LayerKind::Conv1D {
            filters, kernel_size, ..
        } => Some((vec![kernel_size, channels, filters], vec![filters])),
        LayerKind::Conv2D {
            filters,
            kernel_h,
            kernel_w,
            ..
        } => Some((vec![kernel_h, kernel_w, channels, filters], vec![filters])),
        _ => None,
    }
}
