use std::fmt;
use std::str::FromStr;

use crate::tensor::TensorData;

/// Reserved predecessor id naming the network input.
pub const INPUT_ID: &str = "__input__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
    Softmax,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Linear,
        Activation::Relu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Softmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    Valid,
    Same,
}

impl Padding {
    pub fn name(self) -> &'static str {
        match self {
            Padding::Valid => "valid",
            Padding::Same => "same",
        }
    }
}

impl FromStr for Padding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "valid" => Ok(Padding::Valid),
            "same" => Ok(Padding::Same),
            other => Err(other.to_string()),
        }
    }
}

/// Hyperparameters of one layer. Every kind is single-input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerKind {
    Dense {
        units: usize,
        activation: Activation,
    },
    Conv1D {
        filters: usize,
        kernel_size: usize,
        stride: usize,
        padding: Padding,
        activation: Activation,
    },
    Conv2D {
        filters: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride_h: usize,
        stride_w: usize,
        padding: Padding,
        activation: Activation,
    },
    MaxPool1D {
        pool_size: usize,
        stride: usize,
    },
    MaxPool2D {
        pool_h: usize,
        pool_w: usize,
        stride_h: usize,
        stride_w: usize,
    },
    Flatten,
}

impl LayerKind {
    /// Schema type string of this kind.
    pub fn type_name(&self) -> &'static str {
        match self {
            LayerKind::Dense { .. } => "dense",
            LayerKind::Conv1D { .. } => "conv1d",
            LayerKind::Conv2D { .. } => "conv2d",
            LayerKind::MaxPool1D { .. } => "maxpool1d",
            LayerKind::MaxPool2D { .. } => "maxpool2d",
            LayerKind::Flatten => "flatten",
        }
    }

    pub fn activation(&self) -> Option<Activation> {
        match *self {
            LayerKind::Dense { activation, .. }
            | LayerKind::Conv1D { activation, .. }
            | LayerKind::Conv2D { activation, .. } => Some(activation),
            _ => None,
        }
    }

    pub fn has_weights(&self) -> bool {
        matches!(
            self,
            LayerKind::Dense { .. } | LayerKind::Conv1D { .. } | LayerKind::Conv2D { .. }
        )
    }

    /// Named integer hyperparameters, used for positivity checks and reporting.
    pub fn int_params(&self) -> Vec<(&'static str, usize)> {
        match *self {
            LayerKind::Dense { units, .. } => vec![("units", units)],
            LayerKind::Conv1D {
                filters,
                kernel_size,
                stride,
                ..
            } => vec![("filters", filters), ("kernel_size", kernel_size), ("stride", stride)],
            LayerKind::Conv2D {
                filters,
                kernel_h,
                kernel_w,
                stride_h,
                stride_w,
                ..
            } => vec![
                ("filters", filters),
                ("kernel_h", kernel_h),
                ("kernel_w", kernel_w),
                ("stride_h", stride_h),
                ("stride_w", stride_w),
            ],
            LayerKind::MaxPool1D { pool_size, stride } => {
                vec![("pool_size", pool_size), ("stride", stride)]
            }
            LayerKind::MaxPool2D {
                pool_h,
                pool_w,
                stride_h,
                stride_w,
            } => vec![
                ("pool_h", pool_h),
                ("pool_w", pool_w),
                ("stride_h", stride_h),
                ("stride_w", stride_w),
            ],
            LayerKind::Flatten => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub id: String,
    pub kind: LayerKind,
    /// Predecessor ids; [`INPUT_ID`] names the network input.
    pub inputs: Vec<String>,
}

impl LayerSpec {
    pub fn new(id: impl Into<String>, kind: LayerKind, input: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind,
            inputs: vec![input.into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub kernel: TensorData,
    pub bias: TensorData,
}

impl LayerWeights {
    pub fn new(kernel: TensorData, bias: TensorData) -> Self {
        Self { kernel, bias }
    }

    pub fn param_count(&self) -> usize {
        self.kernel.len() + self.bias.len()
    }
}

/// A layer together with its (optional) trained parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNode {
    pub spec: LayerSpec,
    pub weights: Option<LayerWeights>,
}

impl LayerNode {
    pub fn new(spec: LayerSpec, weights: Option<LayerWeights>) -> Self {
        Self { spec, weights }
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn kind(&self) -> &LayerKind {
        &self.spec.kind
    }
}
