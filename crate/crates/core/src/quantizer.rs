//! Fixed-point simulation of the forward pass and the fidelity report.
//!
//! Every tensor gets a signed two's-complement Q-format with `total_bits` in
//! {2, 8, 16, 32}. The number of integer bits per tensor comes from a
//! [`QuantPlan`]: kernels and biases are sized from their own magnitude,
//! the input and every layer output from a float calibration pass. Fraction
//! bits are then `total_bits - 1 - integer_bits`, floored at zero, so the
//! integer-bit policy is identical across bit widths.
//!
//! Layer arithmetic runs in f64 on the quantized operands (a wide
//! accumulator) and each layer output is requantized before its consumers
//! read it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::interpreter::{self, check_input};
use crate::model_ir::{NetworkGraph, ShapeError};
use crate::tensor::TensorData;

pub const SUPPORTED_BITS: [u32; 4] = [2, 8, 16, 32];

/// Bit width the fidelity report measures against.
pub const BASELINE_BITS: u32 = 32;

/// Slack added to a tensor's magnitude before taking log2, so an exact power
/// of two gets one more integer bit instead of saturating.
const MAGNITUDE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuantError {
    #[error("unsupported fixed-point width {0}; expected one of 2, 8, 16, 32")]
    UnsupportedBits(u32),
    #[error("fraction bits {frac_bits} exceed {total_bits}-bit format")]
    FracBits { total_bits: u32, frac_bits: u32 },
    #[error("fidelity report needs at least one input")]
    NoInputs,
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Signed fixed-point format with `total_bits` bits, `frac_bits` of them fractional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QFormat {
    total_bits: u32,
    frac_bits: u32,
}

impl QFormat {
    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self, QuantError> {
        if !SUPPORTED_BITS.contains(&total_bits) {
            return Err(QuantError::UnsupportedBits(total_bits));
        }
        if frac_bits > total_bits - 1 {
            return Err(QuantError::FracBits { total_bits, frac_bits });
        }
        Ok(Self { total_bits, frac_bits })
    }

    /// Format with `int_bits` integer bits (excluding sign), clamped so the
    /// fraction never goes negative.
    pub fn with_integer_bits(total_bits: u32, int_bits: u32) -> Result<Self, QuantError> {
        Self::new(total_bits, (total_bits - 1).saturating_sub(int_bits))
    }

    pub fn total_bits(self) -> u32 {
        self.total_bits
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    pub fn int_min(self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    pub fn int_max(self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    pub fn scale(self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    pub fn min_value(self) -> f64 {
        self.int_min() as f64 / self.scale()
    }

    pub fn max_value(self) -> f64 {
        self.int_max() as f64 / self.scale()
    }

    /// Quantization step.
    pub fn resolution(self) -> f64 {
        1.0 / self.scale()
    }
}

/// `clamp(round_half_away(x * 2^f), int_min, int_max) / 2^f`.
pub fn quantize_value(x: f64, q: QFormat) -> f64 {
    quantize(x, q).0
}

/// Like [`quantize_value`], also reporting whether the value saturated.
pub fn quantize(x: f64, q: QFormat) -> (f64, bool) {
    let scaled = (x * q.scale()).round();
    let (lo, hi) = (q.int_min() as f64, q.int_max() as f64);
    if scaled > hi {
        (hi / q.scale(), true)
    } else if scaled < lo {
        (lo / q.scale(), true)
    } else {
        (scaled / q.scale(), false)
    }
}

/// Integer bits needed to hold magnitudes up to `max_abs`.
pub fn integer_bits(max_abs: f64) -> u32 {
    let bits = (max_abs + MAGNITUDE_SLACK).log2().ceil();
    if bits.is_nan() || bits <= 0.0 {
        0
    } else {
        bits.min(64.0) as u32
    }
}

/// Integer bits per tensor, shared across all bit widths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantPlan {
    input: u32,
    kernels: BTreeMap<String, (u32, u32)>,
    activations: BTreeMap<String, u32>,
}

impl QuantPlan {
    /// Sizes weights statically and activations from float forward passes over `inputs`.
    pub fn calibrate(graph: &NetworkGraph, inputs: &[TensorData]) -> Result<Self, QuantError> {
        let mut input_max = 0.0f64;
        let mut act_max: BTreeMap<String, f64> = BTreeMap::new();
        for input in inputs {
            input_max = input_max.max(input.max_abs() as f64);
            for (id, t) in interpreter::forward_traced(graph, input)?.iter() {
                let m = act_max.entry(id.to_string()).or_default();
                *m = m.max(t.max_abs() as f64);
            }
        }
        let kernels = graph
            .layers()
            .filter_map(|n| {
                let w = n.weights.as_ref()?;
                Some((
                    n.id().to_string(),
                    (
                        integer_bits(w.kernel.max_abs() as f64),
                        integer_bits(w.bias.max_abs() as f64),
                    ),
                ))
            })
            .collect();
        Ok(Self {
            input: integer_bits(input_max),
            kernels,
            activations: act_max.into_iter().map(|(k, v)| (k, integer_bits(v))).collect(),
        })
    }

    /// Same integer-bit count for every tensor.
    pub fn uniform(graph: &NetworkGraph, int_bits: u32) -> Self {
        Self {
            input: int_bits,
            kernels: graph
                .layers()
                .filter(|n| n.weights.is_some())
                .map(|n| (n.id().to_string(), (int_bits, int_bits)))
                .collect(),
            activations: graph.layers().map(|n| (n.id().to_string(), int_bits)).collect(),
        }
    }

    pub fn input_bits(&self) -> u32 {
        self.input
    }

    pub fn activation_bits(&self, id: &str) -> Option<u32> {
        self.activations.get(id).copied()
    }

    pub fn kernel_bits(&self, id: &str) -> Option<(u32, u32)> {
        self.kernels.get(id).copied()
    }
}

/// Weights of a graph rounded to one bit width.
#[derive(Debug, Clone)]
pub struct QuantizedWeights {
    total_bits: u32,
    tensors: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    saturations: usize,
}

impl QuantizedWeights {
    pub fn new(graph: &NetworkGraph, plan: &QuantPlan, total_bits: u32) -> Result<Self, QuantError> {
        let mut saturations = 0;
        let mut tensors = BTreeMap::new();
        for node in graph.layers() {
            let Some(w) = &node.weights else { continue };
            let (kb, bb) = plan.kernel_bits(node.id()).unwrap_or((0, 0));
            let mut q = |t: &TensorData, bits| -> Result<Vec<f64>, QuantError> {
                let fmt = QFormat::with_integer_bits(total_bits, bits)?;
                Ok(t.data()
                    .iter()
                    .map(|&v| {
                        let (r, sat) = quantize(v as f64, fmt);
                        saturations += sat as usize;
                        r
                    })
                    .collect())
            };
            let entry = (q(&w.kernel, kb)?, q(&w.bias, bb)?);
            tensors.insert(node.id().to_string(), entry);
        }
        Ok(Self {
            total_bits,
            tensors,
            saturations,
        })
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn saturations(&self) -> usize {
        self.saturations
    }
}

/// Output of one fixed-point forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedOutput {
    pub values: Vec<f64>,
    /// Saturated input and activation elements (weights are counted separately).
    pub saturations: usize,
}

pub fn forward_fixed_with(
    graph: &NetworkGraph,
    plan: &QuantPlan,
    weights: &QuantizedWeights,
    input: &TensorData,
) -> Result<FixedOutput, QuantError> {
    check_input(graph, input)?;
    let bits = weights.total_bits;
    let input_fmt = QFormat::with_integer_bits(bits, plan.input)?;
    let mut saturations = 0usize;
    let mut requantize = |fmt: QFormat, v: &mut f64| {
        let (r, sat) = quantize(*v, fmt);
        saturations += sat as usize;
        *v = r;
    };
    let mut x: Vec<f64> = input.data().iter().map(|&v| v as f64).collect();
    x.iter_mut().for_each(|v| requantize(input_fmt, v));

    let mut formats = BTreeMap::new();
    for node in graph.layers() {
        let ib = plan.activation_bits(node.id()).unwrap_or(0);
        formats.insert(node.id(), QFormat::with_integer_bits(bits, ib)?);
    }
    let mut outputs = interpreter::execute(
        graph,
        x,
        |node| {
            weights
                .tensors
                .get(node.id())
                .map(|(k, b)| (k.as_slice(), b.as_slice()))
        },
        |id, y| {
            let fmt = formats[id];
            y.iter_mut().for_each(|v| requantize(fmt, v));
        },
    );
    let values = outputs.remove(graph.output_id()).expect("output computed");
    Ok(FixedOutput { values, saturations })
}

/// Fixed-point forward pass at `total_bits`, calibrated on `input` alone.
pub fn forward_fixed(graph: &NetworkGraph, input: &TensorData, total_bits: u32) -> Result<TensorData, QuantError> {
    let plan = QuantPlan::calibrate(graph, std::slice::from_ref(input))?;
    forward_fixed_plan(graph, &plan, input, total_bits)
}

pub fn forward_fixed_plan(
    graph: &NetworkGraph,
    plan: &QuantPlan,
    input: &TensorData,
    total_bits: u32,
) -> Result<TensorData, QuantError> {
    let weights = QuantizedWeights::new(graph, plan, total_bits)?;
    let out = forward_fixed_with(graph, plan, &weights, input)?;
    let data = out.values.iter().map(|&v| v as f32).collect();
    Ok(TensorData::new(graph.output_shape().to_vec(), data).expect("output shape"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitWidthStats {
    /// Mean absolute deviation from the 32-bit baseline.
    pub epsilon: f64,
    pub max_error: f64,
    pub saturations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub entries: BTreeMap<u32, BitWidthStats>,
    pub samples: usize,
    pub output_len: usize,
}

impl FidelityReport {
    pub fn get(&self, bits: u32) -> Option<&BitWidthStats> {
        self.entries.get(&bits)
    }

    pub fn epsilon(&self, bits: u32) -> Option<f64> {
        self.get(bits).map(|s| s.epsilon)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>4}  {:>14}  {:>14}  {:>11}",
            "bits", "epsilon", "max_error", "saturations"
        );
        for (bits, e) in &self.entries {
            let _ = writeln!(
                s,
                "{:>4}  {:>14.8e}  {:>14.8e}  {:>11}",
                bits, e.epsilon, e.max_error, e.saturations
            );
        }
        let _ = writeln!(
            s,
            "baseline: {BASELINE_BITS}-bit fixed point; {} samples x {} outputs",
            self.samples, self.output_len
        );
        s
    }

    /// `{"<bits>": {"epsilon": .., "max": .., "saturations": ..}, ..}`
    pub fn to_json(&self) -> Value {
        let map: Map<String, Value> = self
            .entries
            .iter()
            .map(|(bits, e)| {
                (
                    bits.to_string(),
                    json!({"epsilon": e.epsilon, "max": e.max_error, "saturations": e.saturations}),
                )
            })
            .collect();
        Value::Object(map)
    }
}

/// Mean and max absolute output error of each width in `bits` against the
/// 32-bit fixed-point baseline, using one plan calibrated over all `inputs`.
pub fn fidelity_report(
    graph: &NetworkGraph,
    inputs: &[TensorData],
    bits: &[u32],
) -> Result<FidelityReport, QuantError> {
    if inputs.is_empty() {
        return Err(QuantError::NoInputs);
    }
    for &k in bits {
        if !SUPPORTED_BITS.contains(&k) {
            return Err(QuantError::UnsupportedBits(k));
        }
    }
    let plan = QuantPlan::calibrate(graph, inputs)?;
    let base_weights = QuantizedWeights::new(graph, &plan, BASELINE_BITS)?;
    let baseline = inputs
        .iter()
        .map(|x| forward_fixed_with(graph, &plan, &base_weights, x).map(|o| o.values))
        .collect::<Result<Vec<_>, _>>()?;

    let mut entries = BTreeMap::new();
    for &k in bits {
        let weights = QuantizedWeights::new(graph, &plan, k)?;
        let mut saturations = weights.saturations();
        let (mut sum, mut max, mut count) = (0.0f64, 0.0f64, 0usize);
        for (x, base) in inputs.iter().zip(&baseline) {
            let out = forward_fixed_with(graph, &plan, &weights, x)?;
            saturations += out.saturations;
            for (a, b) in out.values.iter().zip(base) {
                let d = (a - b).abs();
                sum += d;
                max = max.max(d);
                count += 1;
            }
        }
        entries.insert(
            k,
            BitWidthStats {
                epsilon: sum / count as f64,
                max_error: max,
                saturations,
            },
        );
    }
    Ok(FidelityReport {
        entries,
        samples: inputs.len(),
        output_len: graph.output_len(),
    })
}
