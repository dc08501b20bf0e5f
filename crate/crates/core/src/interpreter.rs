//! Reference forward pass.
//!
//! This is the semantic contract for generated code. Accumulation is done in
//! the element type (32-bit for [`forward`]), dot products run in the loop
//! order output position, then kernel tap, then input channel, and the bias
//! is added after the sum. Transcendental activations are evaluated in double
//! precision and rounded back, which is what the emitted C does as well.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use crate::model_ir::{axis_geometry, Activation, LayerKind, LayerNode, NetworkGraph, Padding, ShapeError, INPUT_ID};
use crate::tensor::TensorData;

/// Scalar type the kernels are generic over.
pub trait Real:
    Copy + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    const ZERO: Self;
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Per-layer outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationBuffer {
    outputs: BTreeMap<String, TensorData>,
    output_id: String,
}

impl ActivationBuffer {
    pub fn get(&self, id: &str) -> Option<&TensorData> {
        self.outputs.get(id)
    }

    pub fn output(&self) -> &TensorData {
        &self.outputs[&self.output_id]
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TensorData)> {
        self.outputs.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn into_output(mut self) -> TensorData {
        self.outputs.remove(&self.output_id).expect("output recorded")
    }
}

pub fn forward(graph: &NetworkGraph, input: &TensorData) -> Result<TensorData, ShapeError> {
    forward_traced(graph, input).map(ActivationBuffer::into_output)
}

pub fn forward_traced(graph: &NetworkGraph, input: &TensorData) -> Result<ActivationBuffer, ShapeError> {
    check_input(graph, input)?;
    let raw = execute(
        graph,
        input.data().to_vec(),
        |node| node.weights.as_ref().map(|w| (w.kernel.data(), w.bias.data())),
        |_, _| {},
    );
    let outputs = raw
        .into_iter()
        .map(|(id, data)| {
            let shape = graph.shapes().get(&id).expect("inferred").to_vec();
            (
                id,
                TensorData::new(shape, data).expect("shape inference matches kernels"),
            )
        })
        .collect();
    Ok(ActivationBuffer {
        outputs,
        output_id: graph.output_id().to_string(),
    })
}

pub(crate) fn check_input(graph: &NetworkGraph, input: &TensorData) -> Result<(), ShapeError> {
    if input.shape() != graph.input_shape() {
        return Err(ShapeError::InputMismatch {
            expected: graph.input_shape().to_vec(),
            actual: input.shape().to_vec(),
        });
    }
    Ok(())
}

/// Runs every layer in execution order. `weights` supplies `(kernel, bias)`
/// for weighted layers and `post` may rewrite each layer output in place
/// before successors read it.
pub(crate) fn execute<'g, T, W, P>(
    graph: &'g NetworkGraph,
    input: Vec<T>,
    weights: W,
    mut post: P,
) -> BTreeMap<String, Vec<T>>
where
    T: Real + 'g,
    W: Fn(&'g LayerNode) -> Option<(&'g [T], &'g [T])>,
    P: FnMut(&str, &mut Vec<T>),
{
    let mut outputs: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for node in graph.layers() {
        let src = &node.spec.inputs[0];
        let x: &[T] = if src == INPUT_ID { &input } else { &outputs[src] };
        let in_shape = graph.input_shape_of(node);
        let out_shape = graph.shapes().get(node.id()).expect("inferred");
        let mut y = apply_layer(node.kind(), x, in_shape, out_shape, weights(node));
        post(node.id(), &mut y);
        outputs.insert(node.id().to_string(), y);
    }
    outputs
}

/// Applies one layer (including its activation) to a channels-last input.
pub fn apply_layer<T: Real>(
    kind: &LayerKind,
    x: &[T],
    in_shape: &[usize],
    out_shape: &[usize],
    weights: Option<(&[T], &[T])>,
) -> Vec<T> {
    let mut y = vec![T::ZERO; out_shape.iter().product()];
    match *kind {
        LayerKind::Dense { units, .. } => {
            let (w, b) = weights.expect("dense weights");
            dense(x, w, b, units, &mut y);
        }
        LayerKind::Conv1D {
            filters,
            kernel_size,
            stride,
            padding,
            ..
        } => {
            let (w, b) = weights.expect("conv1d weights");
            let pad = pad_before(in_shape[0], kernel_size, stride, padding);
            let geom = Conv1dGeometry {
                in_len: in_shape[0],
                channels: in_shape[1],
                kernel: kernel_size,
                filters,
                stride,
                pad,
                out_len: out_shape[0],
            };
            conv1d(&geom, x, w, b, &mut y);
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
            let (w, b) = weights.expect("conv2d weights");
            let geom = Conv2dGeometry {
                in_h: in_shape[0],
                in_w: in_shape[1],
                channels: in_shape[2],
                kernel_h,
                kernel_w,
                filters,
                stride_h,
                stride_w,
                pad_top: pad_before(in_shape[0], kernel_h, stride_h, padding),
                pad_left: pad_before(in_shape[1], kernel_w, stride_w, padding),
                out_h: out_shape[0],
                out_w: out_shape[1],
            };
            conv2d(&geom, x, w, b, &mut y);
        }
        LayerKind::MaxPool1D { pool_size, stride } => {
            maxpool1d(x, in_shape[1], pool_size, stride, out_shape[0], &mut y);
        }
        LayerKind::MaxPool2D {
            pool_h,
            pool_w,
            stride_h,
            stride_w,
        } => {
            maxpool2d(
                x,
                in_shape[1],
                in_shape[2],
                (pool_h, pool_w),
                (stride_h, stride_w),
                (out_shape[0], out_shape[1]),
                &mut y,
            );
        }
        LayerKind::Flatten => y.copy_from_slice(x),
    }
    if let Some(act) = kind.activation() {
        activate(act, &mut y);
    }
    y
}

fn pad_before(len: usize, window: usize, stride: usize, padding: Padding) -> usize {
    axis_geometry(len, window, stride, padding)
        .expect("validated geometry")
        .pad_before
}

/// `out[j] = sum_i x[i] * w[i][j] + b[j]`, kernel stored `[inputs, units]`.
pub fn dense<T: Real>(x: &[T], w: &[T], b: &[T], units: usize, out: &mut [T]) {
    for j in 0..units {
        let mut acc = T::ZERO;
        for (i, &xi) in x.iter().enumerate() {
            acc = acc + xi * w[i * units + j];
        }
        out[j] = acc + b[j];
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Conv1dGeometry {
    pub in_len: usize,
    pub channels: usize,
    pub kernel: usize,
    pub filters: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_len: usize,
}

/// Kernel stored `[kernel, channels, filters]`; taps falling in the zero
/// padding are skipped.
pub fn conv1d<T: Real>(g: &Conv1dGeometry, x: &[T], w: &[T], b: &[T], out: &mut [T]) {
    for t in 0..g.out_len {
        for f in 0..g.filters {
            let mut acc = T::ZERO;
            for k in 0..g.kernel {
                let pos = t * g.stride + k;
                if pos < g.pad || pos - g.pad >= g.in_len {
                    continue;
                }
                let row = (pos - g.pad) * g.channels;
                for c in 0..g.channels {
                    acc = acc + x[row + c] * w[(k * g.channels + c) * g.filters + f];
                }
            }
            out[t * g.filters + f] = acc + b[f];
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Conv2dGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub filters: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

/// Kernel stored `[kernel_h, kernel_w, channels, filters]`.
pub fn conv2d<T: Real>(g: &Conv2dGeometry, x: &[T], w: &[T], b: &[T], out: &mut [T]) {
    for oh in 0..g.out_h {
        for ow in 0..g.out_w {
            for f in 0..g.filters {
                let mut acc = T::ZERO;
                for kh in 0..g.kernel_h {
                    let ph = oh * g.stride_h + kh;
                    if ph < g.pad_top || ph - g.pad_top >= g.in_h {
                        continue;
                    }
                    let ih = ph - g.pad_top;
                    for kw in 0..g.kernel_w {
                        let pw = ow * g.stride_w + kw;
                        if pw < g.pad_left || pw - g.pad_left >= g.in_w {
                            continue;
                        }
                        let iw = pw - g.pad_left;
                        let row = (ih * g.in_w + iw) * g.channels;
                        let wrow = (kh * g.kernel_w + kw) * g.channels;
                        for c in 0..g.channels {
                            acc = acc + x[row + c] * w[(wrow + c) * g.filters + f];
                        }
                    }
                }
                out[(oh * g.out_w + ow) * g.filters + f] = acc + b[f];
            }
        }
    }
}

pub fn maxpool1d<T: Real>(x: &[T], channels: usize, pool: usize, stride: usize, out_len: usize, out: &mut [T]) {
    for t in 0..out_len {
        for c in 0..channels {
            let start = t * stride;
            let mut m = x[start * channels + c];
            for k in 1..pool {
                let v = x[(start + k) * channels + c];
                if v > m {
                    m = v;
                }
            }
            out[t * channels + c] = m;
        }
    }
}

pub fn maxpool2d<T: Real>(
    x: &[T],
    in_w: usize,
    channels: usize,
    (pool_h, pool_w): (usize, usize),
    (stride_h, stride_w): (usize, usize),
    (out_h, out_w): (usize, usize),
    out: &mut [T],
) {
    for oh in 0..out_h {
        for ow in 0..out_w {
            for c in 0..channels {
                let (h0, w0) = (oh * stride_h, ow * stride_w);
                let mut m = x[(h0 * in_w + w0) * channels + c];
                for ph in 0..pool_h {
                    for pw in 0..pool_w {
                        let v = x[((h0 + ph) * in_w + w0 + pw) * channels + c];
                        if v > m {
                            m = v;
                        }
                    }
                }
                out[(oh * out_w + ow) * channels + c] = m;
            }
        }
    }
}

pub fn activate<T: Real>(act: Activation, buf: &mut [T]) {
    match act {
        Activation::Linear => {}
        // Written as a negated comparison so NaN also maps to zero.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        Activation::Relu => {
            for v in buf.iter_mut() {
                if !(*v > T::ZERO) {
                    *v = T::ZERO;
                }
            }
        }
        Activation::Sigmoid => {
            for v in buf.iter_mut() {
                *v = T::from_f64(1.0 / (1.0 + (-v.to_f64()).exp()));
            }
        }
        Activation::Tanh => {
            for v in buf.iter_mut() {
                *v = T::from_f64(v.to_f64().tanh());
            }
        }
        Activation::Softmax => softmax(buf),
    }
}

/// Max-subtracted softmax: `exp(x_j - max) / sum_i exp(x_i - max)`.
pub fn softmax<T: Real>(buf: &mut [T]) {
    let Some(&first) = buf.first() else { return };
    let mut m = first;
    for &v in buf.iter() {
        if v > m {
            m = v;
        }
    }
    let mut sum = T::ZERO;
    for v in buf.iter_mut() {
        *v = T::from_f64((*v - m).to_f64().exp());
        sum = sum + *v;
    }
    for v in buf.iter_mut() {
        *v = *v / sum;
    }
}
