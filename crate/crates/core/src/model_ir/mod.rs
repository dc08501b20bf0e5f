//! In-memory representation of a trained feed-forward network.
//!
//! A [`NetworkGraph`] is a validated DAG of [`LayerNode`]s. Construction runs
//! every structural check (unique ids, single-input layers, no cycles, one
//! consumer of the network input, terminal output), infers shapes in
//! dependency order and checks weight layouts, so downstream passes can
//! assume a well-formed graph.
//!
//! Layout is channels-last throughout: Conv1D tensors are `[length, channels]`,
//! Conv2D tensors `[height, width, channels]`, and Flatten is a row-major copy.

mod graph;
mod layer;
mod shape;

pub use graph::{execution_order, infer_shapes, GraphError, NetworkGraph};
pub use layer::{Activation, LayerKind, LayerNode, LayerSpec, LayerWeights, Padding, INPUT_ID};
pub use shape::{axis_geometry, output_shape, weight_shapes, AxisGeometry, ShapeError, ShapeMap};

/// Number of scalar parameters stored in `graph`.
pub fn param_count(graph: &NetworkGraph) -> usize {
    graph.param_count()
}
