use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::layer::{LayerKind, LayerNode, LayerSpec, INPUT_ID};
use super::shape::{output_shape, weight_shapes, ShapeError, ShapeMap};
use crate::tensor::{checked_len, TensorError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid input shape: {0}")]
    InputShape(#[from] TensorError),
    #[error("graph has no layers")]
    Empty,
    #[error("layer id must be non-empty")]
    EmptyId,
    #[error("layer id `{0}` is reserved")]
    ReservedId(String),
    #[error("duplicate layer id `{0}`")]
    DuplicateId(String),
    #[error("layer `{layer}` has {count} inputs; every supported layer kind takes exactly one")]
    Arity { layer: String, count: usize },
    #[error("layer `{layer}` references unknown input `{input}`")]
    DanglingInput { layer: String, input: String },
    #[error("dependency cycle among layers {0:?}")]
    Cycle(Vec<String>),
    #[error("exactly one layer must consume the network input, found {0}")]
    InputConsumers(usize),
    #[error("output layer `{0}` does not exist")]
    UnknownOutput(String),
    #[error("output layer `{output}` feeds {successors:?}")]
    OutputHasSuccessors { output: String, successors: Vec<String> },
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("layer `{0}` requires weights")]
    MissingWeights(String),
    #[error("layer `{0}` carries no parameters but weights were attached")]
    UnexpectedWeights(String),
    #[error("layer `{layer}` {tensor} shape {actual:?} does not match expected {expected:?}")]
    WeightShape {
        layer: String,
        tensor: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
}

/// Topologically orders `layers`; ties are broken by id so the result is deterministic.
pub fn execution_order(layers: &[LayerSpec]) -> Result<Vec<String>, GraphError> {
    let mut index: BTreeMap<&str, &LayerSpec> = BTreeMap::new();
    for layer in layers {
        if layer.id.is_empty() {
            return Err(GraphError::EmptyId);
        }
        if layer.id == INPUT_ID {
            return Err(GraphError::ReservedId(layer.id.clone()));
        }
        if index.insert(&layer.id, layer).is_some() {
            return Err(GraphError::DuplicateId(layer.id.clone()));
        }
    }

    let mut pending: BTreeMap<&str, usize> = BTreeMap::new();
    let mut successors: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for layer in layers {
        let mut unresolved = 0;
        for input in &layer.inputs {
            if input == INPUT_ID {
                continue;
            }
            if !index.contains_key(input.as_str()) {
                return Err(GraphError::DanglingInput {
                    layer: layer.id.clone(),
                    input: input.clone(),
                });
            }
            unresolved += 1;
            successors.entry(input.as_str()).or_default().push(&layer.id);
        }
        pending.insert(&layer.id, unresolved);
    }

    let mut ready: BTreeSet<&str> = pending.iter().filter(|&(_, &n)| n == 0).map(|(&id, _)| id).collect();
    let mut order = Vec::with_capacity(layers.len());
    while let Some(id) = ready.pop_first() {
        order.push(id.to_string());
        for &next in successors.get(id).map(Vec::as_slice).unwrap_or_default() {
            let n = pending.get_mut(next).expect("successor is indexed");
            *n -= 1;
            if *n == 0 {
                ready.insert(next);
            }
        }
    }

    if order.len() != layers.len() {
        let placed: BTreeSet<&str> = order.iter().map(String::as_str).collect();
        let stuck = index
            .keys()
            .filter(|id| !placed.contains(*id))
            .map(|id| id.to_string())
            .collect();
        return Err(GraphError::Cycle(stuck));
    }
    Ok(order)
}

/// Infers every layer's output shape, visiting layers in execution order.
pub fn infer_shapes(input_shape: &[usize], layers: &[LayerSpec]) -> Result<ShapeMap, GraphError> {
    checked_len(input_shape)?;
    let order = execution_order(layers)?;
    let by_id: BTreeMap<&str, &LayerSpec> = layers.iter().map(|l| (l.id.as_str(), l)).collect();
    let mut shapes = ShapeMap::default();
    for id in order {
        let layer = by_id[id.as_str()];
        let [input] = layer.inputs.as_slice() else {
            return Err(GraphError::Arity {
                layer: id,
                count: layer.inputs.len(),
            });
        };
        let in_shape = if input == INPUT_ID {
            input_shape.to_vec()
        } else {
            shapes.get(input).expect("predecessor visited first").to_vec()
        };
        let out = output_shape(&layer.id, &layer.kind, &in_shape)?;
        shapes.insert(id, out);
    }
    Ok(shapes)
}

/// Validated, immutable network graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    name: String,
    input_shape: Vec<usize>,
    nodes: BTreeMap<String, LayerNode>,
    output_id: String,
    order: Vec<String>,
    shapes: ShapeMap,
}

impl NetworkGraph {
    /// Builds and validates a graph: structure, ordering, shapes and weight layouts.
    pub fn new(
        name: impl Into<String>,
        input_shape: Vec<usize>,
        layers: Vec<LayerNode>,
        output_id: impl Into<String>,
    ) -> Result<Self, GraphError> {
        let output_id = output_id.into();
        checked_len(&input_shape)?;
        if layers.is_empty() {
            return Err(GraphError::Empty);
        }
        let specs: Vec<LayerSpec> = layers.iter().map(|n| n.spec.clone()).collect();
        for spec in &specs {
            if spec.inputs.len() != 1 {
                return Err(GraphError::Arity {
                    layer: spec.id.clone(),
                    count: spec.inputs.len(),
                });
            }
        }
        let order = execution_order(&specs)?;

        let consumers = specs.iter().filter(|s| s.inputs[0] == INPUT_ID).count();
        if consumers != 1 {
            return Err(GraphError::InputConsumers(consumers));
        }
        if !specs.iter().any(|s| s.id == output_id) {
            return Err(GraphError::UnknownOutput(output_id));
        }
        let successors: Vec<String> = specs
            .iter()
            .filter(|s| s.inputs[0] == output_id)
            .map(|s| s.id.clone())
            .collect();
        if !successors.is_empty() {
            return Err(GraphError::OutputHasSuccessors {
                output: output_id,
                successors,
            });
        }

        let shapes = infer_shapes(&input_shape, &specs)?;
        for node in &layers {
            check_weights(node, &input_shape, &shapes)?;
        }

        let nodes = layers.into_iter().map(|n| (n.spec.id.clone(), n)).collect();
        Ok(Self {
            name: name.into(),
            input_shape,
            nodes,
            output_id,
            order,
            shapes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_id(&self) -> &str {
        &self.output_id
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.get(&self.output_id).expect("output has a shape")
    }

    pub fn output_len(&self) -> usize {
        self.output_shape().iter().product()
    }

    pub fn execution_order(&self) -> &[String] {
        &self.order
    }

    pub fn shapes(&self) -> &ShapeMap {
        &self.shapes
    }

    pub fn node(&self, id: &str) -> Option<&LayerNode> {
        self.nodes.get(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in execution order.
    pub fn layers(&self) -> impl Iterator<Item = &LayerNode> {
        self.order.iter().map(|id| &self.nodes[id])
    }

    /// Shape of the tensor feeding `node`.
    pub fn input_shape_of(&self, node: &LayerNode) -> &[usize] {
        let src = &node.spec.inputs[0];
        if src == INPUT_ID {
            &self.input_shape
        } else {
            self.shapes.get(src).expect("validated predecessor")
        }
    }

    /// Total number of scalar parameters (kernels plus biases).
    pub fn param_count(&self) -> usize {
        self.nodes
            .values()
            .filter_map(|n| n.weights.as_ref())
            .map(|w| w.param_count())
            .sum()
    }

    pub fn layer_param_count(&self, id: &str) -> usize {
        self.nodes
            .get(id)
            .and_then(|n| n.weights.as_ref())
            .map_or(0, |w| w.param_count())
    }

    /// Consumes the graph, returning its nodes in execution order.
    pub fn into_layers(mut self) -> Vec<LayerNode> {
        self.order
            .iter()
            .map(|id| self.nodes.remove(id).expect("ordered id"))
            .collect()
    }
}

fn check_weights(node: &LayerNode, input_shape: &[usize], shapes: &ShapeMap) -> Result<(), GraphError> {
    let id = &node.spec.id;
    let kind: &LayerKind = &node.spec.kind;
    match (&node.weights, kind.has_weights()) {
        (None, true) => Err(GraphError::MissingWeights(id.clone())),
        (Some(_), false) => Err(GraphError::UnexpectedWeights(id.clone())),
        (None, false) => Ok(()),
        (Some(w), true) => {
            let src = &node.spec.inputs[0];
            let in_shape = if src == INPUT_ID {
                input_shape
            } else {
                shapes.get(src).expect("validated predecessor")
            };
            let (kernel, bias) = weight_shapes(kind, in_shape).expect("weighted kind");
            for (tensor, expected, actual) in [("kernel", kernel, w.kernel.shape()), ("bias", bias, w.bias.shape())] {
                if expected != actual {
                    return Err(GraphError::WeightShape {
                        layer: id.clone(),
                        tensor,
                        expected,
                        actual: actual.to_vec(),
                    });
                }
            }
            Ok(())
        }
    }
}
