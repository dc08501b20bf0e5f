//! Reference networks with seeded random weights.
//!
//! Weights and biases are drawn uniformly from [-1, 1] with ChaCha8, so a
//! `(fixture, seed)` pair always yields the same bits on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model_ir::{
    weight_shapes, Activation, LayerKind, LayerNode, LayerSpec, LayerWeights, NetworkGraph, Padding, INPUT_ID,
};
use crate::parser::{serialize_model, serialize_with_sidecar};
use crate::tensor::TensorData;

pub const DEFAULT_SEED: u64 = 2021;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fixture {
    /// Conv1D(3, 5) -> MaxPool1D(5) -> Flatten -> Dense(32) -> Dense(16) -> Dense(3) on [100, 1].
    ConvNet,
    /// A single Conv1D(3, 5) on [100, 1].
    ConvOnly,
    /// A single MaxPool1D(5) on [100, 1].
    PoolOnly,
    /// Conv1D(2, 6) -> Flatten -> Dense(5) on [10, 1]; 69 parameters.
    Tiny,
    /// MLP 2-6-12-4-1, relu hidden layers.
    ForceCalibration,
    /// MLP 2-5-5-1, tanh hidden layers.
    SystemId,
    /// MLP 400-50-10-2 with a softmax head; 20,582 parameters.
    Terrain,
}

impl Fixture {
    pub const ALL: [Fixture; 7] = [
        Fixture::ConvNet,
        Fixture::ConvOnly,
        Fixture::PoolOnly,
        Fixture::Tiny,
        Fixture::ForceCalibration,
        Fixture::SystemId,
        Fixture::Terrain,
    ];

    /// The six architectures exercised by the compiled-code parity check.
    pub const PARITY: [Fixture; 6] = [
        Fixture::ConvNet,
        Fixture::ConvOnly,
        Fixture::PoolOnly,
        Fixture::Tiny,
        Fixture::ForceCalibration,
        Fixture::SystemId,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::ConvNet => "conv_net",
            Fixture::ConvOnly => "conv_only",
            Fixture::PoolOnly => "pool_only",
            Fixture::Tiny => "tiny_cnn",
            Fixture::ForceCalibration => "force_calibration",
            Fixture::SystemId => "system_id",
            Fixture::Terrain => "terrain",
        }
    }

    pub fn from_name(name: &str) -> Option<Fixture> {
        Fixture::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn input_shape(self) -> Vec<usize> {
        match self {
            Fixture::ConvNet | Fixture::ConvOnly | Fixture::PoolOnly => vec![100, 1],
            Fixture::Tiny => vec![10, 1],
            Fixture::ForceCalibration | Fixture::SystemId => vec![2],
            Fixture::Terrain => vec![400],
        }
    }

    /// Layer specs in execution order, chained input to output.
    pub fn layers(self) -> Vec<LayerSpec> {
        let conv = |filters, kernel_size| LayerKind::Conv1D {
            filters,
            kernel_size,
            stride: 1,
            padding: Padding::Valid,
            activation: Activation::Relu,
        };
        let dense = |units, activation| LayerKind::Dense { units, activation };
        let kinds: Vec<(&str, LayerKind)> = match self {
            Fixture::ConvNet => vec![
                ("conv", conv(3, 5)),
                (
                    "pool",
                    LayerKind::MaxPool1D {
                        pool_size: 5,
                        stride: 5,
                    },
                ),
                ("flatten", LayerKind::Flatten),
                ("dense1", dense(32, Activation::Relu)),
                ("dense2", dense(16, Activation::Relu)),
                ("dense3", dense(3, Activation::Linear)),
            ],
            Fixture::ConvOnly => vec![("conv", conv(3, 5))],
            Fixture::PoolOnly => vec![(
                "pool",
                LayerKind::MaxPool1D {
                    pool_size: 5,
                    stride: 5,
                },
            )],
            Fixture::Tiny => vec![
                ("conv", conv(2, 6)),
                ("flatten", LayerKind::Flatten),
                ("dense", dense(5, Activation::Linear)),
            ],
            Fixture::ForceCalibration => vec![
                ("hidden1", dense(6, Activation::Relu)),
                ("hidden2", dense(12, Activation::Relu)),
                ("hidden3", dense(4, Activation::Relu)),
                ("output", dense(1, Activation::Linear)),
            ],
            Fixture::SystemId => vec![
                ("hidden1", dense(5, Activation::Tanh)),
                ("hidden2", dense(5, Activation::Tanh)),
                ("output", dense(1, Activation::Linear)),
            ],
            Fixture::Terrain => vec![
                ("hidden1", dense(50, Activation::Relu)),
                ("hidden2", dense(10, Activation::Relu)),
                ("output", dense(2, Activation::Softmax)),
            ],
        };
        let mut prev = INPUT_ID.to_string();
        kinds
            .into_iter()
            .map(|(id, kind)| {
                let spec = LayerSpec::new(id, kind, prev.clone());
                prev = id.to_string();
                spec
            })
            .collect()
    }

    pub fn build(self, seed: u64) -> NetworkGraph {
        chain(self.name(), &self.input_shape(), self.layers(), seed).expect("fixture architectures are valid")
    }
}

/// Builds a chained graph and fills every weighted layer with uniform [-1, 1] draws.
pub fn chain(
    name: &str,
    input_shape: &[usize],
    layers: Vec<LayerSpec>,
    seed: u64,
) -> Result<NetworkGraph, crate::model_ir::GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shape = input_shape.to_vec();
    let mut nodes = Vec::with_capacity(layers.len());
    for spec in layers {
        let weights = weight_shapes(&spec.kind, &shape)
            .map(|(k, b)| LayerWeights::new(random_tensor(&mut rng, k), random_tensor(&mut rng, b)));
        shape = crate::model_ir::output_shape(&spec.id, &spec.kind, &shape)?;
        nodes.push(LayerNode::new(spec, weights));
    }
    let output = nodes.last().map(|n| n.id().to_string()).unwrap_or_default();
    NetworkGraph::new(name, input_shape.to_vec(), nodes, output)
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> TensorData {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-1.0f32..=1.0)).collect();
    TensorData::new(shape, data).expect("non-empty shape")
}

/// Model files for every fixture at [`DEFAULT_SEED`], keyed by file name.
/// The terrain network keeps its weights in a binary sidecar.
pub fn fixture_files() -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for f in Fixture::ALL {
        let graph = f.build(DEFAULT_SEED);
        if f == Fixture::Terrain {
            let sidecar = format!("{}.nnwb", f.name());
            let (doc, bytes) = serialize_with_sidecar(&graph, &sidecar).expect("finite weights");
            files.push((format!("{}.json", f.name()), doc.into_bytes()));
            files.push((sidecar, bytes));
        } else {
            let doc = serialize_model(&graph).expect("finite weights");
            files.push((format!("{}.json", f.name()), doc.into_bytes()));
        }
    }
    files
}

/// `count` input tensors for `graph` with elements uniform in [-1, 1].
pub fn random_inputs(graph: &NetworkGraph, count: usize, seed: u64) -> Vec<TensorData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_tensor(&mut rng, graph.input_shape().to_vec()))
        .collect()
}
