//! Model documents to [`NetworkGraph`] and back.
//!
//! A model is a JSON document (schema version 1) whose weights live either
//! inline as decimal arrays or in a binary sidecar (see [`sidecar`]). Layer
//! records are dispatched by their `type` string through a
//! [`LayerBuilderRegistry`], which can be extended with new names at startup.

mod document;
mod registry;
pub mod sidecar;

use std::collections::BTreeMap;

use thiserror::Error;

pub use document::{InputDecl, ModelDocument, RawLayer, RawTensor, RawWeights, FORMAT_VERSION};
pub use registry::{explicit_params, Hyperparams, LayerBuilder, LayerBuilderRegistry};
pub use sidecar::{read_weight_sidecar, write_weight_sidecar, SidecarError, WeightSidecar};

use crate::model_ir::{GraphError, LayerNode, LayerSpec, LayerWeights, NetworkGraph};
use crate::tensor::{TensorData, TensorError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed model document: {0}")]
    Syntax(String),
    #[error("unsupported format_version {0}, expected 1")]
    Version(String),
    #[error("unsupported layer type `{0}`")]
    UnsupportedLayer(String),
    #[error("layer `{layer}`: unsupported activation `{name}`")]
    UnsupportedActivation { layer: String, name: String },
    #[error("layer `{layer}`: unknown field `{field}`")]
    UnknownField { layer: String, field: String },
    #[error("layer `{layer}`: invalid `{name}`: {reason}")]
    Hyperparameter {
        layer: String,
        name: String,
        reason: String,
    },
    #[error("layer `{0}` carries no parameters but names a weights_key")]
    UnexpectedWeightsKey(String),
    #[error("weights `{0}` not found inline or in the sidecar")]
    MissingWeights(String),
    #[error("document declares sidecar `{0}` but no sidecar bytes were supplied")]
    SidecarRequired(String),
    #[error("weights `{key}`: {source}")]
    Tensor { key: String, source: TensorError },
    #[error(transparent)]
    Sidecar(#[from] SidecarError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Document parser bound to a layer builder registry.
#[derive(Debug, Default)]
pub struct Parser {
    registry: LayerBuilderRegistry,
}

impl Parser {
    pub fn new(registry: LayerBuilderRegistry) -> Self {
        Self { registry }
    }

    pub fn registry(&self) -> &LayerBuilderRegistry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut LayerBuilderRegistry {
        &mut self.registry
    }

    /// Decodes `document` (and optional sidecar bytes) into a validated graph.
    /// Sidecar tensors take precedence over inline weights with the same key.
    pub fn parse(&self, document: &[u8], sidecar: Option<&[u8]>) -> Result<NetworkGraph, ParseError> {
        let doc = read_document(document)?;
        let sidecar = sidecar.map(read_weight_sidecar).transpose()?;
        if let (Some(name), None) = (&doc.sidecar, &sidecar) {
            return Err(ParseError::SidecarRequired(name.clone()));
        }
        self.build(doc, sidecar.as_ref())
    }

    pub fn build(&self, doc: ModelDocument, sidecar: Option<&WeightSidecar>) -> Result<NetworkGraph, ParseError> {
        let inline = doc.weights.unwrap_or_default();
        let mut nodes = Vec::with_capacity(doc.layers.len());
        for raw in &doc.layers {
            let builder = self
                .registry
                .get(&raw.layer_type)
                .ok_or_else(|| ParseError::UnsupportedLayer(raw.layer_type.clone()))?;
            let mut params = Hyperparams::new(&raw.id, &raw.params);
            let kind = builder(&mut params)?;
            params.finish()?;

            let weights = if kind.has_weights() {
                let key = raw.weights_key.as_deref().unwrap_or(&raw.id);
                Some(resolve_weights(key, &inline, sidecar)?)
            } else if raw.weights_key.is_some() {
                return Err(ParseError::UnexpectedWeightsKey(raw.id.clone()));
            } else {
                None
            };
            let spec = LayerSpec {
                id: raw.id.clone(),
                kind,
                inputs: raw.inputs.clone(),
            };
            nodes.push(LayerNode::new(spec, weights));
        }
        Ok(NetworkGraph::new(doc.name, doc.input.shape, nodes, doc.output)?)
    }
}

/// Parses with the default registry.
pub fn parse_model(document: &[u8], sidecar: Option<&[u8]>) -> Result<NetworkGraph, ParseError> {
    Parser::default().parse(document, sidecar)
}

/// Decodes the document envelope without building a graph.
pub fn read_document(document: &[u8]) -> Result<ModelDocument, ParseError> {
    let value: serde_json::Value = serde_json::from_slice(document).map_err(|e| ParseError::Syntax(e.to_string()))?;
    match value.get("format_version") {
        Some(v) if v.as_u64() == Some(FORMAT_VERSION) => {}
        Some(v) => return Err(ParseError::Version(v.to_string())),
        None => return Err(ParseError::Syntax("missing field `format_version`".into())),
    }
    serde_json::from_value(value).map_err(|e| ParseError::Syntax(e.to_string()))
}

fn resolve_weights(
    key: &str,
    inline: &BTreeMap<String, RawWeights>,
    sidecar: Option<&WeightSidecar>,
) -> Result<LayerWeights, ParseError> {
    if let Some(sc) = sidecar.filter(|sc| sc.mentions(key)) {
        return sc
            .layer_weights(key)
            .ok_or_else(|| ParseError::MissingWeights(key.to_string()));
    }
    let raw = inline
        .get(key)
        .ok_or_else(|| ParseError::MissingWeights(key.to_string()))?;
    let tensor = |t: &RawTensor| {
        TensorData::new(t.shape.clone(), t.data.clone()).map_err(|source| ParseError::Tensor {
            key: key.to_string(),
            source,
        })
    };
    Ok(LayerWeights::new(tensor(&raw.kernel)?, tensor(&raw.bias)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("layer `{0}` has non-finite weights, which JSON cannot represent; use a sidecar")]
    NonFinite(String),
    #[error(transparent)]
    Sidecar(#[from] SidecarError),
}

/// Where [`to_document`] puts the weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightStorage {
    Inline,
    /// Binary sidecar; the document records this file name.
    Sidecar(String),
}

/// Builds a document describing `graph`. Layers are listed in execution
/// order, hyperparameters are written explicitly and each weighted layer
/// uses its id as weights key.
pub fn to_document(
    graph: &NetworkGraph,
    storage: &WeightStorage,
) -> Result<(ModelDocument, Option<Vec<u8>>), SerializeError> {
    let mut layers = Vec::with_capacity(graph.len());
    let mut inline = BTreeMap::new();
    let mut tensors: Vec<(String, &TensorData)> = Vec::new();
    for node in graph.layers() {
        let id = node.id().to_string();
        if let Some(w) = &node.weights {
            match storage {
                WeightStorage::Inline => {
                    if !w.kernel.data().iter().chain(w.bias.data()).all(|v| v.is_finite()) {
                        return Err(SerializeError::NonFinite(id));
                    }
                    let raw = |t: &TensorData| RawTensor {
                        shape: t.shape().to_vec(),
                        data: t.data().to_vec(),
                    };
                    inline.insert(
                        id.clone(),
                        RawWeights {
                            kernel: raw(&w.kernel),
                            bias: raw(&w.bias),
                        },
                    );
                }
                WeightStorage::Sidecar(_) => {
                    tensors.push((sidecar::kernel_key(&id), &w.kernel));
                    tensors.push((sidecar::bias_key(&id), &w.bias));
                }
            }
        }
        layers.push(RawLayer {
            weights_key: node.weights.as_ref().map(|_| id.clone()),
            id,
            layer_type: node.kind().type_name().to_string(),
            inputs: node.spec.inputs.clone(),
            params: explicit_params(node.kind()),
        });
    }
    let (weights, sidecar_name, bytes) = match storage {
        WeightStorage::Inline => (Some(inline), None, None),
        WeightStorage::Sidecar(name) => {
            let bytes = write_weight_sidecar(tensors.iter().map(|(k, t)| (k.as_str(), *t)))?;
            (None, Some(name.clone()), Some(bytes))
        }
    };
    let doc = ModelDocument {
        format_version: FORMAT_VERSION,
        name: graph.name().to_string(),
        input: InputDecl {
            shape: graph.input_shape().to_vec(),
        },
        layers,
        output: graph.output_id().to_string(),
        weights,
        sidecar: sidecar_name,
    };
    Ok((doc, bytes))
}

/// Pretty-printed JSON for a graph with inline weights.
pub fn serialize_model(graph: &NetworkGraph) -> Result<String, SerializeError> {
    let (doc, _) = to_document(graph, &WeightStorage::Inline)?;
    Ok(document_to_string(&doc))
}

/// JSON document plus sidecar bytes; the document refers to `sidecar_name`.
pub fn serialize_with_sidecar(graph: &NetworkGraph, sidecar_name: &str) -> Result<(String, Vec<u8>), SerializeError> {
    let (doc, bytes) = to_document(graph, &WeightStorage::Sidecar(sidecar_name.to_string()))?;
    Ok((document_to_string(&doc), bytes.expect("sidecar storage yields bytes")))
}

pub fn document_to_string(doc: &ModelDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document is serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_ir::{LayerKind, ShapeError};

    const MINIMAL: &str = r#"{
        "format_version": 1,
        "name": "tiny",
        "input": {"shape": [2]},
        "layers": [
            {"id": "d1", "type": "dense", "inputs": ["__input__"], "units": 1, "weights_key": "w"}
        ],
        "output": "d1",
        "weights": {"w": {"kernel": {"shape": [2, 1], "data": [0.5, 0.5]}, "bias": {"shape": [1], "data": [0.1]}}}
    }"#;

    #[test]
    fn minimal_document() {
        let g = parse_model(MINIMAL.as_bytes(), None).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.param_count(), 3);
        assert_eq!(g.node("d1").unwrap().weights.as_ref().unwrap().bias.data(), &[0.1]);
    }

    #[test]
    fn unsupported_layer_names_the_type() {
        let doc = MINIMAL.replace(r#""type": "dense""#, r#""type": "lstm""#);
        assert_eq!(
            parse_model(doc.as_bytes(), None).unwrap_err(),
            ParseError::UnsupportedLayer("lstm".into())
        );
    }

    #[test]
    fn version_and_syntax_errors() {
        let doc = MINIMAL.replace(r#""format_version": 1"#, r#""format_version": 2"#);
        assert_eq!(
            parse_model(doc.as_bytes(), None).unwrap_err(),
            ParseError::Version("2".into())
        );
        assert!(matches!(parse_model(b"{not json", None), Err(ParseError::Syntax(_))));
        assert!(matches!(parse_model(b"[]", None), Err(ParseError::Syntax(_))));
        let doc = MINIMAL.replace(r#""output": "d1""#, r#""output": "d1", "extra": 1"#);
        assert!(matches!(parse_model(doc.as_bytes(), None), Err(ParseError::Syntax(_))));
    }

    #[test]
    fn missing_weights() {
        let doc = MINIMAL.replace(r#""weights_key": "w""#, r#""weights_key": "nope""#);
        assert_eq!(
            parse_model(doc.as_bytes(), None).unwrap_err(),
            ParseError::MissingWeights("nope".into())
        );
    }

    #[test]
    fn shape_errors_surface_through_graph() {
        let doc = MINIMAL.replace(r#""shape": [2]}"#, r#""shape": [2, 1]}"#);
        assert!(matches!(
            parse_model(doc.as_bytes(), None).unwrap_err(),
            ParseError::Graph(GraphError::Shape(ShapeError::RankMismatch { .. }))
        ));
    }

    #[test]
    fn sidecar_overrides_inline_weights() {
        let kernel = TensorData::new(vec![2, 1], vec![2.0, 3.0]).unwrap();
        let bias = TensorData::new(vec![1], vec![-1.0]).unwrap();
        let bytes = write_weight_sidecar([("w.kernel", &kernel), ("w.bias", &bias)]).unwrap();
        let g = parse_model(MINIMAL.as_bytes(), Some(&bytes)).unwrap();
        let w = g.node("d1").unwrap().weights.as_ref().unwrap();
        assert_eq!(w.kernel.data(), &[2.0, 3.0]);
        assert_eq!(w.bias.data(), &[-1.0]);

        let half = write_weight_sidecar([("w.kernel", &kernel)]).unwrap();
        assert_eq!(
            parse_model(MINIMAL.as_bytes(), Some(&half)).unwrap_err(),
            ParseError::MissingWeights("w".into())
        );
    }

    #[test]
    fn declared_sidecar_must_be_supplied() {
        let doc = MINIMAL.replace(r#""output": "d1""#, r#""output": "d1", "sidecar": "w.nnwb""#);
        assert_eq!(
            parse_model(doc.as_bytes(), None).unwrap_err(),
            ParseError::SidecarRequired("w.nnwb".into())
        );
    }

    #[test]
    fn registry_extension() {
        let doc = MINIMAL.replace(r#""type": "dense""#, r#""type": "fully_connected""#);
        assert!(matches!(
            parse_model(doc.as_bytes(), None),
            Err(ParseError::UnsupportedLayer(_))
        ));
        let mut parser = Parser::default();
        parser
            .registry_mut()
            .register("fully_connected", |p: &mut Hyperparams<'_>| {
                Ok(LayerKind::Dense {
                    units: p.positive("units")?,
                    activation: p.activation()?,
                })
            });
        assert_eq!(parser.parse(doc.as_bytes(), None).unwrap().param_count(), 3);
    }

    #[test]
    fn weights_key_on_unweighted_layer() {
        let doc = r#"{"format_version":1,"name":"f","input":{"shape":[2,2]},
            "layers":[{"id":"f","type":"flatten","inputs":["__input__"],"weights_key":"x"}],"output":"f"}"#;
        assert_eq!(
            parse_model(doc.as_bytes(), None).unwrap_err(),
            ParseError::UnexpectedWeightsKey("f".into())
        );
    }

    #[test]
    fn serialize_refuses_non_finite_inline() {
        let kernel = TensorData::new(vec![1, 1], vec![f32::NAN]).unwrap();
        let bias = TensorData::new(vec![1], vec![0.0]).unwrap();
        let node = LayerNode::new(
            LayerSpec::new(
                "d",
                LayerKind::Dense {
                    units: 1,
                    activation: crate::model_ir::Activation::Linear,
                },
                crate::model_ir::INPUT_ID,
            ),
            Some(LayerWeights::new(kernel, bias)),
        );
        let g = NetworkGraph::new("n", vec![1], vec![node], "d").unwrap();
        assert_eq!(serialize_model(&g), Err(SerializeError::NonFinite("d".into())));
        let (doc, bytes) = serialize_with_sidecar(&g, "n.nnwb").unwrap();
        let back = parse_model(doc.as_bytes(), Some(&bytes)).unwrap();
        assert!(back.node("d").unwrap().weights.as_ref().unwrap().kernel.data()[0].is_nan());
    }
}
