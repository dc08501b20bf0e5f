use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

pub const FORMAT_VERSION: u64 = 1;

/// On-disk model description, schema version 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u64,
    pub name: String,
    pub input: InputDecl,
    pub layers: Vec<RawLayer>,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<String, RawWeights>>,
    /// File name of a binary weight sidecar, resolved next to the document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDecl {
    pub shape: Vec<usize>,
}

/// A layer record before type dispatch. Hyperparameters stay untyped until a
/// registered builder consumes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawLayer {
    pub id: String,
    #[serde(rename = "type")]
    pub layer_type: String,
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_key: Option<String>,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWeights {
    pub kernel: RawTensor,
    pub bias: RawTensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTensor {
    pub shape: Vec<usize>,
    #[serde(deserialize_with = "nearest_f32")]
    pub data: Vec<f32>,
}

/// Parses each decimal literal straight to the nearest f32, avoiding the
/// double rounding of going through f64.
fn nearest_f32<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f32>, D::Error> {
    let numbers = Vec::<serde_json::Number>::deserialize(de)?;
    numbers
        .iter()
        .map(|n| {
            let text = n.to_string();
            text.parse::<f32>()
                .map_err(|_| serde::de::Error::custom(format!("invalid number literal `{text}`")))
        })
        .collect()
}
