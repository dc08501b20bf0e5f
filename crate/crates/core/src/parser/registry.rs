use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{Map, Value};

use super::ParseError;
use crate::model_ir::{Activation, LayerKind, Padding};

/// Hyperparameters of one raw layer record. Builders pull the fields they
/// understand; anything left over is rejected by [`Hyperparams::finish`].
#[derive(Debug)]
pub struct Hyperparams<'a> {
    layer: &'a str,
    fields: &'a Map<String, Value>,
    consumed: BTreeSet<&'a str>,
}

impl<'a> Hyperparams<'a> {
    pub fn new(layer: &'a str, fields: &'a Map<String, Value>) -> Self {
        Self {
            layer,
            fields,
            consumed: BTreeSet::new(),
        }
    }

    pub fn layer(&self) -> &str {
        self.layer
    }

    fn take(&mut self, name: &str) -> Option<&'a Value> {
        let (key, value) = self.fields.get_key_value(name)?;
        self.consumed.insert(key.as_str());
        Some(value)
    }

    fn invalid(&self, name: &str, reason: impl Into<String>) -> ParseError {
        ParseError::Hyperparameter {
            layer: self.layer.to_string(),
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// Optional strictly positive integer.
    pub fn opt_positive(&mut self, name: &str) -> Result<Option<usize>, ParseError> {
        let Some(value) = self.take(name) else {
            return Ok(None);
        };
        match value.as_u64().and_then(|v| usize::try_from(v).ok()) {
            Some(0) => Err(self.invalid(name, "must be positive")),
            Some(v) => Ok(Some(v)),
            None => Err(self.invalid(name, format!("expected a positive integer, got {value}"))),
        }
    }

    pub fn positive(&mut self, name: &str) -> Result<usize, ParseError> {
        self.opt_positive(name)?
            .ok_or_else(|| self.invalid(name, "required field is missing"))
    }

    fn opt_str(&mut self, name: &str) -> Result<Option<&'a str>, ParseError> {
        match self.take(name) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(other) => Err(self.invalid(name, format!("expected a string, got {other}"))),
        }
    }

    /// `activation` field, defaulting to linear.
    pub fn activation(&mut self) -> Result<Activation, ParseError> {
        match self.opt_str("activation")? {
            None => Ok(Activation::Linear),
            Some(s) => s.parse().map_err(|name| ParseError::UnsupportedActivation {
                layer: self.layer.to_string(),
                name,
            }),
        }
    }

    /// `padding` field, defaulting to valid.
    pub fn padding(&mut self) -> Result<Padding, ParseError> {
        match self.opt_str("padding")? {
            None => Ok(Padding::Valid),
            Some(s) => s
                .parse()
                .map_err(|p| self.invalid("padding", format!("unknown padding `{p}`"))),
        }
    }

    /// Fails on the first field no builder consumed.
    pub fn finish(self) -> Result<(), ParseError> {
        match self.fields.keys().find(|k| !self.consumed.contains(k.as_str())) {
            Some(field) => Err(ParseError::UnknownField {
                layer: self.layer.to_string(),
                field: field.clone(),
            }),
            None => Ok(()),
        }
    }
}

pub type LayerBuilder = dyn Fn(&mut Hyperparams<'_>) -> Result<LayerKind, ParseError> + Send + Sync;

/// Maps schema type strings to layer builders.
pub struct LayerBuilderRegistry {
    builders: BTreeMap<String, Box<LayerBuilder>>,
}

impl LayerBuilderRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    /// Registry with builders for every built-in layer kind.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register("dense", build_dense);
        r.register("conv1d", build_conv1d);
        r.register("conv2d", build_conv2d);
        r.register("maxpool1d", build_maxpool1d);
        r.register("maxpool2d", build_maxpool2d);
        r.register("flatten", |_: &mut Hyperparams<'_>| Ok(LayerKind::Flatten));
        r
    }

    /// Adds or replaces the builder for `name`.
    pub fn register<F>(&mut self, name: impl Into<String>, builder: F)
    where
        F: Fn(&mut Hyperparams<'_>) -> Result<LayerKind, ParseError> + Send + Sync + 'static,
    {
        self.builders.insert(name.into(), Box::new(builder));
    }

    pub fn get(&self, name: &str) -> Option<&LayerBuilder> {
        self.builders.get(name).map(Box::as_ref)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.builders.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }
}

impl Default for LayerBuilderRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

impl fmt::Debug for LayerBuilderRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.names()).finish()
    }
}

fn build_dense(p: &mut Hyperparams<'_>) -> Result<LayerKind, ParseError> {
    Ok(LayerKind::Dense {
        units: p.positive("units")?,
        activation: p.activation()?,
    })
}

fn build_conv1d(p: &mut Hyperparams<'_>) -> Result<LayerKind, ParseError> {
    Ok(LayerKind::Conv1D {
        filters: p.positive("filters")?,
        kernel_size: p.positive("kernel_size")?,
        stride: p.opt_positive("stride")?.unwrap_or(1),
        padding: p.padding()?,
        activation: p.activation()?,
    })
}

fn build_conv2d(p: &mut Hyperparams<'_>) -> Result<LayerKind, ParseError> {
    Ok(LayerKind::Conv2D {
        filters: p.positive("filters")?,
        kernel_h: p.positive("kernel_h")?,
        kernel_w: p.positive("kernel_w")?,
        stride_h: p.opt_positive("stride_h")?.unwrap_or(1),
        stride_w: p.opt_positive("stride_w")?.unwrap_or(1),
        padding: p.padding()?,
        activation: p.activation()?,
    })
}

fn build_maxpool1d(p: &mut Hyperparams<'_>) -> Result<LayerKind, ParseError> {
    let pool_size = p.positive("pool_size")?;
    Ok(LayerKind::MaxPool1D {
        pool_size,
        stride: p.opt_positive("stride")?.unwrap_or(pool_size),
    })
}

fn build_maxpool2d(p: &mut Hyperparams<'_>) -> Result<LayerKind, ParseError> {
    let pool_h = p.positive("pool_h")?;
    let pool_w = p.positive("pool_w")?;
    Ok(LayerKind::MaxPool2D {
        pool_h,
        pool_w,
        stride_h: p.opt_positive("stride_h")?.unwrap_or(pool_h),
        stride_w: p.opt_positive("stride_w")?.unwrap_or(pool_w),
    })
}

/// Hyperparameter fields written for `kind`, with every default made explicit.
pub fn explicit_params(kind: &LayerKind) -> Map<String, Value> {
    let mut m = Map::new();
    for (name, value) in kind.int_params() {
        m.insert(name.to_string(), Value::from(value as u64));
    }
    match kind {
        LayerKind::Conv1D { padding, .. } | LayerKind::Conv2D { padding, .. } => {
            m.insert("padding".into(), Value::from(padding.name()));
        }
        _ => {}
    }
    if let Some(act) = kind.activation() {
        m.insert("activation".into(), Value::from(act.name()));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn build(name: &str, params: Value) -> Result<LayerKind, ParseError> {
        let reg = LayerBuilderRegistry::with_defaults();
        let map = params.as_object().unwrap().clone();
        let mut hp = Hyperparams::new("l", &map);
        let kind = reg.get(name).unwrap()(&mut hp)?;
        hp.finish()?;
        Ok(kind)
    }

    #[test]
    fn pool_stride_defaults_to_pool_size() {
        assert_eq!(
            build("maxpool1d", json!({"pool_size": 5})).unwrap(),
            LayerKind::MaxPool1D {
                pool_size: 5,
                stride: 5
            }
        );
        assert_eq!(
            build("maxpool2d", json!({"pool_h": 2, "pool_w": 3, "stride_w": 1})).unwrap(),
            LayerKind::MaxPool2D {
                pool_h: 2,
                pool_w: 3,
                stride_h: 2,
                stride_w: 1
            }
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = build("dense", json!({"units": 3, "use_bias": true})).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownField {
                layer: "l".into(),
                field: "use_bias".into()
            }
        );
        assert!(build("flatten", json!({"activation": "relu"})).is_err());
    }

    #[test]
    fn bad_values() {
        assert!(matches!(
            build("dense", json!({"units": 0})),
            Err(ParseError::Hyperparameter { .. })
        ));
        assert!(matches!(
            build("dense", json!({"units": -2})),
            Err(ParseError::Hyperparameter { .. })
        ));
        assert!(matches!(
            build("dense", json!({"units": 2.5})),
            Err(ParseError::Hyperparameter { .. })
        ));
        assert!(matches!(
            build("dense", json!({})),
            Err(ParseError::Hyperparameter { .. })
        ));
        assert_eq!(
            build("dense", json!({"units": 2, "activation": "elu"})),
            Err(ParseError::UnsupportedActivation {
                layer: "l".into(),
                name: "elu".into()
            })
        );
        assert!(build("conv1d", json!({"filters": 1, "kernel_size": 2, "padding": "causal"})).is_err());
    }

    #[test]
    fn explicit_params_rebuild_the_same_kind() {
        let kinds = [
            LayerKind::Conv2D {
                filters: 2,
                kernel_h: 3,
                kernel_w: 1,
                stride_h: 2,
                stride_w: 1,
                padding: Padding::Same,
                activation: Activation::Tanh,
            },
            LayerKind::MaxPool1D {
                pool_size: 4,
                stride: 1,
            },
            LayerKind::Flatten,
        ];
        for kind in kinds {
            let params = Value::Object(explicit_params(&kind));
            assert_eq!(build(kind.type_name(), params).unwrap(), kind);
        }
    }
}
