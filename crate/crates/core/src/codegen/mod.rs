//! C source emission and the flash-footprint planner.
//!
//! [`generate_code`] turns a validated graph into three files:
//!
//! * `<prefix>.h` declares `void <prefix>_forward(const float *, float *)`
//!   and the `<PREFIX>_INPUT_LEN` / `<PREFIX>_OUTPUT_LEN` constants,
//! * `<prefix>_params.h` holds every kernel and bias as a `static const float`
//!   array, row-major,
//! * `<prefix>.c` holds one helper per layer kind in use, one static output
//!   buffer per layer, and the forward function.
//!
//! The emitted code is C89, includes nothing but `<math.h>`, and never
//! allocates. It follows the interpreter's loop order so results match it
//! up to the host compiler's floating-point contraction settings.

mod footprint;
pub mod templates;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use footprint::{footprint, max_params, plan, DomainError, FootprintReport, Gamma, SUPPORTED_PARAM_BITS};

use crate::model_ir::{axis_geometry, Activation, LayerKind, NetworkGraph, Padding, INPUT_ID};
use templates::render;

pub const DEFAULT_FLOAT_DIGITS: usize = 9;

const VALUES_PER_LINE: usize = 6;

/// Reserved words of C89 plus the C99/C11 additions.
const C_KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Bool",
    "_Complex",
    "_Imaginary",
    "_Alignas",
    "_Alignof",
    "_Atomic",
    "_Generic",
    "_Noreturn",
    "_Static_assert",
    "_Thread_local",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("`{0}` is not a usable C identifier prefix")]
    Identifier(String),
    #[error("no emitter for layer `{layer}` of type `{kind}`")]
    UnsupportedLayer { layer: String, kind: String },
    #[error("layer `{0}` has non-finite weights")]
    NonFiniteWeight(String),
    #[error("float_literal_digits must be between 1 and 17, got {0}")]
    FloatDigits(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodegenOptions {
    /// Symbol and file-name prefix; `None` derives one from the graph name.
    pub prefix: Option<String>,
    /// Significant decimal digits per float literal; 9 round-trips every f32.
    pub float_literal_digits: usize,
}

impl Default for CodegenOptions {
    fn default() -> Self {
        Self {
            prefix: None,
            float_literal_digits: DEFAULT_FLOAT_DIGITS,
        }
    }
}

impl CodegenOptions {
    pub fn with_prefix(prefix: impl Into<String>) -> Self {
        Self {
            prefix: Some(prefix.into()),
            ..Self::default()
        }
    }
}

/// Emitted files keyed by file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceBundle {
    pub prefix: String,
    pub entry_symbol: String,
    pub files: BTreeMap<String, String>,
}

impl SourceBundle {
    pub fn header_name(&self) -> String {
        format!("{}.h", self.prefix)
    }

    pub fn params_name(&self) -> String {
        format!("{}_params.h", self.prefix)
    }

    pub fn source_name(&self) -> String {
        format!("{}.c", self.prefix)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, text) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }

    /// C source of a stdin/stdout CSV driver for host-side testing.
    pub fn host_driver(&self) -> String {
        render(
            templates::HOST_DRIVER,
            &[
                ("header", &self.header_name()),
                ("p", &self.prefix),
                ("P", &self.prefix.to_uppercase()),
            ],
        )
    }
}

/// Checks that `prefix` is a plain C identifier and not a keyword.
pub fn validate_prefix(prefix: &str) -> Result<(), CodegenError> {
    let mut chars = prefix.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    let tail_ok = chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !head_ok || !tail_ok || C_KEYWORDS.contains(&prefix) {
        return Err(CodegenError::Identifier(prefix.to_string()));
    }
    Ok(())
}

/// Lower-cased identifier derived from a graph name.
pub fn sanitize_prefix(name: &str) -> Result<String, CodegenError> {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    let trimmed = s.trim_matches('_');
    if trimmed.is_empty() {
        return Err(CodegenError::Identifier(name.to_string()));
    }
    s = trimmed.to_string();
    if s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert_str(0, "net_");
    }
    if C_KEYWORDS.contains(&s.as_str()) {
        s.push_str("_net");
    }
    validate_prefix(&s)?;
    Ok(s)
}

fn sanitize_fragment(id: &str) -> String {
    let s: String = id
        .chars()
        .take(32)
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}

/// Makes arbitrary text safe inside a C block comment.
fn comment_safe(text: &str) -> String {
    text.replace("*/", "* /")
        .replace("/*", "/ *")
        .replace(['\n', '\r'], " ")
}

fn format_shape(shape: &[usize]) -> String {
    let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
    format!("[{}]", dims.join(", "))
}

fn float_literal(v: f32, digits: usize) -> String {
    let mut s = format!("{:.*e}", digits - 1, v);
    s.push('f');
    s
}

fn activation_symbol(act: Activation) -> Option<&'static str> {
    match act {
        Activation::Linear => None,
        Activation::Relu => Some("relu"),
        Activation::Sigmoid => Some("sigmoid"),
        Activation::Tanh => Some("tanh"),
        Activation::Softmax => Some("softmax"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Helper {
    Dense,
    Conv1D,
    Conv2D,
    MaxPool1D,
    MaxPool2D,
    Copy,
    Relu,
    Sigmoid,
    Tanh,
    Softmax,
}

impl Helper {
    fn template(self) -> &'static str {
        match self {
            Helper::Dense => templates::DENSE,
            Helper::Conv1D => templates::CONV1D,
            Helper::Conv2D => templates::CONV2D,
            Helper::MaxPool1D => templates::MAXPOOL1D,
            Helper::MaxPool2D => templates::MAXPOOL2D,
            Helper::Copy => templates::COPY,
            Helper::Relu => templates::RELU,
            Helper::Sigmoid => templates::SIGMOID,
            Helper::Tanh => templates::TANH,
            Helper::Softmax => templates::SOFTMAX,
        }
    }

    fn for_activation(act: Activation) -> Option<Helper> {
        match act {
            Activation::Linear => None,
            Activation::Relu => Some(Helper::Relu),
            Activation::Sigmoid => Some(Helper::Sigmoid),
            Activation::Tanh => Some(Helper::Tanh),
            Activation::Softmax => Some(Helper::Softmax),
        }
    }
}

fn pad_before(len: usize, window: usize, stride: usize, padding: Padding) -> usize {
    axis_geometry(len, window, stride, padding)
        .expect("validated geometry")
        .pad_before
}

/// Emits the C bundle for `graph`.
pub fn generate_code(graph: &NetworkGraph, options: &CodegenOptions) -> Result<SourceBundle, CodegenError> {
    let prefix = match &options.prefix {
        Some(p) => {
            validate_prefix(p)?;
            p.clone()
        }
        None => sanitize_prefix(graph.name())?,
    };
    let digits = options.float_literal_digits;
    if !(1..=17).contains(&digits) {
        return Err(CodegenError::FloatDigits(digits));
    }
    let upper = prefix.to_uppercase();
    let header_name = format!("{prefix}.h");
    let params_name = format!("{prefix}_params.h");
    let source_name = format!("{prefix}.c");
    let name = comment_safe(graph.name()).replace('"', "'");

    let mut params = String::new();
    let mut buffers = String::new();
    let mut geometry = String::new();
    let mut body = String::new();
    let mut helpers: BTreeSet<Helper> = BTreeSet::new();
    let mut out_symbols: BTreeMap<&str, String> = BTreeMap::new();

    for (idx, node) in graph.layers().enumerate() {
        let id = node.id();
        let stem = {
            let frag = sanitize_fragment(id);
            if frag.is_empty() {
                format!("{prefix}_l{idx}")
            } else {
                format!("{prefix}_l{idx}_{frag}")
            }
        };
        let layer_label = format!("{} ({})", comment_safe(id), node.kind().type_name());
        let in_shape = graph.input_shape_of(node);
        let out_shape = graph.shapes().get(id).expect("inferred");
        let in_len: usize = in_shape.iter().product();
        let out_len: usize = out_shape.iter().product();
        let x = if node.spec.inputs[0] == INPUT_ID {
            "input".to_string()
        } else {
            out_symbols[node.spec.inputs[0].as_str()].clone()
        };
        let y = format!("{stem}_out");

        let (w, b) = match &node.weights {
            Some(weights) => {
                let mut syms = Vec::with_capacity(2);
                for (tensor, t) in [("kernel", &weights.kernel), ("bias", &weights.bias)] {
                    if t.data().iter().any(|v| !v.is_finite()) {
                        return Err(CodegenError::NonFiniteWeight(id.to_string()));
                    }
                    let symbol = format!("{stem}_{tensor}");
                    let lines: Vec<String> = t
                        .data()
                        .chunks(VALUES_PER_LINE)
                        .map(|chunk| {
                            let lits: Vec<String> = chunk.iter().map(|&v| float_literal(v, digits)).collect();
                            format!("    {}", lits.join(", "))
                        })
                        .collect();
                    params.push_str(&render(
                        templates::PARAM_ARRAY,
                        &[
                            ("layer", &layer_label),
                            ("tensor", tensor),
                            ("shape", &format_shape(t.shape())),
                            ("symbol", &symbol),
                            ("len", &t.len().to_string()),
                            ("values", &lines.join(",\n")),
                        ],
                    ));
                    syms.push(symbol);
                }
                let b = syms.pop().expect("bias");
                let w = syms.pop().expect("kernel");
                (w, b)
            }
            None => (String::new(), String::new()),
        };

        buffers.push_str(&render(
            templates::BUFFER,
            &[
                ("symbol", &y),
                ("len", &out_len.to_string()),
                ("layer", &layer_label),
                ("shape", &format_shape(out_shape)),
            ],
        ));
        let _ = writeln!(body, "    /* {layer_label} -> {} */", format_shape(out_shape));

        let call = match *node.kind() {
            LayerKind::Dense { units, .. } => {
                helpers.insert(Helper::Dense);
                render(
                    templates::DENSE_CALL,
                    &[
                        ("p", &prefix),
                        ("x", &x),
                        ("in_len", &in_len.to_string()),
                        ("w", &w),
                        ("b", &b),
                        ("y", &y),
                        ("units", &units.to_string()),
                    ],
                )
            }
            LayerKind::Conv1D {
                filters,
                kernel_size,
                stride,
                padding,
                ..
            } => {
                helpers.insert(Helper::Conv1D);
                render(
                    templates::CONV1D_CALL,
                    &[
                        ("p", &prefix),
                        ("x", &x),
                        ("in_len", &in_shape[0].to_string()),
                        ("channels", &in_shape[1].to_string()),
                        ("w", &w),
                        ("b", &b),
                        ("kernel", &kernel_size.to_string()),
                        ("filters", &filters.to_string()),
                        ("stride", &stride.to_string()),
                        (
                            "pad",
                            &pad_before(in_shape[0], kernel_size, stride, padding).to_string(),
                        ),
                        ("y", &y),
                        ("out_len", &out_shape[0].to_string()),
                    ],
                )
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
                helpers.insert(Helper::Conv2D);
                let geom_sym = format!("{stem}_geom");
                let values = [
                    in_shape[0],
                    in_shape[1],
                    in_shape[2],
                    kernel_h,
                    kernel_w,
                    filters,
                    stride_h,
                    stride_w,
                    pad_before(in_shape[0], kernel_h, stride_h, padding),
                    pad_before(in_shape[1], kernel_w, stride_w, padding),
                    out_shape[0],
                    out_shape[1],
                ];
                geometry.push_str(&render(
                    templates::CONV2D_GEOM,
                    &[("symbol", &geom_sym), ("values", &ulong_list(&values))],
                ));
                render(
                    templates::CONV2D_CALL,
                    &[
                        ("p", &prefix),
                        ("x", &x),
                        ("w", &w),
                        ("b", &b),
                        ("y", &y),
                        ("geom", &geom_sym),
                    ],
                )
            }
            LayerKind::MaxPool1D { pool_size, stride } => {
                helpers.insert(Helper::MaxPool1D);
                render(
                    templates::MAXPOOL1D_CALL,
                    &[
                        ("p", &prefix),
                        ("x", &x),
                        ("channels", &in_shape[1].to_string()),
                        ("pool", &pool_size.to_string()),
                        ("stride", &stride.to_string()),
                        ("y", &y),
                        ("out_len", &out_shape[0].to_string()),
                    ],
                )
            }
            LayerKind::MaxPool2D {
                pool_h,
                pool_w,
                stride_h,
                stride_w,
            } => {
                helpers.insert(Helper::MaxPool2D);
                let geom_sym = format!("{stem}_geom");
                let values = [
                    in_shape[1],
                    in_shape[2],
                    pool_h,
                    pool_w,
                    stride_h,
                    stride_w,
                    out_shape[0],
                    out_shape[1],
                ];
                geometry.push_str(&render(
                    templates::MAXPOOL2D_GEOM,
                    &[("symbol", &geom_sym), ("values", &ulong_list(&values))],
                ));
                render(
                    templates::MAXPOOL2D_CALL,
                    &[("p", &prefix), ("x", &x), ("y", &y), ("geom", &geom_sym)],
                )
            }
            LayerKind::Flatten => {
                helpers.insert(Helper::Copy);
                render(
                    templates::FLATTEN_CALL,
                    &[("p", &prefix), ("x", &x), ("y", &y), ("len", &in_len.to_string())],
                )
            }
        };
        body.push_str(&call);

        if let Some(act) = node.kind().activation() {
            if let (Some(helper), Some(sym)) = (Helper::for_activation(act), activation_symbol(act)) {
                helpers.insert(helper);
                body.push_str(&render(
                    templates::ACTIVATION_CALL,
                    &[("p", &prefix), ("act", sym), ("y", &y), ("len", &out_len.to_string())],
                ));
            }
        }
        out_symbols.insert(id, y);
    }

    let header = render(
        templates::HEADER,
        &[
            ("file", &header_name),
            ("name", &name),
            ("p", &prefix),
            ("P", &upper),
            ("input_len", &graph.input_len().to_string()),
            ("output_len", &graph.output_len().to_string()),
        ],
    );

    let mut params_file = render(
        templates::PARAMS_OPEN,
        &[
            ("file", &params_name),
            ("name", &name),
            ("count", &graph.param_count().to_string()),
            ("P", &upper),
        ],
    );
    params_file.push_str(&params);
    params_file.push_str(&render(templates::PARAMS_CLOSE, &[("P", &upper)]));

    let mut source = render(
        templates::SOURCE_OPEN,
        &[
            ("file", &source_name),
            ("name", &name),
            ("header", &header_name),
            ("params", &params_name),
        ],
    );
    source.push('\n');
    source.push_str(&buffers);
    if !geometry.is_empty() {
        source.push('\n');
        source.push_str(&geometry);
    }
    for helper in &helpers {
        source.push_str(&render(helper.template(), &[("p", &prefix)]));
    }
    source.push_str(&render(templates::FORWARD_OPEN, &[("p", &prefix)]));
    source.push_str(&body);
    source.push_str(&render(
        templates::FORWARD_CLOSE,
        &[("P", &upper), ("y", &out_symbols[graph.output_id()])],
    ));

    let mut files = BTreeMap::new();
    files.insert(header_name, header);
    files.insert(params_name, params_file);
    files.insert(source_name, source);
    Ok(SourceBundle {
        entry_symbol: format!("{prefix}_forward"),
        prefix,
        files,
    })
}

fn ulong_list(values: &[usize]) -> String {
    values.iter().map(|v| format!("{v}UL")).collect::<Vec<_>>().join(", ")
}
