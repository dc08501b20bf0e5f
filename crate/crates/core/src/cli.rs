//! Command-line front end.
//!
//! Exit status: 0 success, 1 parse, validation or usage failure, 2 the
//! model does not fit the flash budget, 3 I/O failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::codegen::{footprint, generate_code, CodegenError, CodegenOptions, DomainError, Gamma};
use crate::interpreter::forward;
use crate::model_ir::{NetworkGraph, ShapeError};
use crate::parser::{read_document, ParseError, Parser as ModelParser};
use crate::quantizer::{fidelity_report, forward_fixed_plan, QuantError, QuantPlan};
use crate::tensor::TensorData;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitStatus {
    Success = 0,
    Invalid = 1,
    Rejected = 2,
    Io = 3,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Domain(#[from] DomainError),
    #[error("{0}")]
    Quant(#[from] QuantError),
    #[error("{0}")]
    Shape(#[from] ShapeError),
    #[error("{0}")]
    Codegen(#[from] CodegenError),
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Io { .. } => ExitStatus::Io,
            _ => ExitStatus::Invalid,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "embednn",
    version,
    about = "Feed-forward network compiler for microcontrollers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the layer table and parameter count.
    Inspect(ModelArg),
    /// Check the parameter count against a flash budget.
    Check(CheckArgs),
    /// Run the model on CSV rows and print one output row per input row.
    Eval(EvalArgs),
    /// Report fixed-point error per bit width against the 32-bit baseline.
    QuantizeReport(QuantizeArgs),
    /// Emit the C source bundle.
    Codegen(CodegenArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Model document (JSON).
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub model: PathBuf,
    /// Flash size S in bits.
    #[arg(long)]
    pub flash_bits: u64,
    /// Fraction of flash available to parameters, as a decimal or `a/b`.
    #[arg(long, default_value = "1")]
    pub gamma: String,
    /// Bits per stored parameter.
    #[arg(long, default_value_t = 32)]
    pub bits: u32,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub model: PathBuf,
    /// CSV file, one flattened input per row.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Evaluate in k-bit fixed point, calibrated on all rows.
    #[arg(long, value_name = "K")]
    pub fixed: Option<u32>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub inputs: PathBuf,
    /// Comma-separated bit widths.
    #[arg(long, default_value = "2,8,16")]
    pub bits: String,
}

#[derive(Debug, Args)]
pub struct CodegenArgs {
    pub model: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Symbol prefix; defaults to the sanitized network name.
    #[arg(long)]
    pub prefix: Option<String>,
}

/// Reads a model document and the sidecar it names, resolved next to the document.
pub fn load_model(path: &Path) -> Result<NetworkGraph, CliError> {
    let document = fs::read(path).map_err(io_err(path))?;
    let doc = read_document(&document)?;
    let sidecar = match &doc.sidecar {
        Some(name) => {
            let sidecar_path = path.parent().unwrap_or(Path::new(".")).join(name);
            Some(fs::read(&sidecar_path).map_err(io_err(&sidecar_path))?)
        }
        None => None,
    };
    let parser = ModelParser::default();
    let sidecar = sidecar
        .as_deref()
        .map(crate::parser::read_weight_sidecar)
        .transpose()
        .map_err(ParseError::from)?;
    Ok(parser.build(doc, sidecar.as_ref())?)
}

/// Reads headerless CSV rows of `len` numbers each.
pub fn read_inputs(path: &Path, shape: &[usize]) -> Result<Vec<TensorData>, CliError> {
    let text = fs::read(path).map_err(io_err(path))?;
    let len: usize = shape.iter().product();
    let csv_err = |message: String| CliError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_slice());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != len {
            return Err(csv_err(format!(
                "row {}: expected {len} values, found {}",
                i + 1,
                record.len()
            )));
        }
        let data = record
            .iter()
            .map(|field| {
                field
                    .parse::<f32>()
                    .map_err(|_| csv_err(format!("row {}: `{field}` is not a number", i + 1)))
            })
            .collect::<Result<Vec<f32>, _>>()?;
        rows.push(TensorData::new(shape.to_vec(), data).expect("row length checked"));
    }
    Ok(rows)
}

fn write_row<W: Write>(out: &mut W, values: impl Iterator<Item = f32>) -> io::Result<()> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    csv.write_record(values.map(|v| v.to_string()))?;
    csv.flush()
}

pub fn cmd_inspect<W: Write>(args: &ModelArg, out: &mut W) -> Result<ExitStatus, CliError> {
    let graph = load_model(&args.model)?;
    let stdout = |e| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    inspect_table(&graph, out).map_err(stdout)?;
    Ok(ExitStatus::Success)
}

fn shape_text(shape: &[usize]) -> String {
    let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
    format!("[{}]", dims.join(", "))
}

/// Per-layer table: id, kind, output shape, parameter count.
pub fn inspect_table<W: Write>(graph: &NetworkGraph, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "network {}  input {}",
        graph.name(),
        shape_text(graph.input_shape())
    )?;
    writeln!(out, "{:<20} {:<10} {:<16} {:>10}", "id", "kind", "output", "params")?;
    for node in graph.layers() {
        let shape = graph.shapes().get(node.id()).expect("inferred");
        writeln!(
            out,
            "{:<20} {:<10} {:<16} {:>10}",
            node.id(),
            node.kind().type_name(),
            shape_text(shape),
            graph.layer_param_count(node.id())
        )?;
    }
    writeln!(out, "total params {}", graph.param_count())
}

pub fn cmd_check<W: Write>(args: &CheckArgs, out: &mut W) -> Result<ExitStatus, CliError> {
    let gamma: Gamma = args.gamma.parse()?;
    let graph = load_model(&args.model)?;
    let report = footprint(&graph, args.flash_bits, gamma, args.bits)?;
    writeln!(out, "{report}").map_err(io_err(Path::new("<stdout>")))?;
    Ok(if report.fits {
        ExitStatus::Success
    } else {
        ExitStatus::Rejected
    })
}

pub fn cmd_eval<W: Write>(args: &EvalArgs, out: &mut W) -> Result<ExitStatus, CliError> {
    let graph = load_model(&args.model)?;
    let inputs = read_inputs(&args.inputs, graph.input_shape())?;
    let stdout = io_err(Path::new("<stdout>"));
    let mut rows = Vec::with_capacity(inputs.len());
    match args.fixed {
        None => {
            for x in &inputs {
                rows.push(forward(&graph, x)?);
            }
        }
        Some(bits) => {
            if !inputs.is_empty() {
                let plan = QuantPlan::calibrate(&graph, &inputs)?;
                for x in &inputs {
                    rows.push(forward_fixed_plan(&graph, &plan, x, bits)?);
                }
            }
        }
    }
    let mut buf = Vec::new();
    for y in rows {
        write_row(&mut buf, y.data().iter().copied()).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    out.write_all(&buf).map_err(stdout)?;
    Ok(ExitStatus::Success)
}

fn parse_bits(spec: &str) -> Result<Vec<u32>, CliError> {
    let bits = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .map_err(|_| CliError::Usage(format!("bad bit width `{s}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if bits.is_empty() {
        return Err(CliError::Usage("no bit widths given".into()));
    }
    Ok(bits)
}

pub fn cmd_quantize_report<W: Write>(args: &QuantizeArgs, out: &mut W) -> Result<ExitStatus, CliError> {
    let bits = parse_bits(&args.bits)?;
    let graph = load_model(&args.model)?;
    let inputs = read_inputs(&args.inputs, graph.input_shape())?;
    let report = fidelity_report(&graph, &inputs, &bits)?;
    out.write_all(report.to_table().as_bytes())
        .map_err(io_err(Path::new("<stdout>")))?;
    Ok(ExitStatus::Success)
}

pub fn cmd_codegen<W: Write>(args: &CodegenArgs, out: &mut W) -> Result<ExitStatus, CliError> {
    let graph = load_model(&args.model)?;
    let options = CodegenOptions {
        prefix: args.prefix.clone(),
        ..CodegenOptions::default()
    };
    let bundle = generate_code(&graph, &options)?;
    let written = bundle.write_to(&args.out).map_err(io_err(&args.out))?;
    for path in written {
        writeln!(out, "{}", path.display()).map_err(io_err(Path::new("<stdout>")))?;
    }
    Ok(ExitStatus::Success)
}

pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<ExitStatus, CliError> {
    match &cli.command {
        Command::Inspect(a) => cmd_inspect(a, out),
        Command::Check(a) => cmd_check(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::QuantizeReport(a) => cmd_quantize_report(a, out),
        Command::Codegen(a) => cmd_codegen(a, out),
    }
}

/// Parses `args`, runs the command, reports errors on stderr, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Invalid
            } else {
                ExitStatus::Success
            };
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(status) => status,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.status()
        }
    }
}
