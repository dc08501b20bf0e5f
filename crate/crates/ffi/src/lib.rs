//! C ABI over the embednn compiler.
//!
//! Models are opaque `EnnModel` handles. Every fallible call returns an
//! [`EnnStatus`]; on failure, [`enn_last_error_message`] describes the most
//! recent error on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use embednn::cli::{load_model, CliError};
use embednn::codegen::{footprint, generate_code, CodegenOptions, Gamma};
use embednn::interpreter::forward;
use embednn::model_ir::NetworkGraph;
use embednn::parser::parse_model;
use embednn::quantizer::forward_fixed;
use embednn::tensor::TensorData;

/// Result codes. `ENN_STATUS_OK` is zero; every other value is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Shape = 4,
    Domain = 5,
    Quantization = 6,
    Codegen = 7,
    Io = 8,
    BufferSize = 9,
    Panic = 10,
}

/// A parsed, validated network.
pub struct EnnModel {
    graph: NetworkGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type Outcome = Result<(), (EnnStatus, String)>;

fn guard(f: impl FnOnce() -> Outcome) -> EnnStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EnnStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EnnStatus::Panic
        }
    }
}

fn fail<T>(status: EnnStatus, message: impl ToString) -> Result<T, (EnnStatus, String)> {
    Err((status, message.to_string()))
}

fn null(what: &str) -> (EnnStatus, String) {
    (EnnStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn bytes<'a>(p: *const u8, len: usize, what: &str) -> Result<&'a [u8], (EnnStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn utf8<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EnnStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (EnnStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn model_ref<'a>(model: *const EnnModel) -> Result<&'a EnnModel, (EnnStatus, String)> {
    model.as_ref().ok_or_else(|| null("model"))
}

fn store(out: *mut *mut EnnModel, graph: NetworkGraph) {
    let handle = Box::into_raw(Box::new(EnnModel { graph }));
    // SAFETY: callers check `out` for null before parsing.
    unsafe { *out = handle };
}

/// Parses a model document held in memory. `sidecar` may be null when the
/// document stores its weights inline. On success `*out` owns a handle that
/// must be released with `enn_model_free`.
///
/// # Safety
/// `document` must point to `document_len` readable bytes, `sidecar` to
/// `sidecar_len` bytes or be null, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn enn_model_load(
    document: *const u8,
    document_len: usize,
    sidecar: *const u8,
    sidecar_len: usize,
    out: *mut *mut EnnModel,
) -> EnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let doc = bytes(document, document_len, "document")?;
        let side = if sidecar.is_null() {
            None
        } else {
            Some(bytes(sidecar, sidecar_len, "sidecar")?)
        };
        match parse_model(doc, side) {
            Ok(graph) => {
                store(out, graph);
                Ok(())
            }
            Err(e) => fail(EnnStatus::Parse, e),
        }
    })
}

/// Reads a model document from disk; a declared sidecar is resolved next to it.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn enn_model_load_file(path: *const c_char, out: *mut *mut EnnModel) -> EnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = utf8(path, "path")?;
        match load_model(Path::new(path)) {
            Ok(graph) => {
                store(out, graph);
                Ok(())
            }
            Err(e @ CliError::Io { .. }) => fail(EnnStatus::Io, e),
            Err(e) => fail(EnnStatus::Parse, e),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from a load function and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn enn_model_free(model: *mut EnnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input floats, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn enn_model_input_len(model: *const EnnModel) -> usize {
    model.as_ref().map_or(0, |m| m.graph.input_len())
}

/// Number of output floats, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn enn_model_output_len(model: *const EnnModel) -> usize {
    model.as_ref().map_or(0, |m| m.graph.output_len())
}

/// Total trainable parameters, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn enn_model_param_count(model: *const EnnModel) -> usize {
    model.as_ref().map_or(0, |m| m.graph.param_count())
}

unsafe fn run_into(
    model: *const EnnModel,
    input: *const f32,
    input_len: usize,
    output: *mut f32,
    output_len: usize,
    run: impl FnOnce(&NetworkGraph, &TensorData) -> Result<TensorData, (EnnStatus, String)>,
) -> EnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        let g = &m.graph;
        if input.is_null() {
            return Err(null("input"));
        }
        if output.is_null() {
            return Err(null("output"));
        }
        if input_len != g.input_len() {
            return fail(
                EnnStatus::BufferSize,
                format!("input holds {input_len} floats, model expects {}", g.input_len()),
            );
        }
        if output_len < g.output_len() {
            return fail(
                EnnStatus::BufferSize,
                format!("output holds {output_len} floats, model produces {}", g.output_len()),
            );
        }
        let data = std::slice::from_raw_parts(input, input_len).to_vec();
        let x = TensorData::new(g.input_shape().to_vec(), data).expect("length checked");
        let y = run(g, &x)?;
        std::slice::from_raw_parts_mut(output, y.len()).copy_from_slice(y.data());
        Ok(())
    })
}

/// Float inference. `input_len` must equal the model's input length and
/// `output_len` must be at least its output length.
///
/// # Safety
/// `input` and `output` must point to buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn enn_model_forward(
    model: *const EnnModel,
    input: *const f32,
    input_len: usize,
    output: *mut f32,
    output_len: usize,
) -> EnnStatus {
    run_into(model, input, input_len, output, output_len, |g, x| {
        forward(g, x).map_err(|e| (EnnStatus::Shape, e.to_string()))
    })
}

/// Fixed-point inference at `bits` total bits (2, 8, 16 or 32), with
/// activation formats calibrated on this input.
///
/// # Safety
/// As for `enn_model_forward`.
#[no_mangle]
pub unsafe extern "C" fn enn_model_forward_fixed(
    model: *const EnnModel,
    bits: u32,
    input: *const f32,
    input_len: usize,
    output: *mut f32,
    output_len: usize,
) -> EnnStatus {
    run_into(model, input, input_len, output, output_len, |g, x| {
        forward_fixed(g, x, bits).map_err(|e| (EnnStatus::Quantization, e.to_string()))
    })
}

/// Flash-budget check: `*fits` is set to 1 when the parameter count is at
/// most floor(gamma_num / gamma_den * flash_bits / bits_per_param).
/// `max_params` may be null.
///
/// # Safety
/// `fits` must be writable; `max_params` must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn enn_model_footprint(
    model: *const EnnModel,
    flash_bits: u64,
    gamma_num: u64,
    gamma_den: u64,
    bits_per_param: u32,
    fits: *mut i32,
    max_params: *mut u64,
) -> EnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        if fits.is_null() {
            return Err(null("fits"));
        }
        let gamma = Gamma::new(gamma_num, gamma_den).map_err(|e| (EnnStatus::Domain, e.to_string()))?;
        let report =
            footprint(&m.graph, flash_bits, gamma, bits_per_param).map_err(|e| (EnnStatus::Domain, e.to_string()))?;
        *fits = report.fits as i32;
        if !max_params.is_null() {
            *max_params = report.max_params;
        }
        Ok(())
    })
}

/// Writes the C bundle into `dir`. `prefix` may be null to derive one from
/// the network name.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `prefix` must be one or null.
#[no_mangle]
pub unsafe extern "C" fn enn_model_codegen_write(
    model: *const EnnModel,
    dir: *const c_char,
    prefix: *const c_char,
) -> EnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        let dir = utf8(dir, "dir")?;
        let prefix = if prefix.is_null() {
            None
        } else {
            Some(utf8(prefix, "prefix")?.to_string())
        };
        let options = CodegenOptions {
            prefix,
            ..CodegenOptions::default()
        };
        let bundle = generate_code(&m.graph, &options).map_err(|e| (EnnStatus::Codegen, e.to_string()))?;
        bundle
            .write_to(Path::new(dir))
            .map_err(|e| (EnnStatus::Io, format!("{dir}: {e}")))?;
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null if it succeeded.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn enn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn enn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
