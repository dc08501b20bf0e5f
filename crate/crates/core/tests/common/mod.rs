#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use embednn::cli::load_model;
use embednn::codegen::{generate_code, CodegenOptions, SourceBundle};
use embednn::fixtures::Fixture;
use embednn::model_ir::NetworkGraph;
use embednn::tensor::TensorData;

pub const C89_FLAGS: &[&str] = &[
    "-std=c89",
    "-pedantic",
    "-Wall",
    "-Wextra",
    "-Werror",
    "-O2",
    "-ffp-contract=off",
];

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_path(f: Fixture) -> PathBuf {
    fixtures_dir().join(format!("{}.json", f.name()))
}

pub fn load_fixture(f: Fixture) -> NetworkGraph {
    load_model(&fixture_path(f)).unwrap_or_else(|e| panic!("{}: {e}", f.name()))
}

fn cc(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new("cc")
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| format!("cc: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("cc {args:?}\n{}", String::from_utf8_lossy(&out.stderr)))
    }
}

/// Writes `bundle` plus the host driver into `dir` and builds `dir/driver`.
/// The bundle is compiled as strict C89; the driver needs C99 for `strtof`.
pub fn build_driver(bundle: &SourceBundle, dir: &Path) -> Result<PathBuf, String> {
    bundle.write_to(dir).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("driver.c"), bundle.host_driver()).map_err(|e| e.to_string())?;
    let source = bundle.source_name();
    let mut args = C89_FLAGS.to_vec();
    args.extend(["-c", source.as_str(), "-o", "model.o"]);
    cc(&args, dir)?;
    cc(
        &[
            "-std=c99", "-O2", "-Wall", "-Wextra", "-Werror", "-c", "driver.c", "-o", "driver.o",
        ],
        dir,
    )?;
    cc(&["model.o", "driver.o", "-lm", "-o", "driver"], dir)?;
    Ok(dir.join("driver"))
}

pub fn compile_graph(graph: &NetworkGraph, prefix: &str, dir: &Path) -> Result<PathBuf, String> {
    let bundle = generate_code(graph, &CodegenOptions::with_prefix(prefix)).map_err(|e| e.to_string())?;
    build_driver(&bundle, dir)
}

/// Feeds `inputs` as CSV rows and parses one output row per input.
pub fn run_driver(exe: &Path, inputs: &[TensorData]) -> Result<Vec<Vec<f32>>, String> {
    let mut csv = String::new();
    for x in inputs {
        let row: Vec<String> = x.data().iter().map(|v| format!("{v:.9e}")).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let mut child = Command::new(exe)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    // Feed stdin from a separate thread so a full stdout pipe cannot deadlock us.
    let mut stdin = child.stdin.take().expect("piped");
    let feeder = std::thread::spawn(move || stdin.write_all(csv.as_bytes()));
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    feeder
        .join()
        .map_err(|_| "stdin feeder panicked".to_string())?
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|line| {
            line.split(',')
                .map(|v| v.trim().parse::<f32>().map_err(|e| format!("{v}: {e}")))
                .collect()
        })
        .collect()
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}
