mod common;

use std::path::Path;
use std::process::{Command, Output};

use embednn::fixtures::{random_inputs, Fixture};

use common::{fixture_path, load_fixture};

fn embednn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embednn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(f: Fixture) -> String {
    fixture_path(f).to_string_lossy().into_owned()
}

const IDENTITY: &str = r#"{"format_version": 1, "name": "identity", "input": {"shape": [2]}, "output": "d",
  "layers": [{"id": "d", "type": "dense", "inputs": ["__input__"], "units": 2}],
  "weights": {"d": {"kernel": {"shape": [2, 2], "data": [1, 0, 0, 1]}, "bias": {"shape": [2], "data": [0, 0]}}}}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn inspect_lists_layers_and_total() {
    let o = embednn(&["inspect", &path(Fixture::ConvNet)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows = text
        .lines()
        .filter(|l| ["conv", "pool", "flatten", "dense"].iter().any(|p| l.starts_with(p)));
    assert_eq!(rows.count(), 6);
    let total = load_fixture(Fixture::ConvNet).param_count();
    assert!(text.trim_end().ends_with(&format!("total params {total}")));

    let o = embednn(&["inspect", &path(Fixture::ForceCalibration)]);
    assert!(stdout(&o).contains("total params 159"));
}

#[test]
fn inspect_rejects_malformed_document() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"format_version\": 1,");
    let o = embednn(&["inspect", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn check_exit_codes() {
    let ok = embednn(&["check", &path(Fixture::Tiny), "--flash-bits", "8192", "--gamma", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("max parameters  256"));
    let over = embednn(&["check", &path(Fixture::ConvNet), "--flash-bits", "8192", "--gamma", "1"]);
    assert_eq!(over.status.code(), Some(2));
    let bad = embednn(&["check", &path(Fixture::Tiny), "--flash-bits", "8192", "--gamma", "0"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("gamma"));
    let missing = embednn(&["check", &path(Fixture::Tiny)]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn eval_identity_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "id.json", IDENTITY);
    let rows = write(dir.path(), "in.csv", "0.3,-0.7\n");
    let o = embednn(&["eval", &model, "--inputs", &rows]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0.3,-0.7");

    let wide = write(dir.path(), "wide.csv", "0.3,-0.7,1\n");
    assert_eq!(embednn(&["eval", &model, "--inputs", &wide]).status.code(), Some(1));
    let gone = dir.path().join("nope.csv").to_string_lossy().into_owned();
    assert_eq!(embednn(&["eval", &model, "--inputs", &gone]).status.code(), Some(3));
}

#[test]
fn eval_fixed_32_tracks_float() {
    let dir = tempfile::tempdir().unwrap();
    let g = load_fixture(Fixture::SystemId);
    let csv: String = random_inputs(&g, 20, 1)
        .iter()
        .map(|x| format!("{},{}\n", x.data()[0], x.data()[1]))
        .collect();
    let rows = write(dir.path(), "in.csv", &csv);
    let parse = |o: Output| -> Vec<f32> { stdout(&o).lines().map(|l| l.parse().unwrap()).collect() };
    let float = parse(embednn(&["eval", &path(Fixture::SystemId), "--inputs", &rows]));
    let fixed = parse(embednn(&[
        "eval",
        &path(Fixture::SystemId),
        "--inputs",
        &rows,
        "--fixed",
        "32",
    ]));
    assert_eq!(float.len(), 20);
    assert!(common::max_abs_diff(&float, &fixed) <= 1e-6);
}

/// (bits, epsilon) pairs from the report table.
fn epsilons(table: &str) -> Vec<(u32, f64)> {
    table
        .lines()
        .filter_map(|l| {
            let mut cols = l.split_whitespace();
            let bits = cols.next()?.parse().ok()?;
            let eps = cols.next()?.parse().ok()?;
            Some((bits, eps))
        })
        .collect()
}

#[test]
fn quantize_report_rows_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let g = load_fixture(Fixture::ForceCalibration);
    let csv: String = random_inputs(&g, 30, 2)
        .iter()
        .map(|x| format!("{},{}\n", x.data()[0], x.data()[1]))
        .collect();
    let rows = write(dir.path(), "in.csv", &csv);
    let model = path(Fixture::ForceCalibration);

    let o = embednn(&["quantize-report", &model, "--inputs", &rows, "--bits", "2,8,16"]);
    assert_eq!(o.status.code(), Some(0));
    let eps = epsilons(&stdout(&o));
    assert_eq!(eps.iter().map(|e| e.0).collect::<Vec<_>>(), [2, 8, 16]);
    assert!(eps[0].1 >= eps[1].1 && eps[1].1 >= eps[2].1);

    let o = embednn(&["quantize-report", &model, "--inputs", &rows, "--bits", "32"]);
    assert_eq!(epsilons(&stdout(&o)), [(32, 0.0)]);

    let empty = write(dir.path(), "empty.csv", "");
    assert_eq!(
        embednn(&["quantize-report", &model, "--inputs", &empty]).status.code(),
        Some(1)
    );
}

#[test]
fn codegen_writes_bundle_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();
    let o = embednn(&["codegen", &path(Fixture::Tiny), "--out", &out_s, "--prefix", "tiny"]);
    assert_eq!(o.status.code(), Some(0));
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["tiny.c", "tiny.h", "tiny_params.h"]);
    let first: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(out.join(n)).unwrap()).collect();
    assert_eq!(
        embednn(&["codegen", &path(Fixture::Tiny), "--out", &out_s, "--prefix", "tiny"])
            .status
            .code(),
        Some(0)
    );
    let second: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(out.join(n)).unwrap()).collect();
    assert_eq!(first, second);

    let blocker = write(dir.path(), "file", "x");
    let nested = format!("{blocker}/sub");
    assert_eq!(
        embednn(&["codegen", &path(Fixture::Tiny), "--out", &nested])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        embednn(&["codegen", &path(Fixture::Tiny), "--out", &out_s, "--prefix", "9x"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sidecar_is_resolved_next_to_the_document() {
    let o = embednn(&["inspect", &path(Fixture::Terrain)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("total params 20582"));

    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture_path(Fixture::Terrain), dir.path().join("terrain.json")).unwrap();
    let lone = dir.path().join("terrain.json").to_string_lossy().into_owned();
    assert_eq!(embednn(&["inspect", &lone]).status.code(), Some(3));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(embednn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(embednn(&[]).status.code(), Some(1));
    assert_eq!(embednn(&["--help"]).status.code(), Some(0));
}
