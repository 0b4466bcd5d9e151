use std::path::Path;
use std::process::Command;

use freedrag_core::instruction::{BlobBackendParams, PointPair};
use freedrag_core::{BackendSpec, Instruction};
use freedrag_eval::metrics::MetricReport;
use freedrag_eval::suites::standard_suite;
use freedrag_session::batch::{RunReport, VariantSummary};
use serde_json::Value;

fn freedrag(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_freedrag"))
        .args(args)
        .output()
        .unwrap()
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    std::fs::write(path, serde_json::to_vec(value).unwrap()).unwrap();
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn instruction(handle: [f64; 2], target: [f64; 2]) -> Instruction {
    Instruction::new(
        BackendSpec::Blob {
            params: BlobBackendParams::default(),
            seed: 13,
        },
        vec![PointPair { handle, target }],
    )
}

#[test]
fn zero_length_drag_exits_cleanly_without_substeps() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = dir.path().join("inst.json");
    write_json(&inst_path, &instruction([30.0, 30.0], [30.0, 30.0]));
    let out = dir.path().join("out");
    let o = freedrag(&[
        "run",
        "--instruction",
        inst_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: RunReport = read_json(&out.join("report.json"));
    assert_eq!(report.substeps, 0);
    assert_eq!(report.handles, vec![[30.0, 30.0]]);
    for f in [
        "trace.csv",
        "initial.png",
        "initial.json",
        "final.png",
        "final.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
}

#[test]
fn run_honours_the_drag_limit_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = dir.path().join("inst.json");
    write_json(&inst_path, &instruction([20.0, 32.0], [44.0, 32.0]));
    let out = dir.path().join("out");
    let o = freedrag(&[
        "run",
        "--instruction",
        inst_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--drags",
        "2",
        "--method",
        "pointdrag",
    ]);
    assert!(o.status.success());
    let report: Value = read_json(&out.join("report.json"));
    assert_eq!(report["method"], "pointdrag");
    assert_eq!(report["drags"], 2);
    assert_eq!(report["status"], "running");
}

#[test]
fn invalid_instruction_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 1, "points": []}"#).unwrap();
    let out = dir.path().join("out");
    let o = freedrag(&[
        "run",
        "--instruction",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());

    let missing = dir.path().join("missing.json");
    let o = freedrag(&[
        "suite",
        "--instructions",
        missing.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}

#[test]
fn builtin_suite_writes_twenty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("suite");
    let o = freedrag(&[
        "suite",
        "--builtin",
        "convergence",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("report.csv")).unwrap();
    assert_eq!(rdr.records().count(), 20);
    let reports: Vec<MetricReport> = read_json(&out.join("report.json"));
    assert!(reports.iter().all(|r| r.error.is_none()));
}

#[test]
fn exported_suite_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("standard.json");
    let o = freedrag(&[
        "export-suite",
        "--builtin",
        "standard",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let back: Vec<Instruction> = read_json(&path);
    assert_eq!(back, standard_suite());
}

fn ablate(out: &Path, extra: &[&str]) -> Vec<VariantSummary> {
    let mut args = vec![
        "ablate",
        "--builtin",
        "standard",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = freedrag(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    read_json(&out.join("ablation.json"))
}

#[test]
fn ablate_writes_reference_and_variant() {
    let dir = tempfile::tempdir().unwrap();
    let summaries = ablate(&dir.path().join("a"), &["--l", "0.15", "--d", "1.5"]);
    let names: Vec<_> = summaries.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["reference", "l0.15_d1.5"]);
    assert!(summaries.iter().all(|s| s.runs == 20 && s.errors == 0));
    assert!(dir
        .path()
        .join("a")
        .join("l0.15_d1.5")
        .join("report.csv")
        .exists());
}

#[test]
fn small_steps_freeze_more_and_move_less() {
    let dir = tempfile::tempdir().unwrap();
    let cautious = &ablate(
        &dir.path().join("small"),
        &["--l", "0.15", "--d", "1.5", "--no-reference"],
    )[0];
    let bold = &ablate(
        &dir.path().join("large"),
        &["--l", "0.45", "--d", "4.5", "--no-reference"],
    )[0];
    assert!(
        cautious.freeze_fraction > bold.freeze_fraction,
        "{cautious:?} vs {bold:?}"
    );
    assert!(
        cautious.mean_move.unwrap() < bold.mean_move.unwrap(),
        "{cautious:?} vs {bold:?}"
    );
}
