use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hymlab(config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hymlab"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn hn_mode_prints_derived_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = hymlab("[run]\nmode = \"hn\"\n\n[hn]\nslopes = [1.0, -1.0]\nop = \"S2\"\n", dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), r#"{"slopes":[2,0,-2]}"#);
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["slopes"], serde_json::json!([2, 0, -2]));
}

#[test]
fn flow_mode_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[manifold]\nkind = \"cp1\"\nn = 12\n\n[bundle]\ntag = \"CP1:O(0)⊕O(0)\"\n\n[run]\nmode = \"flow\"\nt_end = 0.005\nrecord_every = 2\n";
    let out = hymlab(cfg, dir.path(), &["--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    for f in ["series.csv", "summary.json", "manifest.json", "schema.txt"] {
        assert!(o.join(f).is_file(), "missing {f}");
    }
    let mut rd = csv::Reader::from_path(o.join("series.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    let schema = fs::read_to_string(o.join("schema.txt")).unwrap();
    for h in &header {
        assert!(schema.contains(&format!("{h}: ")), "column {h} undocumented");
    }
    let det = header.iter().position(|h| h == "det_residual").unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert!(rows.len() >= 2);
    for row in &rows {
        assert!(row[det].parse::<f64>().unwrap() <= 1e-6);
    }
    let manifest = read_json(&o.join("manifest.json"));
    assert_eq!(manifest["config"]["parallel"]["workers"], 2);
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn runs_are_deterministic_across_worker_counts() {
    let cfg = "[manifold]\nkind = \"cp1\"\nn = 12\n\n[run]\nmode = \"flow\"\nt_end = 0.01\nrecord_every = 3\n";
    let series = |workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = hymlab(cfg, dir.path(), &["--seed", "5", "--workers", workers]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(dir.path().join("out/series.csv")).unwrap()
    };
    let a = series("1");
    assert_eq!(a, series("1"));
    assert_eq!(a, series("3"));
}

#[test]
fn unknown_key_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let out = hymlab("[run]\nmode = \"hn\"\nbogus = 1\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:1") || err.contains("line 3"), "{err}");
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn out_of_range_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = hymlab("[run]\nmode = \"flow\"\nt_end = -1.0\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn validate_mode_runs_a_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = hymlab("[run]\nmode = \"validate\"\n\n[validate]\ncriteria = [10, 12]\n", dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["passed"], 2);
    assert_eq!(summary["failed"], 0);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("criterion 10 PASS") && err.contains("criterion 12 PASS"), "{err}");
}
