use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn msbm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msbm")).args(args).current_dir(dir).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_ms");
    v
}

#[test]
fn tight_instance_report() {
    let dir = tempfile::tempdir().unwrap();
    let gen = msbm(&["gen", "tight", "--C", "2", "--n", "12", "--out", "tight"], dir.path());
    assert!(gen.status.success());
    let out = msbm(&["run", "tight.msbm", "tight.oracle", "msbm", "--C", "2", "--q", "1", "--opt"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let delta = 1e-4;
    assert!((r["value"].as_f64().unwrap() - (2.0f64 + delta).powi(11)).abs() < 1e-6);
    let ratio = r["ratio"].as_f64().unwrap();
    assert!(ratio <= 6.0 && ratio > 5.9);
    assert_eq!(r["matching"], serde_json::json!([12]));
    assert_eq!(r["memory_profile"], "streaming");
}

#[test]
fn generated_files_reparse_and_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for prefix in ["a", "b"] {
        let out = msbm(&["gen", "coverage", "--edges", "10", "--seed", "7", "--out", prefix], dir.path());
        assert!(out.status.success());
    }
    for ext in ["msbm", "oracle"] {
        let a = fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let b = fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b);
    }
    let text = fs::read_to_string(dir.path().join("a.msbm")).unwrap();
    assert!(msbm_core::instance::parse_stream(&text).is_ok());
    let text = fs::read_to_string(dir.path().join("a.oracle")).unwrap();
    assert!(msbm_core::oracle::parse_oracle(&text).is_ok());
    assert_eq!(msbm(&["gen", "tight", "--C", "1", "--out", "x"], dir.path()).status.code(), Some(1));
}

#[test]
fn incompatible_algorithms_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    msbm(&["gen", "coverage", "--b", "2", "--out", "c"], dir.path());
    let out = msbm(&["run", "c.msbm", "c.oracle", "preemptive"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert_eq!(msbm(&["run", "c.msbm", "c.oracle", "mwbm"], dir.path()).status.code(), Some(1));
    assert_eq!(msbm(&["run", "missing.msbm", "c.oracle", "msbm"], dir.path()).status.code(), Some(1));
    assert_eq!(msbm(&["run", "c.msbm"], dir.path()).status.code(), Some(1));
}

#[test]
fn mwbm_ratio_within_three_plus_eps() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5 {
        let seed = seed.to_string();
        msbm(&["gen", "linear", "--edges", "14", "--b-max", "3", "--seed", &seed, "--out", "l"], dir.path());
        let out = msbm(&["run", "l.msbm", "l.oracle", "mwbm", "--eps", "0.5", "--opt", "--certify"], dir.path());
        assert_eq!(out.status.code(), Some(0));
        let r = json(&out);
        assert!(r["ratio"].as_f64().unwrap() <= 3.5);
        assert_eq!(r["certificate"]["mode"], "linear");
        assert_eq!(r["memory_profile"], "non-streaming memory profile");
    }
}

#[test]
fn failed_check_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e.msbm"), "msbm 1\nn 2\nb uniform 1\nm 1\ne 0 1 0\n").unwrap();
    fs::write(dir.path().join("e.oracle"), "oracle linear\nw 0 5\n").unwrap();
    let args = ["run", "e.msbm", "e.oracle", "msbm", "--C", "2", "--q", "0.05", "--trials", "2000", "--certify"];
    let out = msbm(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    assert_eq!(r["certificate"]["flagged_edges"], 1);
    assert_eq!(r["trials"]["label"], "outside lemma hypothesis");
    assert_eq!(r["checks_passed"], false);
}

#[test]
fn seeded_reports_match_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    msbm(&["gen", "covlin", "--edges", "9", "--seed", "11", "--out", "g"], dir.path());
    let args = ["run", "g.msbm", "g.oracle", "msbm", "--seed", "3", "--certify", "--opt"];
    let a = without_time(json(&msbm(&args, dir.path())));
    let b = without_time(json(&msbm(&args, dir.path())));
    assert_eq!(a, b);
    let golden: Value =
        serde_json::from_str(include_str!("golden/covlin_msbm.json")).unwrap();
    assert_eq!(a, golden);
}

#[test]
fn report_keys_are_stable_across_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    msbm(&["gen", "linear", "--edges", "8", "--out", "l"], dir.path());
    let keys = |v: &Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    let base = keys(&json(&msbm(&["run", "l.msbm", "l.oracle", "msbm"], dir.path())));
    for alg in ["preemptive", "mwbm"] {
        assert_eq!(keys(&json(&msbm(&["run", "l.msbm", "l.oracle", alg], dir.path()))), base);
    }
}

const HEADER: &str = "instance,oracle,algorithm,C,q,eps,seed,flags\n";

#[test]
fn bench_rows_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    msbm(&["gen", "covlin", "--seed", "1", "--out", "n"], dir.path());
    msbm(&["gen", "linear", "--seed", "1", "--out", "l"], dir.path());
    let manifest = format!("{HEADER}n.msbm,n.oracle,msbm,nonmonotone,,,1,opt\nl.msbm,l.oracle,mwbm,,,0.5,,opt certify\n");
    fs::write(dir.path().join("m.csv"), manifest).unwrap();
    let out = msbm(&["bench", "m.csv", "--repeat", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(&out.stdout[..]);
    let header = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let kinds: Vec<&str> = rows.iter().map(|r| &r[col("kind")]).collect();
    assert_eq!(kinds, ["data", "data", "data", "aggregate", "data", "data", "data", "aggregate"]);
    let q: f64 = rows[0][col("q")].parse().unwrap();
    assert!((q - 0.2113249).abs() < 1e-7);
    assert!(rows.iter().all(|r| r[col("error")].is_empty()));
    assert!(!rows[3][col("min_ratio")].is_empty());
}

#[test]
fn bench_reports_row_errors_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    msbm(&["gen", "linear", "--seed", "1", "--out", "l"], dir.path());
    let manifest = format!("{HEADER}missing.msbm,l.oracle,msbm,,,,,\nl.msbm,l.oracle,msbm,,,,,\n");
    fs::write(dir.path().join("m.csv"), manifest).unwrap();
    let out = msbm(&["bench", "m.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let mut reader = csv::Reader::from_reader(&out.stdout[..]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].iter().next_back().unwrap().contains("missing.msbm"));
    assert!(rows[2].iter().next_back().unwrap().is_empty());
}

#[test]
fn empty_manifest_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.csv"), HEADER).unwrap();
    let out = msbm(&["bench", "m.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("kind,row,repeat,"));
}
