use std::path::PathBuf;
use std::process::{Command, Output};

use subfactor_core::specfile::InclusionSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subfactor-lab"))
}

fn catalog_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../catalog").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

#[test]
fn markov_c2_json() {
    let out = run(&["markov", catalog_file("c2.spec").to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let tau = v["suites"][0]["values"]["tau"].as_f64().unwrap();
    assert!((tau - 0.5).abs() < 1e-12);
    assert_eq!(v["suites"][0]["suite"], "markov");
    assert_eq!(v["passed"], true);
}

#[test]
fn markov_c1_plain() {
    let out = run(&["markov", "C1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("τ    = 0.25"), "{text}");
}

#[test]
fn malformed_row_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.spec");
    std::fs::write(&p, "name = X\ndims_N = 1 1\ndims_M = 1 2\nG = 1 1\nG = 0 1 1\n").unwrap();
    let out = run(&["markov", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 5") && err.contains("G row 2"), "{err}");
}

#[test]
fn tower_dimensions() {
    let out = run(&["tower", "C2", "--depth", "3", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let vals = &v["suites"][0]["values"];
    let dims: Vec<u64> = (0..=3).map(|k| vals[format!("dim_level_{k}")].as_f64().unwrap() as u64).collect();
    assert_eq!(dims, vec![4, 8, 16, 32]);
    assert_eq!(vals["dim_level_-1"].as_f64().unwrap(), 2.0);

    let out = run(&["tower", "C1", "--depth", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split_whitespace().collect()).collect();
    for want in [["0", "4"], ["1", "16"], ["2", "64"]] {
        assert!(rows.iter().any(|r| r.len() >= 2 && r[..2] == want), "{text}");
    }
}

#[test]
fn depth_beyond_cap_is_refused() {
    let out = run(&["tower", "C1", "--depth", "12"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("refused") && err.contains("largest admissible depth"), "{err}");
}

#[test]
fn verify_thm22_passes() {
    let out = run(&["verify", "C2", "thm2.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn verify_c3_all_passes() {
    let out = run(&["verify", catalog_file("c3.spec").to_str().unwrap(), "all", "--json"]);
    let v = json(&out);
    assert_eq!(out.status.code(), Some(0), "{v:#}");
    assert_eq!(v["suites"].as_array().unwrap().len(), subfactor_core::suites::SUITES.len());
}

#[test]
fn unknown_suite_lists_valid_ones() {
    let out = run(&["verify", "C2", "thm9.9"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("valid suites") && err.contains("cor2.9") && err.contains("eq3.4"), "{err}");
}

#[test]
fn zero_tolerance_reports_failure() {
    let out = run(&["verify", "C3", "lem2.1", "--tol", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_are_deterministic() {
    let strip = |mut v: serde_json::Value| {
        v["wall_time_ms"] = serde_json::Value::Null;
        for s in v["suites"].as_array_mut().unwrap() {
            s["wall_time_ms"] = serde_json::Value::Null;
        }
        v
    };
    let a = strip(json(&run(&["basis", "C3", "--seed", "7", "--json"])));
    let b = strip(json(&run(&["basis", "C3", "--seed", "7", "--json"])));
    assert_eq!(a, b);
}

#[test]
fn extend_given_automorphism() {
    let out = run(&["extend-aut", catalog_file("c2_swap.spec").to_str().unwrap(), "--json"]);
    let v = json(&out);
    assert_eq!(out.status.code(), Some(0), "{v:#}");
    let out = run(&["extend-aut", catalog_file("c3_phase.spec").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn multistep_c2() {
    let out = run(&["multistep", "C2", "--json"]);
    let v = json(&out);
    assert_eq!(out.status.code(), Some(0), "{v:#}");
}

#[test]
fn missing_file_is_an_input_error() {
    assert_eq!(run(&["markov", "/nonexistent/x.spec"]).status.code(), Some(2));
}

#[test]
fn catalog_files_round_trip() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../catalog");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "spec") {
            let s = InclusionSpec::read(&p).unwrap();
            assert_eq!(InclusionSpec::parse(&s.to_string()).unwrap(), s, "{}", p.display());
            count += 1;
        }
    }
    assert!(count >= 4);
}
