//! End-to-end runs of the `genbvp` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples").join(name)
}

fn genbvp(args: &[&str], input: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genbvp"))
        .args(args)
        .arg("--input")
        .arg(input)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|x| x.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

/// Composite Simpson rule on an odd number of equally spaced samples.
fn simpson(h: f64, v: &[f64]) -> f64 {
    assert!(v.len() % 2 == 1);
    let n = v.len() - 1;
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * v[i]).sum();
    h / 3.0 * (v[0] + inner + v[n])
}

#[test]
fn solve_dirichlet_samples_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = genbvp(&["solve", "--grid", "101"], &example("dirichlet.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("solution.csv"));
    assert_eq!(&header[..3], ["t", "y0_d0_re", "y0_d0_im"]);
    assert_eq!(rows.len(), 101);
    for row in &rows {
        assert!((row[1] - row[0]).abs() < 1e-10, "{row:?}");
        assert!((row[3] - 1.0).abs() < 1e-10);
    }
    let sol = read_json(&dir.path().join("solution.json"));
    assert!(sol["residual_boundary"].as_f64().unwrap() < 1e-10);
    assert!(sol["y"].is_object());
}

#[test]
fn analyze_sine_then_solve_is_singular() {
    let dir = tempfile::tempdir().unwrap();
    let out = genbvp(&["analyze"], &example("sine.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&dir.path().join("analysis.json"));
    assert_eq!(report["char_matrix"]["dim_ker"], 1);
    assert_eq!(report["char_matrix"]["dim_coker"], 1);
    assert_eq!(report["well_posed"], false);
    let out = genbvp(&["solve"], &example("sine.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["kind"], "SingularProblem");
    assert_eq!(read_json(&dir.path().join("error.json"))["exit_code"], 2);
}

#[test]
fn malformed_configs_exit_3_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"problem\": {\n    \"r\": 2,,\n  }\n}\n").unwrap();
    let out = genbvp(&["solve"], &bad, &dir.path().join("o1"));
    assert_eq!(out.status.code(), Some(3));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["line"], 3);

    let text = std::fs::read_to_string(example("dirichlet.json")).unwrap().replace("\"r\": 2", "\"r\": \"two\"");
    std::fs::write(&bad, text).unwrap();
    let out = genbvp(&["solve"], &bad, &dir.path().join("o2"));
    assert_eq!(out.status.code(), Some(3));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["path"], "problem.r");

    let out = genbvp(&["sweep"], &example("dirichlet.json"), &dir.path().join("o3"));
    assert_eq!(out.status.code(), Some(3));
    let out = genbvp(&["solve", "--tol", "-1"], &example("dirichlet.json"), &dir.path().join("o4"));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_writes_table_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = genbvp(&["sweep", "--jobs", "2"], &example("family.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("label,distance,d_tilde,solution_error,ratio\n"));
    assert_eq!(text.lines().count(), 5);
    let verdict = read_json(&dir.path().join("verdict.json"));
    for key in ["condition0", "limitI", "limitII", "a", "b", "c", "d", "strong", "uniform"] {
        assert!(verdict[key].is_boolean(), "{key}");
    }
    assert_eq!(verdict["condition0"], true);
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(genbvp(&["approximate", "--seed", "5", "--jobs", "1"], &example("fractional.json"), &a).status.code(), Some(0));
    assert_eq!(genbvp(&["approximate", "--seed", "5", "--jobs", "3"], &example("fractional.json"), &b).status.code(), Some(0));
    for f in ["convergence.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let mut r = csv::Reader::from_path(a.join("convergence.csv")).unwrap();
    assert_eq!(&r.headers().unwrap()[0], "k");
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|row| &row[row.len() - 1] == "true"));
}

#[test]
fn csv_round_trip_reproduces_sobolev_norm() {
    let dir = tempfile::tempdir().unwrap();
    let out = genbvp(&["solve"], &example("fractional.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reported = read_json(&dir.path().join("solution.json"))["sobolev_norm"].as_f64().unwrap();
    let (header, rows) = read_csv(&dir.path().join("solution.csv"));
    let h = rows[1][0] - rows[0][0];
    // columns come in (re, im) pairs after t, one pair per derivative
    let mut norm = 0.0;
    for pair in (1..header.len()).step_by(2) {
        let sq: Vec<f64> = rows.iter().map(|r| r[pair] * r[pair] + r[pair + 1] * r[pair + 1]).collect();
        norm += simpson(h, &sq).sqrt();
    }
    assert!((norm - reported).abs() <= 1e-6, "{norm} vs {reported}");
}
