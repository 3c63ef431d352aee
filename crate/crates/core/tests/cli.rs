use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qid(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qid"))
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn meta(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap()
}

#[test]
fn example_one_reports_alternating_trace() {
    let tmp = TempDir::new().unwrap();
    let out = qid(tmp.path(), &["example", "--id", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let report = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(report.contains("weak convergence to 0: refuted"));
    assert!(report.contains("basic convergence to 0: confirmed"));
    assert!(report.contains("1:-2.000000e0 2:2.000000e0 4:2.000000e0"));
    let trace = fs::read_to_string(tmp.path().join("weak_h_cos_1_x.csv")).unwrap();
    assert!(trace.starts_with("n,statistic\n1,-2\n2,2\n"));
}

#[test]
fn every_example_matches() {
    for id in ["2", "3", "4"] {
        let tmp = TempDir::new().unwrap();
        let out = qid(tmp.path(), &["example", "--id", id]);
        assert_eq!(out.status.code(), Some(0), "example {id}");
        let report = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
        assert!(report.contains("matches the expected classification: yes"));
    }
}

#[test]
fn lemma_identity_passes() {
    let tmp = TempDir::new().unwrap();
    let out = qid(tmp.path(), &["lemma1", "--t", "1", "--tau", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("lemma1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,residual"));
    let residuals: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(residuals.len(), 401);
    assert!(residuals.iter().all(|&r| r < 1e-6));
}

#[test]
fn empty_scenario_is_a_parse_error() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("empty.toml");
    fs::write(&path, "").unwrap();
    let out = qid(&tmp.path().join("out"), &["transform", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("empty scenario"), "{err}");
}

#[test]
fn parse_errors_name_line_and_field() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "family = \"example1\"\nindices = [1, 2]\ncolour = 3\n").unwrap();
    let out = qid(&tmp.path().join("out"), &["transform", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("colour"), "{err}");

    fs::write(&path, "family = \"example1\"\nindices = [1, 4, 2]\n").unwrap();
    let out = qid(&tmp.path().join("out"), &["transform", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("indices"));

    fs::write(&path, "family = \"example9\"\nindices = [1]\n").unwrap();
    let out = qid(&tmp.path().join("out"), &["transform", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("example9"));
}

#[test]
fn invalid_grid_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = qid(tmp.path(), &["--t-min", "1", "example", "--id", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identical_config_gives_identical_csv() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--seed", "11", "--t-step", "0.05", "theorem", "--id", "6"];
    assert_eq!(qid(a.path(), &args).status.code(), qid(b.path(), &args).status.code());
    let (ca, cb) = (csvs(a.path()), csvs(b.path()));
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);
    let c = TempDir::new().unwrap();
    qid(c.path(), &["--seed", "12", "--t-step", "0.05", "theorem", "--id", "6"]);
    assert_ne!(csvs(c.path()), ca);
}

#[test]
fn exit_status_matches_verdict() {
    let cases: [(&[&str], i32, &str); 3] = [
        (&["theorem", "--id", "8"], 0, "confirmed"),
        (&["theorem", "--id", "10", "--gamma-offset", "0.1"], 2, "refuted"),
        (&["theorem", "--id", "5"], 0, "confirmed"),
    ];
    for (args, code, verdict) in cases {
        let tmp = TempDir::new().unwrap();
        let out = qid(tmp.path(), args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let m = meta(tmp.path());
        assert_eq!(m["exit_status"], code);
        assert_eq!(m["verdicts"][0][1], verdict);
    }
}

#[test]
fn scenario_commands_write_transform_csv() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("s.toml");
    fs::write(
        &path,
        "schema_version = 1\nfamily = \"custom\"\nindices = [1]\n\n[[explicit]]\ngamma = 0.5\natoms = [[1.0, 0.3]]\nsegments = [[-1.0, 0.0, 0.22]]\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    for (cmd, file) in [("cf-eval", "cf.csv"), ("transform", "transform.csv"), ("recover", "recovered_transform.csv")] {
        let out_dir = tmp.path().join(cmd);
        let out = qid(&out_dir, &["--t-min", "-2", "--t-max", "2", "--t-step", "0.5", cmd, p]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let csv = fs::read_to_string(out_dir.join(file)).unwrap();
        assert!(csv.starts_with("n,t,re,im\n"), "{cmd}");
        assert!(!csv.contains('\r'));
    }
    let out = qid(&tmp.path().join("d"), &["diagnose", p, "--check", "qid-bnp"]);
    let m = meta(&tmp.path().join("d"));
    assert_eq!(out.status.code().unwrap() as i64, m["exit_status"].as_i64().unwrap());
}

#[test]
fn output_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_qid"))
        .env("QID_OUTPUT_DIR", &dir)
        .args(["lemma1", "--t", "0.5", "--tau", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("report.txt").exists());
}
