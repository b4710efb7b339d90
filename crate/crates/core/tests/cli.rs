use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_lpvcert");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn msd() -> String {
    data("msd_dt.json").to_string_lossy().into_owned()
}

/// Certifies the benchmark at `lambda`, writing the certificate into `dir`.
fn certify_to(dir: &Path, lambda: &str, dk: &str) -> (Output, PathBuf) {
    let cert = dir.join("cert.json");
    let o = run(&[
        "certify", &msd(), "--eps", "0", "--lambda", lambda, "--dkmax", dk, "--dcmax", "0", "--out",
        cert.to_str().unwrap(),
    ]);
    (o, cert)
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (ok, cert) = certify_to(dir.path(), "0.46", "100");
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("CERTIFIED"));
    assert!(cert.exists());

    let (no, _) = certify_to(dir.path(), "0.95", "1e-5");
    assert_eq!(code(&no), 1, "{}", stdout(&no));
    assert!(stdout(&no).contains("NOT CERTIFIED"));
}

#[test]
fn vertex_pair_and_common_variants_run() {
    let o = run(&["certify", &msd(), "--eps", "0", "--lambda", "0.3", "--method", "lemma2"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = run(&["certify", &msd(), "--eps", "0", "--lambda", "0.3", "--dkmax", "1", "--common"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("msd_dt.json")).unwrap();
    let truncated = dir.path().join("truncated.json");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    let o = run(&["certify", truncated.to_str().unwrap(), "--eps", "0"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());

    // no disturbance input: the gain command must refuse and point at certify
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["nw"] = Value::from(0);
    v["B"] = Value::Array(vec![Value::Array(vec![Value::Array(vec![]), Value::Array(vec![])]); 3]);
    v["D"] = Value::Array(vec![Value::Array(vec![Value::Array(vec![])]); 3]);
    let no_input = dir.path().join("no_input.json");
    std::fs::write(&no_input, v.to_string()).unwrap();
    let o = run(&["gain", no_input.to_str().unwrap(), "--eps", "0", "--lambda", "0.2", "--dkmax", "1"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("certify"));

    let o = run(&["sweep", &msd(), "--eps"]);
    assert_eq!(code(&o), 2);

    let (_, cert) = certify_to(dir.path(), "0.3", "1");
    let o = run(&["simulate", &msd(), cert.to_str().unwrap(), "--trials", "0"]);
    assert_eq!(code(&o), 2);

    let o = run(&["certify", &msd(), "--eps", "1.5"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_accepts_genuine_and_rejects_tampered_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let (o, cert) = certify_to(dir.path(), "0.46", "100");
    assert_eq!(code(&o), 0);
    let o = run(&["simulate", &msd(), cert.to_str().unwrap(), "--trials", "20", "--horizon", "200"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    v["rate"]["value"] = Value::from(0.3);
    let inflated = dir.path().join("inflated.json");
    std::fs::write(&inflated, v.to_string()).unwrap();
    let o = run(&["simulate", &msd(), inflated.to_str().unwrap(), "--trials", "20", "--horizon", "200"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let k1 = v["K"][1].clone();
    v["K"][1] = serde_json::to_value(
        k1.as_array()
            .unwrap()
            .iter()
            .map(|row| row.as_array().unwrap().iter().map(|x| 40.0 * x.as_f64().unwrap()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let skewed = dir.path().join("skewed.json");
    std::fs::write(&skewed, v.to_string()).unwrap();
    let o = run(&["simulate", &msd(), skewed.to_str().unwrap(), "--trials", "20", "--horizon", "200"]);
    assert_ne!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn gain_reports_gamma() {
    let o = run(&["gain", &msd(), "--eps", "0", "--lambda", "0.2", "--dkmax", "1e-5", "--dcmax", "0"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("1.644"), "{}", stdout(&o));
}

#[test]
fn sweep_csv_is_deterministic_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let csv = |name: &str, jobs: &str| {
        let path = dir.path().join(name);
        let o = run(&[
            "sweep", &msd(), "--mode", "scale", "--eps", "0,0.04", "--dk", "1e-5,1,100", "--jobs", jobs, "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(path).unwrap()
    };
    let a = csv("a.csv", "1");
    let b = csv("b.csv", "4");
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "dk_max,dc_max,eps,lambda_star,status");
    assert_eq!(lines.len(), 7);
    let eps: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(eps[..3], ["0", "0", "0"]);
}
