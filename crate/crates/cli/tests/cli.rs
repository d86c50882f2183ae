use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const COVID_QUERY: &str = "P(COVID-19=no | Antigen=pos & PCR=pos) <= 0.009";

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn bntune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bntune")).args(args).output().expect("binary runs")
}

fn covid(sub: &str, extra: &[&str]) -> Output {
    let net = models().join("covid.bn");
    let params = models().join("covid-params.toml");
    let mut args = vec![sub, "--network", net.to_str().unwrap(), "--params", params.to_str().unwrap()];
    args.extend_from_slice(extra);
    bntune(&args)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad JSON ({e}): {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn without_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings_ms");
    v
}

#[test]
fn infer_reports_baseline() {
    let out = covid("infer", &["--constraint", COVID_QUERY]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let p = v["probability"].as_f64().unwrap();
    assert!((p - 0.011089).abs() < 1e-5);
    assert_eq!(v["satisfied"], Value::Bool(false));
}

#[test]
fn tune_output_is_deterministic_and_round_trips() {
    let a = covid("tune", &["--constraint", COVID_QUERY]);
    let b = covid("tune", &["--constraint", COVID_QUERY, "--threads", "1"]);
    assert_eq!(a.status.code(), Some(0));
    let (va, vb) = (json(&a), json(&b));
    assert_eq!(va["status"], "Tuned");
    assert_eq!(
        serde_json::to_string(&without_timings(va.clone())).unwrap(),
        serde_json::to_string(&without_timings(vb)).unwrap()
    );
    let keys: Vec<&String> = va.as_object().unwrap().keys().collect();
    assert_eq!(keys.last().unwrap().as_str(), "timings_ms");

    let at: Vec<String> = va["instantiation"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, x)| format!("{k}={}", x))
        .collect();
    let check = covid("infer", &["--constraint", COVID_QUERY, "--at", &at.join(",")]);
    let vc = json(&check);
    assert_eq!(vc["satisfied"], Value::Bool(true));
    assert_eq!(vc["probability"], va["probability"]);
}

#[test]
fn verify_toy_region_accepts() {
    let net = models().join("toy.bn");
    let params = models().join("toy-params.toml");
    let out = bntune(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--params",
        params.to_str().unwrap(),
        "--constraint",
        "P(Coin=heads) <= 0.7",
        "--region",
        "x=0.2:0.6",
        "--self-check",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], "Accepting");
    assert_eq!(v["self_check"]["violations"], 0);
}

#[test]
fn infeasible_exits_with_two() {
    let out = covid("tune", &["--constraint", "P(COVID-19=no | Antigen=pos & PCR=pos) <= 0.005", "--eta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "Infeasible");
}

#[test]
fn compile_emits_dot_and_counts() {
    let dir = std::env::temp_dir().join(format!("bntune-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let dot = dir.join("chain.dot");
    let out = covid("compile", &["--constraint", COVID_QUERY, "--emit-dot", dot.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["states"], 11);
    assert_eq!(v["targets"], serde_json::json!([10]));
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph"));
}

#[test]
fn partition_writes_csv() {
    let dir = std::env::temp_dir().join(format!("bntune-part-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("boxes.csv");
    let out = covid("partition", &["--constraint", COVID_QUERY, "--eta", "0.9", "--emit-boxes", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["coverage"].as_f64().unwrap() >= 0.9);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("verdict,p_lb,p_ub,q_lb,q_ub\n"));
    let rows = text.lines().count() - 1;
    let counted: u64 = ["accepting", "rejecting", "unknown"].iter().map(|k| v["boxes"][k].as_u64().unwrap()).sum();
    assert_eq!(rows as u64, counted);
}

#[test]
fn malformed_input_is_diagnosed() {
    let out = covid("infer", &["--constraint", "P(COVID-19=maybe) <= 0.1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(out.stdout.is_empty());

    let out = bntune(&["infer", "--network", "/nonexistent.bn", "--constraint", "P(A=a) <= 1"]);
    assert_eq!(out.status.code(), Some(1));
}
