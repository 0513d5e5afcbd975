use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn ecm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--output", "json"];
    full.extend_from_slice(args);
    let out = ecm(&full);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let value = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("{e}: {stdout}"));
    (out.status.code().unwrap(), value)
}

fn values(report: &Value, item: usize) -> Vec<(String, f64)> {
    report["items"][item]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| (v["name"].as_str().unwrap().to_owned(), v["value"].as_f64().unwrap()))
        .collect()
}

fn get(report: &Value, item: usize, name: &str) -> f64 {
    values(report, item)
        .into_iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("no value `{name}` in item {item}"))
        .1
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn predict_triad() {
    let (code, r) = json(&["predict", "triad"]);
    assert_eq!(code, 0);
    assert_eq!(get(&r, 0, "t_l1"), 2.0);
    assert_eq!(get(&r, 0, "t_l2"), 6.0);
    assert!(close(get(&r, 0, "t_mem"), 7.6, 0.1));
}

#[test]
fn predict_stencil_with_violated_l1_layer_condition() {
    let (code, r) = json(&["predict", "2d5pt", "--lc", "violated-l1"]);
    assert_eq!(code, 0);
    assert!(close(get(&r, 0, "t_l1"), 3.5, 1e-9));
    assert!(close(get(&r, 0, "t_l2"), 8.5, 1e-9));
    assert!(close(get(&r, 0, "t_mem"), 9.6, 0.1));
}

#[test]
fn inner_dim_selects_layer_condition() {
    let (_, small) = json(&["predict", "2d5pt", "--inner-dim", "100"]);
    let (_, huge) = json(&["predict", "2d5pt", "--inner-dim", "100000000"]);
    assert_eq!(get(&small, 0, "t_l2"), 6.5);
    assert!(get(&huge, 0, "t_mem") > get(&small, 0, "t_mem"));
}

#[test]
fn predict_sum_without_unrolling_is_latency_bound() {
    let (_, r) = json(&["predict", "sum", "--unroll", "1", "--level", "l1"]);
    assert_eq!(get(&r, 0, "t_l1"), 9.0);
    assert_eq!(values(&r, 0).len(), 1);
}

#[test]
fn predict_overlap_hypotheses_are_ordered() {
    let (_, r) = json(&["predict", "copy", "--overlap", "all"]);
    let partial = get(&r, 0, "t_mem");
    let none = get(&r, 1, "t_mem");
    let full = get(&r, 2, "t_mem");
    assert!(full <= partial && partial <= none);
}

#[test]
fn reference_deviation_is_flagged() {
    let (_, r) = json(&["predict", "dot"]);
    let t_l1 = &r["items"][0]["values"][0];
    assert_eq!(t_l1["reference"], 1.7);
    assert_eq!(t_l1["flagged"], true);
    let t_mem = &r["items"][0]["values"][2];
    assert_eq!(t_mem["flagged"], false);
}

#[test]
fn triad_saturates_at_four_cores() {
    let (code, r) = json(&["scaling", "triad"]);
    assert_eq!(code, 0);
    assert_eq!(get(&r, 0, "saturation_cores"), 4.0);
    // Summary plus one item per core count.
    assert_eq!(r["items"].as_array().unwrap().len(), 13);
    let bw4 = get(&r, 4, "bandwidth");
    let bw12 = get(&r, 12, "bandwidth");
    assert_eq!(bw4, bw12);
}

#[test]
fn sum_without_unrolling_does_not_saturate_a_domain() {
    let (_, r) = json(&["scaling", "sum", "--unroll", "1"]);
    assert!(get(&r, 0, "saturation_cores") > 12.0);
    let perf: Vec<f64> = (1..=12).map(|i| get(&r, i, "performance")).collect();
    assert!(perf.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn spmv_hpcg_check_passes() {
    let (code, r) = json(&["spmv", "--hpcg", "8", "--check", "--threads", "3"]);
    assert_eq!(code, 0);
    let items = r["items"].as_array().unwrap();
    assert_eq!(items.last().unwrap()["status"], "PASS");
    assert_eq!(get(&r, 0, "rows"), 512.0);
}

#[test]
fn spmv_auto_sigma_meets_padding_bound() {
    let (code, r) = json(&["spmv", "--hpcg", "16", "--sigma", "auto"]);
    assert_eq!(code, 0);
    assert!(get(&r, 1, "overhead") <= 5.0);
    let sigma = get(&r, 1, "sigma") as usize;
    assert!(sigma.is_power_of_two() && sigma <= 1024);
}

#[test]
fn spmv_random_is_reproducible() {
    let args = ["spmv", "--random", "200", "--density", "0.05", "--seed", "42", "--format", "crs", "--check"];
    let (code, a) = json(&args);
    let (_, b) = json(&args);
    assert_eq!(code, 0);
    assert_eq!(a, b);
    let (_, c) = json(&["spmv", "--random", "200", "--density", "0.05", "--seed", "43", "--format", "crs"]);
    assert_ne!(a["items"][0], c["items"][0]);
}

#[test]
fn spmv_reads_matrix_market() {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli_small.mtx");
    std::fs::write(
        &path,
        "%%MatrixMarket matrix coordinate real general\n3 3 4\n1 1 2.0\n2 2 3.0\n3 1 1.0\n3 3 4.0\n",
    )
    .unwrap();
    // C = 1 cannot hold one vector of eight lanes.
    let out = ecm(&["spmv", "--matrix", path.to_str().unwrap(), "-C", "1", "--unroll", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chunk height"));
    let out = ecm(&["spmv", "--matrix", path.to_str().unwrap(), "--format", "crs", "--check"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("nnz        4"));
}

#[test]
fn validate_passes_for_builtin_machine() {
    let (code, r) = json(&["validate"]);
    assert_eq!(code, 0);
    assert!(r["items"].as_array().unwrap().iter().all(|i| i["status"] == "PASS"));
}

#[test]
fn validate_fails_for_perturbed_machine() {
    let out = ecm(&["machine"]);
    let mut m: Value = serde_json::from_slice(&out.stdout).unwrap();
    m["l2_load_bw"] = Value::from(48.0);
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli_perturbed.json");
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let out = ecm(&["validate", "--machine", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
}

#[test]
fn text_output_contains_every_json_number() {
    let (_, r) = json(&["predict", "triad"]);
    let text = String::from_utf8(ecm(&["predict", "triad"]).stdout).unwrap();
    for (name, v) in values(&r, 0) {
        let shown = format!("{:.4}", v);
        let shown = shown.trim_end_matches('0').trim_end_matches('.');
        assert!(text.contains(&name) && text.contains(shown), "{name} {shown}\n{text}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["predict"][..],
        &["predict", "nope"],
        &["predict", "triad", "--lc", "violated"],
        &["predict", "2d5pt", "--lc", "sideways"],
        &["predict", "sum", "--unroll", "0"],
        &["spmv"],
        &["spmv", "--random", "10"],
        &["spmv", "--hpcg", "4", "--sigma", "x"],
        &["--output", "yaml", "validate"],
        &["machine", "--machine", "/nonexistent/machine.json"],
    ] {
        assert_eq!(ecm(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn machine_dump_round_trips() {
    let out = ecm(&["machine"]);
    assert_eq!(out.status.code(), Some(0));
    let m: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["name"], "a64fx-fx700");
    assert_eq!(m["vector_length_doubles"], 8);
}
