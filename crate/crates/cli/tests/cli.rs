use std::path::Path;
use std::process::{Command, Output};

fn lftcam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lftcam")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_detect_calibrate_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let out = lftcam(&["simulate", "--out", p(&data), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = data.join("manifest.json");
    let m = json(&manifest);
    assert_eq!(m["views"].as_array().unwrap().len(), 22);
    assert!(data.join("view_000.pgm").is_file() && data.join("scene.json").is_file());

    let out = lftcam(&["detect", "--manifest", p(&manifest), "--out", p(d)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let features = d.join("features.csv");

    let out = lftcam(&["calibrate", "--manifest", p(&manifest), "--features", p(&features), "--out", p(d)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cal = json(&d.join("calibration.json"));
    let f = cal["F_mm"].as_f64().unwrap();
    let truth = m["ground_truth"]["camera"]["F_mm"].as_f64().unwrap();
    assert!((f - truth).abs() / truth < 5e-3, "F {f} vs {truth}");
    assert_eq!(cal["per_view"].as_array().unwrap().len(), 12);

    let report = d.join("calibration.json");
    let out = lftcam(&["evaluate", "--manifest", p(&manifest), "--report", p(&report), "--out", p(d)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ev = json(&d.join("evaluation.json"));
    assert!(ev["epsilon_z_mean"].as_f64().unwrap() < 0.01);
    let eps = std::fs::read_to_string(d.join("epsilon_z.csv")).unwrap();
    assert_eq!(eps.lines().count(), 11);
    assert!(d.join("alpha_depth.csv").is_file());
}

#[test]
fn bench_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = lftcam(&["bench", "--out", p(dir.path()), "--images", "2", "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b = json(&dir.path().join("bench.json"));
    assert_eq!(b["threads"], 1);
    assert!(dir.path().join("bench.csv").is_file());
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(lftcam(&["calibrate", "--manifest", p(&d.join("none.json")), "--out", p(d)]).status.code(), Some(2));
    let bad = d.join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(lftcam(&["simulate", "--config", p(&bad), "--out", p(d)]).status.code(), Some(2));
    assert_eq!(lftcam(&["simulate", "--out", p(d), "--noise-sensor", "-1"]).status.code(), Some(2));
    assert_eq!(lftcam(&["bench", "--out", p(d), "--threads", "0"]).status.code(), Some(2));
    assert_eq!(lftcam(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn calibration_without_features_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    assert!(lftcam(&["simulate", "--out", p(&data)]).status.success());
    let empty = d.join("empty.csv");
    std::fs::write(&empty, "view_id,lens_i,lens_j,u_px,v_px,n_intersections\n").unwrap();
    let manifest = data.join("manifest.json");
    let out = lftcam(&["calibrate", "--manifest", p(&manifest), "--features", p(&empty), "--out", p(d)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
