use std::path::Path as FsPath;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sigcde"));
    c.env("RUST_LOG", "warn");
    c
}

fn write(dir: &FsPath, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn sig_of_axis_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "l.json", r#"{"grid_steps":2,"channels":2,"values":[0,0,1,0,1,1]}"#);
    let out = bin().args(["sig", "--depth", "2", "--path"]).arg(&p).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // 1, then (1, 1), then (1/2, 1, 0, 1/2)
    assert_eq!(v["coeffs"], serde_json::json!([1.0, 1.0, 1.0, 0.5, 1.0, 0.0, 0.5]));
    let out = bin().args(["sig", "--depth", "1", "--interval", "0", "0.5", "--path"]).arg(&p).output().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["coeffs"], serde_json::json!([1.0, 1.0, 0.0]));
}

#[test]
fn gen_data_then_train() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    let st = bin()
        .args(["gen-data", "--dim", "2", "--samples", "60", "--steps", "10", "--seed", "4", "--out"])
        .arg(&data)
        .status()
        .unwrap();
    assert!(st.success());
    let cfg = write(
        dir.path(),
        "train.json",
        r#"{"dataset":{"file":"data.json"},"run":{"model":"s5","hidden":4,"state":4,"steps":10,"log_every":5}}"#,
    );
    let curves = dir.path().join("c.csv");
    let out = bin().args(["train", "--config"]).arg(&cfg).arg("--curves").arg(&curves).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec["status"], "completed");
    assert_eq!(rec["losses"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(&curves).unwrap();
    assert!(csv.starts_with("model,step,train_mse,test_mse\ns5,5,"));
}

#[test]
fn suite_empty_manifest_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.json", "{}");
    let out_dir = dir.path().join("out");
    let st = bin().args(["suite", "--manifest"]).arg(&empty).arg("--out").arg(&out_dir).status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out_dir.join("results.jsonl")).unwrap(), "");
    assert_eq!(std::fs::read_to_string(out_dir.join("curves.csv")).unwrap(), "model,step,train_mse,test_mse\n");

    let failing = write(
        dir.path(),
        "fail.json",
        r#"{"dataset":{"generate":{"num_samples":50,"dim":2,"num_steps":10,"seed":1}},
            "runs":[{"model":"linear-ncde","hidden":8}],
            "thresholds":[{"kind":"max_relative_mse","run":"linear-ncde","value":-1.0}]}"#,
    );
    let out = bin().args(["suite", "--manifest"]).arg(&failing).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL"));

    let missing = write(dir.path(), "missing.json", r#"{"dataset":{"file":"nope.json"},"runs":[{"model":"s5"}]}"#);
    let out = bin().args(["suite", "--manifest"]).arg(&missing).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dataset resource"));
}

#[test]
fn solve_and_kernel() {
    let dir = tempfile::tempdir().unwrap();
    // dZ = -Z dω + dξ with a one-dimensional state
    let params = write(
        dir.path(),
        "p.json",
        r#"{"kind":"diagonal","v_mat":{"rows":1,"cols":1,"data":[-1.0]},"b":{"rows":1,"cols":1,"data":[1.0]},
            "c":{"rows":1,"cols":1,"data":[1.0]},"v":[2.0]}"#,
    );
    let path = write(dir.path(), "w.json", r#"{"grid_steps":1,"channels":1,"values":[0,1]}"#);
    let out = bin().args(["solve", "--model", "diagonal", "--x0", "1", "--params"]).arg(&params).arg("--omega").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // z(1) = e^{-1} + (1 - e^{-1}) = 1
    let z1 = v["values"][1].as_f64().unwrap();
    assert!((z1 - 1.0).abs() < 1e-14);
    assert!((v["readout"][1].as_f64().unwrap() - 2.0).abs() < 1e-14);
    let bin_out = dir.path().join("z.bin");
    let st = bin().args(["solve", "--model", "diagonal", "--x0", "1", "--params"]).arg(&params).arg("--omega").arg(&path).arg("--out").arg(&bin_out).status().unwrap();
    assert!(st.success());
    assert_eq!(std::fs::read(&bin_out).unwrap().len(), 16 + 16);
    let wrong = bin().args(["solve", "--model", "dense", "--params"]).arg(&params).arg("--omega").arg(&path).output().unwrap();
    assert_eq!(wrong.status.code(), Some(2));

    // ω = ξ = t/2 on both sides: ∂s∂t K = (K + 1)/4 with K = 1 on the axes,
    // so K(1,1) = 2 Σ 4^{-k} / k!^2 - 1
    let pair = write(
        dir.path(),
        "pair.json",
        r#"{"x":{"grid_steps":1,"channels":1,"values":[0,0.5]},"y":{"grid_steps":1,"channels":1,"values":[0,0.5]},"refinement":64}"#,
    );
    let out = bin().args(["kernel", "--pair"]).arg(&pair).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let mut want = -1.0;
    let mut fact2 = 1.0;
    for k in 0..30 {
        if k > 0 {
            fact2 *= (k * k) as f64;
        }
        want += 2.0 * 0.25f64.powi(k) / fact2;
    }
    let k = v["kernel"].as_f64().unwrap();
    assert!((k - want).abs() < 1e-4, "{k} vs {want}");
}
