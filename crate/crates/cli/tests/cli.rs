use std::path::Path;
use std::process::{Command, Output};

fn rangeloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rangeloc")).args(args).output().expect("spawn rangeloc")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn generate_validate_and_solve() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("s.json");
    let out = rangeloc(&["generate", "-n", "6", "--range", "0.8", "--anchors", "corner", "--gamma", "0.05", "--seed", "3", "--out", path(&scen)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = rangeloc(&["validate", path(&scen)]);
    assert_eq!(out.status.code(), Some(0));

    let est = dir.path().join("c.json");
    let out = rangeloc(&["solve-central", path(&scen), "--out", path(&est)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&est).unwrap()).unwrap();
    assert!(v["worst_case_value"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["positions"].as_object().unwrap().len(), 6);

    let trace = dir.path().join("t.jsonl");
    let out = rangeloc(&["solve-dist", path(&scen), "--epsilon", "1e-6", "--max-rounds", "20", "--out", path(&trace)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["round"], 0);
    for key in ["id", "x", "y", "radius_sq", "localized"] {
        assert!(first["per_node"][0].get(key).is_some(), "missing {key}");
    }
    assert!(first["rmse_upper_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn oracle_on_single_sensor() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("one.json");
    std::fs::write(
        &scen,
        r#"{"sensors":[0],"anchors":[{"id":1,"x":0.0,"y":0.0},{"id":2,"x":1.0,"y":0.0},{"id":3,"x":0.0,"y":1.0}],
            "true_positions":{"0":[0.3,0.4]},
            "edges":[{"a":0,"b":1,"z":0.5},{"a":0,"b":2,"z":0.806225774829855},{"a":0,"b":3,"z":0.670820393249937}],
            "gamma":0.1,"sensing_range":2.0}"#,
    )
    .unwrap();
    let out = rangeloc(&["oracle", path(&scen), "--resolution", "0.005"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["chebyshev_radius"].as_f64().unwrap() <= v["relaxed_radius"].as_f64().unwrap());
}

#[test]
fn experiment_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"scenario":{"n_sensors":4,"anchors":[{"x":-0.5,"y":-0.5},{"x":0.5,"y":-0.5},{"x":-0.5,"y":0.5},{"x":0.5,"y":0.5}],
            "sensing_range":0.9,"area":{"min":-0.5,"max":0.5}},
            "sweep":[{"kind":"uniform","gamma":0.02},{"kind":"gaussian","sigma":0.01}],
            "estimators":["central","baseline"],"trials":2,"master_seed":5}"#,
    )
    .unwrap();
    let prefix = dir.path().join("run");
    let out = rangeloc(&["experiment", path(&spec), "--out", path(&prefix)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "sweep_value,estimator,trial,rmse,worst_case_value,rounds,seconds");
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    assert!(prefix.with_extension("json").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(rangeloc(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(rangeloc(&["generate", "--gamma", "0.1", "--sigma", "0.1"]).status.code(), Some(1));
    assert_eq!(rangeloc(&["validate", "/nonexistent/scenario.json"]).status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("bad.json");
    // Anchors on a line: generation succeeds but validation rejects it.
    std::fs::write(
        &scen,
        r#"{"sensors":[0],"anchors":[{"id":1,"x":0.0,"y":0.0},{"id":2,"x":1.0,"y":0.0},{"id":3,"x":2.0,"y":0.0}],
            "true_positions":null,"edges":[{"a":0,"b":1,"z":0.5}],"gamma":0.1,"sensing_range":2.0}"#,
    )
    .unwrap();
    assert_eq!(rangeloc(&["validate", path(&scen)]).status.code(), Some(1));
}
