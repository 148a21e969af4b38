use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn stellar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stellar"))
        .args(args)
        .env_remove("STELLAR_THREADS")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = stellar(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn values(doc: &Value) -> Vec<f64> {
    doc["result"]["profile"]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn profiles_of_fock_states() {
    let f = 3.0 * 3.0f64.sqrt() / (4.0 * std::f64::consts::E);
    let one = values(&ok_json(&["profile", "--fock", "1", "--seed", "1"]));
    assert_eq!(one.len(), 2);
    assert!((one[0] - f).abs() < 1e-3 && one[1] == 1.0);
    let vac = values(&ok_json(&["profile", "--fock", "0", "--seed", "1"]));
    assert_eq!(vac, vec![1.0]);
    let two = values(&ok_json(&["profile", "--spec", "fock:2", "--seed", "1"]));
    assert!((two[0] - 0.38).abs() < 0.01 && two[0] < two[1] && two[2] == 1.0, "{two:?}");
}

#[test]
fn profile_output_is_reproducible_and_echoes_config() {
    let args = ["profile", "--cat", "1.5", "--parity", "odd", "--seed", "9", "--n-max", "3", "--starts", "8"];
    let a = stellar(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_stellar"))
        .args(args)
        .env("STELLAR_THREADS", "4")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout, "byte-identical across runs and thread counts");
    let doc: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["config"]["optimizer"]["seed"], 9);
    assert_eq!(doc["config"]["optimizer"]["starts"], 8);
    assert_eq!(doc["config"]["n_max"], 3);
    assert!(doc["version"].is_string());
}

#[test]
fn profile_requires_a_seed() {
    let out = stellar(&["profile", "--fock", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_and_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("p");
    let out = stellar(&["profile", "--fock", "1", "--seed", "1", "--format", "both", "--out", stem.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert!(csv.starts_with("n,f_star\n0,"), "{csv}");
    assert!(stem.with_extension("json").exists());
    let no_out = stellar(&["profile", "--fock", "1", "--seed", "1", "--format", "both"]);
    assert_eq!(no_out.status.code(), Some(2));
}

#[test]
fn state_files_round_trip_into_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cat.json");
    let out = stellar(&["state", "--cat", "3", "--parity", "odd", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let doc = read_json(&path);
    assert_eq!(doc["result"]["spec"]["family"], "cat");
    assert_eq!(doc["result"]["declared_rank"], "infinite");
    let from_file = values(&ok_json(&["profile", "--spec", path.to_str().unwrap(), "--seed", "4", "--n-max", "1"]));
    let direct = values(&ok_json(&["profile", "--spec", "cat:3:odd", "--seed", "4", "--n-max", "1"]));
    assert_eq!(from_file, direct);

    // A bare amplitude file works too.
    let raw = dir.path().join("raw.json");
    std::fs::write(&raw, r#"{"modes":1,"cutoff":2,"amps":[[0.0,0.0],[1.0,0.0],[0.0,0.0]]}"#).unwrap();
    let v = values(&ok_json(&["profile", "--spec", raw.to_str().unwrap(), "--seed", "1", "--n-max", "1"]));
    assert!((v[0] - 0.4778).abs() < 1e-3);
}

#[test]
fn gkp_state_has_expected_size() {
    let doc = ok_json(&["state", "--gkp", "0.1"]);
    let n = doc["result"]["mean_photon_number"].as_f64().unwrap();
    assert!((n - 49.5).abs() < 1.0, "{n}");
}

#[test]
fn two_photon_to_photon_pair_region() {
    let doc = ok_json(&["nogo", "--input", "fock:2", "--target", "fock:1,1", "--seed", "1"]);
    let rects = doc["result"]["region"]["rectangles"].as_array().unwrap();
    assert_eq!(rects.len(), 1);
    assert_eq!(rects[0]["n"], 0);
    let d = rects[0]["delta_lt"].as_f64().unwrap();
    assert!((d - 0.13).abs() < 0.02, "{d}");
    assert!(doc["result"]["profiles"]["input"]["values"].is_array());

    let csv = stellar(&["nogo", "--input", "fock:2", "--target", "fock:1,1", "--seed", "1", "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("p,delta\n"), "{text}");
}

#[test]
fn identical_states_give_empty_regions() {
    let doc = ok_json(&["nogo", "--input", "cat:1:odd", "--target", "cat:1:odd", "--seed", "3", "--n-max", "3"]);
    assert!(doc["result"]["region"]["rectangles"].as_array().unwrap().is_empty());
    assert!(doc["result"]["region"]["boundary"].as_array().unwrap().is_empty());
}

#[test]
fn subadditive_regions_shrink_with_copies() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("target.json");
    let input = dir.path().join("input.json");
    let s = |a: &[&str]| assert!(stellar(a).status.success(), "{a:?}");
    s(&["profile", "--spec", "cat:2:odd", "--seed", "2", "--n-max", "6", "--out", target.to_str().unwrap()]);
    s(&["profile", "--fock", "1", "--seed", "2", "--out", input.to_str().unwrap()]);
    let floors: Vec<Value> = (1..=3)
        .map(|k| {
            let doc = ok_json(&[
                "nogo",
                "--input",
                "fock:1",
                "--target",
                "cat:2:odd",
                "--flavor",
                "subadditive",
                "--copies",
                &k.to_string(),
                "--input-profile",
                input.to_str().unwrap(),
                "--target-profile",
                target.to_str().unwrap(),
            ]);
            doc["result"]["region"]["boundary"].clone()
        })
        .collect();
    let at = |b: &Value, p: f64| {
        b.as_array()
            .unwrap()
            .iter()
            .filter(|x| x["p"].as_f64().unwrap() < p)
            .map(|x| x["delta"].as_f64().unwrap())
            .last()
            .unwrap_or(0.0)
    };
    for i in 1..=100 {
        let p = i as f64 / 100.0;
        assert!(at(&floors[1], p) <= at(&floors[0], p) + 1e-12);
        assert!(at(&floors[2], p) <= at(&floors[1], p) + 1e-12);
    }
}

#[test]
fn assess_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.json");
    let empty = dir.path().join("empty.json");
    assert!(stellar(&["nogo", "--input", "fock:2", "--target", "fock:1,1", "--seed", "1", "--out", full.to_str().unwrap()])
        .status
        .success());
    assert!(stellar(&["nogo", "--input", "fock:1", "--target", "fock:1", "--seed", "1", "--out", empty.to_str().unwrap()])
        .status
        .success());
    let inside = ok_json(&["assess", "--region", full.to_str().unwrap(), "--p", "1", "--fidelity", "1"]);
    assert_eq!(inside["result"]["assessment"]["verdict"], "inside");
    let outside = ok_json(&["assess", "--region", empty.to_str().unwrap(), "--p", "0.5", "--fidelity", "0.5"]);
    assert_eq!(outside["result"]["assessment"]["verdict"], "outside");
    let bad = stellar(&["assess", "--region", full.to_str().unwrap(), "--p", "1.5", "--fidelity", "1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn wln_values() {
    let w = |args: &[&str]| ok_json(args)["result"]["wln"].as_f64().unwrap();
    assert!(w(&["wln", "--fock", "0", "--resolution", "201"]) < 1e-4);
    assert!((w(&["wln", "--fock", "2", "--resolution", "401"]) - 0.55).abs() < 0.01);
    assert!((w(&["wln", "--fock", "1,1", "--resolution", "401"]) - 0.71).abs() < 0.01);
}

#[test]
fn wln_grid_dump() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("w.csv");
    let out = stellar(&["wln", "--fock", "1", "--resolution", "201", "--grid-csv", grid.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(grid).unwrap();
    assert!(text.starts_with("x,p,w\n"));
    assert_eq!(text.lines().count(), 1 + 201 * 201);
}

#[test]
fn exit_codes() {
    assert_eq!(stellar(&["state"]).status.code(), Some(2), "no source");
    assert_eq!(stellar(&["state", "--fock", "1", "--gkp", "0.1"]).status.code(), Some(2), "two sources");
    assert_eq!(stellar(&["state", "--spec", "squid:1"]).status.code(), Some(2));
    let bad_field = stellar(&["state", "--spec", "cat:x:odd"]);
    assert_eq!(bad_field.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_field.stderr).contains("field 1 (alpha)"));
    assert_eq!(stellar(&["state", "--coherent", "2", "--cutoff", "8"]).status.code(), Some(3), "truncation");
    assert_eq!(stellar(&["wln", "--fock", "1", "--resolution", "41"]).status.code(), Some(3), "coarse quadrature");
    assert_eq!(
        stellar(&["nogo", "--input", "fock:1", "--target", "fock:1", "--copies", "3", "--seed", "1"]).status.code(),
        Some(2),
        "multi-copy limited to two copies"
    );
    assert_eq!(
        stellar(&["nogo", "--input", "fock:1", "--target", "fock:1", "--flavor", "subadditive", "--purity", "mixed", "--seed", "1"])
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let two_mode = dir.path().join("pair.json");
    let mut amps = vec!["[0.0,0.0]"; 9];
    amps[4] = "[1.0,0.0]";
    std::fs::write(&two_mode, format!(r#"{{"modes":2,"cutoff":2,"amps":[{}]}}"#, amps.join(","))).unwrap();
    assert_eq!(stellar(&["wln", "--spec", two_mode.to_str().unwrap()]).status.code(), Some(2), "non-product multimode WLN");
    assert_eq!(
        Command::new(env!("CARGO_BIN_EXE_stellar"))
            .args(["state", "--fock", "1"])
            .env("STELLAR_THREADS", "zero")
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
}
