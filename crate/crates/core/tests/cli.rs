//! End-to-end runs of the binary against temporary directories.

use serde_json::Value;
use shearmix::cli::sha256_hex;
use std::path::Path;
use std::process::{Command, Output};

fn shearmix(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shearmix"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn two_plateau() -> Value {
    serde_json::json!({ "kind": "piecewise_constant", "breaks": [0.0, 0.5, 1.0], "values": [0.0, 1.0] })
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn bounds_task_reports_t_p_and_hashes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", serde_json::json!({ "task": "bounds", "velocity": two_plateau() }));
    let out = tmp.path().join("run");
    let res = shearmix(&["bounds", "--config", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("bounds.json")).unwrap()).unwrap();
    assert_eq!(report["t_p"].as_f64(), Some(1.4375));
    let m = manifest(&out);
    for entry in m["artifacts"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(entry["path"].as_str().unwrap())).unwrap();
        assert_eq!(entry["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(entry["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn malformed_config_exits_1_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let cases = [
        ("unknown key", serde_json::json!({ "velocity": two_plateau(), "colour": 3 })),
        ("wrong task", serde_json::json!({ "task": "evolve", "velocity": two_plateau() })),
        ("bad profile", serde_json::json!({ "velocity": { "kind": "piecewise_constant", "breaks": [0.0, 1.0], "values": [1.0, 2.0] } })),
        ("no velocity", serde_json::json!({})),
    ];
    for (what, json) in cases {
        let cfg = write_config(tmp.path(), "bad.json", json);
        let res = shearmix(&["bounds", "--config", &cfg, "--out", out.to_str().unwrap()], tmp.path());
        assert_eq!(res.status.code(), Some(1), "{what}");
        assert!(!out.exists(), "{what} created the output directory");
    }
    std::fs::write(tmp.path().join("broken.json"), "{ not json").unwrap();
    let res = shearmix(&["bounds", "--config", "broken.json", "--out", "never"], tmp.path());
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn report_lists_missing_inputs_and_tolerates_empty_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "r.json",
        serde_json::json!({ "task": "report", "params": { "bounds": "gone.json", "decay": "also_gone.csv" } }),
    );
    let res = shearmix(&["report", "--config", &cfg, "--out", "rep"], tmp.path());
    assert_eq!(res.status.code(), Some(3));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("bounds") && err.contains("decay"), "{err}");

    let res = shearmix(&["report", "--out", "empty"], tmp.path());
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stderr).contains("warning"));
    assert!(tmp.path().join("empty/summary.txt").exists());
}

#[test]
fn pipeline_feeds_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cos = serde_json::json!({ "kind": "sine", "amplitude": 1.0, "frequency": 1.0, "phase": std::f64::consts::FRAC_PI_2 });
    let b = write_config(dir, "b.json", serde_json::json!({ "velocity": cos }));
    let s = write_config(dir, "s.json", serde_json::json!({ "velocity": cos, "params": { "n": 64, "s_points": 64 } }));
    let e = write_config(
        dir,
        "e.json",
        serde_json::json!({ "velocity": cos, "params": { "n": 32, "ny": 17, "k_max": 8, "t_end": 5.0, "samples": 11, "omega2_nodes": 64 } }),
    );
    for (task, cfg, out) in [("bounds", &b, "b"), ("spectrum", &s, "s"), ("evolve", &e, "e")] {
        let res = shearmix(&[task, "--config", cfg, "--out", out], dir);
        assert_eq!(res.status.code(), Some(0), "{task}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let snapshot = std::fs::read(dir.join("e/field_final.f64")).unwrap();
    assert_eq!(snapshot.len(), 32 * 17 * 8);

    let r = write_config(
        dir,
        "r.json",
        serde_json::json!({ "params": {
            "bounds": "b/bounds.json", "spectrum": "s/spectrum.json",
            "sigma": "s/sigma_trace.csv", "decay": "e/decay.csv" } }),
    );
    let res = shearmix(&["report", "--config", &r, "--out", "rep"], dir);
    assert_eq!(res.status.code(), Some(0));
    let summary = std::fs::read_to_string(dir.join("rep/summary.txt")).unwrap();
    assert!(summary.contains("0 ordering check(s) failed"), "{summary}");
    let plot = std::fs::read_to_string(dir.join("rep/sigma_plot.csv")).unwrap();
    assert!(plot.starts_with("s,sigma_min,omega2_bound,omega1_bound"));
}

#[test]
fn artifacts_do_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.json",
        serde_json::json!({
            "velocity": two_plateau(),
            "params": { "experiment": "tv_decay", "times": [0.5, 1.0], "n_paths": 20000, "dt": 0.005 },
            "seed": 5,
        }),
    );
    let mut manifests = Vec::new();
    for workers in ["1", "3"] {
        let out = format!("w{workers}");
        let res = shearmix(&["simulate", "--config", &cfg, "--out", &out, "--workers", workers], tmp.path());
        assert_eq!(res.status.code(), Some(0));
        manifests.push(std::fs::read(tmp.path().join(out).join("manifest.json")).unwrap());
    }
    assert_eq!(manifests[0], manifests[1]);

    // the command-line seed wins over the config
    let res = shearmix(&["simulate", "--config", &cfg, "--out", "s9", "--seed", "9"], tmp.path());
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(manifest(&tmp.path().join("s9"))["run"]["seed"].as_u64(), Some(9));
    assert_ne!(std::fs::read(tmp.path().join("s9/manifest.json")).unwrap(), manifests[0]);
}

#[test]
fn validate_subset_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = write_config(tmp.path(), "v.json", serde_json::json!({ "params": { "criteria": [1, 2] } }));
    let res = shearmix(&["validate", "--config", &ok, "--out", "v"], tmp.path());
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("2/2 criteria passed"), "{stdout}");

    let bad = write_config(tmp.path(), "x.json", serde_json::json!({ "params": { "criteria": [12] } }));
    assert_eq!(shearmix(&["validate", "--config", &bad, "--out", "x"], tmp.path()).status.code(), Some(1));
}

#[test]
fn numeric_preconditions_map_to_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    // a smooth profile has no plateaus, so the default Doeblin times are undefined
    let cfg = write_config(
        tmp.path(),
        "d.json",
        serde_json::json!({
            "velocity": { "kind": "sine", "amplitude": 1.0, "frequency": 1.0 },
            "params": { "experiment": "doeblin", "n_paths": 10 },
        }),
    );
    let res = shearmix(&["simulate", "--config", &cfg, "--out", "d"], tmp.path());
    assert_eq!(res.status.code(), Some(4));
    assert!(!tmp.path().join("d").exists());
}
