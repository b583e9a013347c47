use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;
use tempfile::TempDir;

fn gdrisk(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gdrisk"));
    cmd.args(args).env_remove("GDRISK_THREADS");
    if let Some(t) = threads {
        cmd.env("GDRISK_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, value: serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path
}

fn run(command: &str, config: &Path, out: &Path) -> Output {
    gdrisk(&[command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()], None)
}

fn power_law() -> serde_json::Value {
    json!({ "spectrum": { "kind": "power_law", "params": { "a": 2, "r": 1 }, "d": 400 }, "sigma2": 1 })
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn spike_sgd_bound_row() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bounds.json",
        json!({
            "command": "bounds",
            "problem": { "spectrum": { "kind": "spike", "params": { "n": 100 } } },
            "params": { "n": 100, "requests": [{ "kind": "sgd" }, { "kind": "ridge", "lambda": 0.01 }], "constants": { "c2": 20 } }
        }),
    );
    let out = tmp.path().join("b");
    let o = run("bounds", &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result = out.join("result.csv");
    assert_eq!(column(&result, "kind"), ["sgd", "ridge"]);
    assert_eq!(column(&result, "k_star")[0], "1");
    assert!(column(&result, "preconditions")[0].contains("n_ge_100=true"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("bounds.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 0);
    assert_eq!(record["params"]["constants"]["c2"], 20.0);
}

#[test]
fn gd_lower_bound_reports_ell_star() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bounds.json",
        json!({
            "command": "bounds",
            "problem": { "spectrum": { "kind": "spike", "params": { "n": 100 } } },
            "params": { "n": 100, "requests": [{ "kind": "gd_lower", "t": 1000 }] }
        }),
    );
    let out = tmp.path().join("b");
    assert!(run("bounds", &cfg, &out).status.success());
    assert_eq!(column(&out.join("result.csv"), "ell_star"), ["1"]);
}

#[test]
fn rates_table_and_cells() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "rates.json",
        json!({
            "command": "rates",
            "params": { "a": 2, "r": [1], "algorithms": ["gd", "ridge"], "n_grid": [32, 64, 128], "options": { "d": 300, "grid_points": 7 } },
            "trials": 2
        }),
    );
    let out = tmp.path().join("r");
    assert!(run("rates", &cfg, &out).status.success());
    let theory: Vec<f64> = column(&out.join("result.csv"), "theory").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(theory.len(), 2);
    assert!(theory.iter().all(|t| (t + 0.8).abs() < 1e-12));
    assert_eq!(rows(&out.join("rate_cells.csv")).len(), 6);
    assert!(out.join("plotdata_rates_gd_r1.csv").exists());
    assert!(out.join("plotdata_rates_ridge_r1.csv").exists());
}

#[test]
fn missing_output_dir_is_created_and_reruns_match() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sweep.json",
        json!({
            "command": "sweep",
            "problem": power_law(),
            "params": { "n": 60, "algorithm": "ridge", "center": 0.05, "points": 5 },
            "trials": 3,
            "seed": 11
        }),
    );
    let a = tmp.path().join("deep/nested/a");
    let b = tmp.path().join("b");
    assert!(run("sweep", &cfg, &a).status.success());
    assert!(run("sweep", &cfg, &b).status.success());
    for f in ["result.csv", "plotdata_sweep.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    assert_eq!(column(&a.join("result.csv"), "best").iter().filter(|s| *s == "true").count(), 1);
    let other = gdrisk(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("c").to_str().unwrap(), "--seed", "12"],
        None,
    );
    assert!(other.status.success());
    assert_ne!(fs::read(a.join("result.csv")).unwrap(), fs::read(tmp.path().join("c/result.csv")).unwrap());
}

#[test]
fn simulate_every_estimator() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.json",
        json!({
            "command": "simulate",
            "problem": power_law(),
            "params": { "n": 50, "estimators": [
                { "algorithm": "ridge", "lambda": 0.01 },
                { "algorithm": "gd", "eta": 0.3, "t": 50 },
                { "algorithm": "sgd", "eta0": 0.1 }
            ] },
            "trials": 3
        }),
    );
    let out = tmp.path().join("s");
    assert!(run("simulate", &cfg, &out).status.success());
    assert_eq!(column(&out.join("result.csv"), "method"), ["monte_carlo", "monte_carlo", "exact_recursion"]);
}

#[test]
fn compare_both_kinds() {
    let tmp = TempDir::new().unwrap();
    for (name, params) in [
        ("ridge", json!({ "kind": "gd_vs_ridge", "n": 50, "lambda_grid": [0.01, 0.1, 1.0] })),
        ("sgd", json!({ "kind": "gd_vs_sgd", "n": 50 })),
    ] {
        let cfg = write_config(
            tmp.path(),
            &format!("{name}.json"),
            json!({ "command": "compare", "problem": power_law(), "params": params, "trials": 2 }),
        );
        let out = tmp.path().join(name);
        let o = run("compare", &cfg, &out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(!rows(&out.join("result.csv")).is_empty());
    }
}

#[test]
fn separation_writes_both_series() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sep.json", json!({ "params": { "n_grid": [16, 32, 64] }, "trials": 1 }));
    let out = tmp.path().join("sep");
    assert!(run("separation", &cfg, &out).status.success());
    assert_eq!(column(&out.join("result.csv"), "ell_star"), ["1", "1", "1"]);
    assert!(out.join("plotdata_separation_gd.csv").exists() && out.join("plotdata_separation_sgd.csv").exists());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let missing = tmp.path().join("nope.json");
    assert_eq!(run("bounds", &missing, &out).status.code(), Some(2));

    let garbage = tmp.path().join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(run("bounds", &garbage, &out).status.code(), Some(2));

    let unknown = write_config(tmp.path(), "unknown.json", json!({ "params": {}, "colour": 1 }));
    assert_eq!(run("separation", &unknown, &out).status.code(), Some(2));

    let wrong = write_config(tmp.path(), "wrong.json", json!({ "command": "rates", "params": {} }));
    assert_eq!(run("separation", &wrong, &out).status.code(), Some(2));

    let no_out = write_config(tmp.path(), "noout.json", json!({ "params": { "n_grid": [16, 32] } }));
    let o = gdrisk(&["separation", "--config", no_out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));

    let unstable = write_config(
        tmp.path(),
        "unstable.json",
        json!({
            "command": "simulate",
            "problem": power_law(),
            "params": { "n": 50, "estimators": [{ "algorithm": "gd", "eta": 100.0, "t": 10 }] },
            "trials": 2
        }),
    );
    let o = run("simulate", &unstable, &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stability limit"));

    let memory =
        write_config(tmp.path(), "memory.json", json!({ "params": { "n_grid": [16, 32, 1024] }, "trials": 1 }));
    assert_eq!(run("separation", &memory, &out).status.code(), Some(3));

    let blocked = tmp.path().join("file");
    fs::write(&blocked, "").unwrap();
    let sep = write_config(tmp.path(), "sep.json", json!({ "params": { "n_grid": [16, 32] }, "trials": 1 }));
    assert_eq!(run("separation", &sep, &blocked.join("sub")).status.code(), Some(3));
}

#[test]
fn validate_reports_errors_and_warnings() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(
        tmp.path(),
        "bad.json",
        json!({
            "command": "bounds",
            "problem": { "spectrum": { "kind": "spike", "params": { "n": 100 }, "d": 50 } },
            "params": { "n": 100, "requests": [{ "kind": "sgd" }] }
        }),
    );
    let o = gdrisk(&["validate", "--config", bad.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("d ≥ n² required"));

    let warn = write_config(
        tmp.path(),
        "warn.json",
        json!({
            "command": "bounds",
            "problem": power_law(),
            "params": { "n": 50, "requests": [{ "kind": "sgd", "eta0": 5.0 }, { "kind": "gd_ridge_type", "eta": 9.0, "t": 3 }] }
        }),
    );
    let o = gdrisk(&["validate", "--config", warn.to_str().unwrap()], None);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("warning:")).count(), 3, "{text}");
    assert!(text.contains("n ≥ 100"));

    let good = write_config(
        tmp.path(),
        "good.json",
        json!({ "command": "bounds", "problem": power_law(), "params": { "n": 200, "requests": [{ "kind": "sgd" }] } }),
    );
    let o = gdrisk(&["validate", "--config", good.to_str().unwrap()], None);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "ok");

    let bad_constants = write_config(
        tmp.path(),
        "constants.json",
        json!({ "command": "bounds", "problem": power_law(), "params": { "n": 200, "requests": [], "constants": { "c3": 0.5 } } }),
    );
    let o = gdrisk(&["validate", "--config", bad_constants.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));

    let no_command = write_config(tmp.path(), "nocommand.json", json!({ "params": {} }));
    assert_eq!(gdrisk(&["validate", "--config", no_command.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.json",
        json!({
            "command": "simulate",
            "problem": power_law(),
            "params": { "n": 40, "estimators": [{ "algorithm": "gd", "eta": 0.3, "t": 20 }, { "algorithm": "sgd", "eta0": 0.1 }], "sgd_method": "monte_carlo" },
            "trials": 6
        }),
    );
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = gdrisk(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], Some(threads));
        assert!(o.status.success());
        outputs.push(fs::read(out.join("result.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
