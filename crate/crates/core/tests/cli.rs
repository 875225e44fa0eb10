use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_wiener-sampling");

fn small_config() -> Value {
    json!({
        "c_s": 2.0,
        "c_tau": 5.0,
        "delay": { "kind": "deterministic", "d": 1.0 },
        "lambda": 6.0,
        "grid": { "n_points": 201 },
        "solver": { "tol": 1e-5, "tol_lambda": 1e-3 },
        "simulation": { "n_epochs": 400, "dt": 0.05 },
        "policy": { "kind": "periodic", "period": 1.5 },
        "sigma2_list": [0.0, 0.5],
        "c_tau_list": [0.1, 10.0],
        "T_grid": [0.5, 1.0, 2.0],
        "seed": 3
    })
}

fn run(dir: &Path, sub: &str, cfg: &Value, extra: &[&str]) -> Output {
    let path = dir.join(format!("{sub}.json"));
    fs::write(&path, cfg.to_string()).unwrap();
    Command::new(BIN)
        .arg(sub)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join(sub))
        .args(extra)
        .env_remove("WIENER_SAMPLING_SEED")
        .output()
        .unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn every_subcommand_writes_its_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let expected: &[(&str, &[(&str, &str)])] = &[
        ("solve", &[("g_and_policy.csv", "E,g,z_star,stop"), ("report.csv", "iteration,sup_diff")]),
        ("find-lambda", &[("first_step.csv", "y,z1,value"), ("g_and_policy.csv", "E,g,z_star,stop")]),
        (
            "simulate",
            &[("sim_result.csv", "policy,n_epochs,objective,mse,sample_rate,tx_rate,ci_halfwidth,seed")],
        ),
        ("sweep-sigma", &[("sweep.csv", "sigma2,")]),
        ("convergence", &[("convergence.csv", "iter,sup_diff")]),
        ("curves", &[("curves.csv", "sigma2,c_tau,e,z_star"), ("curves_lambda_star.csv", "sigma2,c_tau,e,z_star")]),
    ];
    for (sub, files) in expected {
        let out = run(tmp.path(), sub, &cfg, &[]);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        let dir = tmp.path().join(sub);
        for (name, head) in *files {
            assert!(header(&dir.join(name)).starts_with(head), "{sub}/{name}");
        }
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["subcommand"], *sub);
        assert_eq!(manifest["seed"], 3);
    }
    let lambda: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("find-lambda/lambda_star.json")).unwrap()).unwrap();
    assert!(lambda["lambda_star"].as_f64().unwrap() > 1.0);
}

#[test]
fn same_seed_gives_identical_simulation_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let read = |sub: &str| fs::read(tmp.path().join(sub).join("sim_result.csv")).unwrap();

    assert!(run(tmp.path(), "simulate", &cfg, &["--seed", "17"]).status.success());
    let first = read("simulate");
    assert!(run(tmp.path(), "simulate", &cfg, &["--seed", "17"]).status.success());
    assert_eq!(first, read("simulate"));
    assert!(run(tmp.path(), "simulate", &cfg, &["--seed", "18"]).status.success());
    assert_ne!(first, read("simulate"));
}

#[test]
fn invalid_config_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg["c_s"] = json!(-1.0);
    let out = run(tmp.path(), "solve", &cfg, &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("c_s"));

    let mut cfg = small_config();
    cfg["grid"]["bogus"] = json!(1);
    let out = run(tmp.path(), "solve", &cfg, &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn failed_run_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    // the fixed-λ curves succeed, the λ* pass cannot converge
    cfg["solver"]["max_iter"] = json!(1);
    cfg["lambda"] = json!(1.5);
    let out = run(tmp.path(), "curves", &cfg, &[]);
    assert!(!out.status.success());
    let left: Vec<_> = fs::read_dir(tmp.path().join("curves")).unwrap().collect();
    assert!(left.is_empty(), "{left:?}");
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = wiener_sampling::config::load_config(&path);
        assert!(cfg.is_ok(), "{}: {}", path.display(), cfg.unwrap_err());
        n += 1;
    }
    assert!(n >= 4);
}
