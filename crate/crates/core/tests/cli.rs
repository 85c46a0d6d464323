use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coxmeas::asymptotics::{CensorLaw, CovariateLaw, Truth};
use coxmeas::cli::{manifest_path, sha256_hex, AsymptoticsReport, FitReport, RunManifest};
use coxmeas::{ErrorModel, SplineHazard};
use serde_json::{json, Value};
use tempfile::TempDir;

fn coxmeas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coxmeas")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_json(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn fit_config(dir: &TempDir) -> PathBuf {
    let cfg = json!({
        "fit": { "param_box": { "lower": [-1.0], "upper": [3.0] }, "L": 1.0, "tau": 1.0, "outer": { "starts": 3 } },
        "error": { "kind": "gaussian", "cov": [[0.09]] }
    });
    write_json(dir, "fit.json", &cfg)
}

fn simulate(dir: &TempDir, n: usize, seed: u64, name: &str) -> PathBuf {
    let out = dir.path().join(name);
    let o = coxmeas(&["simulate", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn simulate_is_deterministic_and_writes_a_manifest() {
    let dir = TempDir::new().unwrap();
    let a = simulate(&dir, 100, 7, "a.csv");
    let b = simulate(&dir, 100, 7, "b.csv");
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(bytes.iter().filter(|&&c| c == b'\n').count(), 101);
    let m: RunManifest = serde_json::from_slice(&fs::read(manifest_path(&a)).unwrap()).unwrap();
    assert_eq!(m.subcommand, "simulate");
    assert_eq!(m.seed, 7);
    assert_eq!(m.outputs[path(&a)], sha256_hex(&bytes));
    assert!(m.wall_time_seconds >= 0.0);
}

#[test]
fn simulate_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let o = coxmeas(&["simulate", "--n", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let mut truth = serde_json::to_value(Truth::default_fixture()).unwrap();
    truth["hazard"]["values"] = json!([0.0, 0.9]);
    let p = write_json(&dir, "truth.json", &truth);
    let o = coxmeas(&["simulate", "--n", "10", "--truth", path(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(vii)"), "{}", stderr(&o));
}

#[test]
fn malformed_row_is_reported_with_its_number() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "y,delta,w1\n0.5,1,0.1\n0.3,2,0.2\n").unwrap();
    let cfg = fit_config(&dir);
    let o = coxmeas(&["fit", "--data", path(&data), "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    // rows are numbered as file lines, header included
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn stage_two_pipeline_matches_refed_stage_one() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, 150, 3, "d.csv");
    let cfg = fit_config(&dir);
    let combined = dir.path().join("combined.json");
    let o = coxmeas(&["fit", "--data", path(&data), "--config", path(&cfg), "--stage", "2", "--out", path(&combined)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let both: FitReport = serde_json::from_slice(&fs::read(&combined).unwrap()).unwrap();
    let s2 = both.stage2.as_ref().expect("stage 2 reported");
    assert_eq!(both.stage1.stage, 1);
    assert_eq!(s2.stage, 2);
    assert_eq!(both.epsilon_n, 1.0 / 150.0);

    let first = dir.path().join("s1.json");
    let o = coxmeas(&["fit", "--data", path(&data), "--config", path(&cfg), "--out", path(&first)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let refed = dir.path().join("refed.json");
    let o = coxmeas(&[
        "fit",
        "--data",
        path(&data),
        "--config",
        path(&cfg),
        "--stage",
        "2",
        "--stage1-result",
        path(&first),
        "--out",
        path(&refed),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&combined).unwrap(), fs::read(&refed).unwrap());
}

#[test]
fn decoupled_truth_gives_k_as_direction() {
    let dir = TempDir::new().unwrap();
    let x = CovariateLaw::Finite { atoms: vec![vec![-1.0], vec![1.0]], probs: vec![0.5, 0.5] };
    let h = SplineHazard::constant(1.0, 1.0, 1.0).unwrap();
    let truth = Truth::new(h, vec![0.0], x, CensorLaw::fixed(1.0), ErrorModel::none(1)).unwrap();
    let p = write_json(&dir, "truth.json", &serde_json::to_value(&truth).unwrap());
    let out = dir.path().join("asy.json");
    let o = coxmeas(&[
        "asymptotics",
        "--truth",
        path(&p),
        "--f",
        "one",
        "--grid-nodes",
        "201",
        "--reps",
        "2000",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: AsymptoticsReport = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    for (i, &u) in r.fredholm.grid.iter().enumerate() {
        // K(u) = 1 / b(u) = e^u here
        assert!((r.fredholm.phi_lambda[i] - u.exp()).abs() < 1e-12 * u.exp());
    }
}

fn study_config(dir: &TempDir, replications: usize) -> PathBuf {
    let mut cfg =
        serde_json::to_value(coxmeas::simulation::StudyConfig::default_fixture(vec![40, 80, 160], 1)).unwrap();
    cfg["replications"] = json!(replications);
    cfg["fit"]["outer"]["starts"] = json!(2);
    cfg["asymptotics"] = json!({ "grid_nodes": 201, "hermite_nodes": 20, "reps": 2000, "seed": 1 });
    write_json(dir, "study.json", &cfg)
}

#[test]
fn single_replicate_study_warns_and_stays_finite() {
    let dir = TempDir::new().unwrap();
    let cfg = study_config(&dir, 1);
    let out = dir.path().join("study.json.out");
    let o = coxmeas(&["study", "--config", path(&cfg), "--kind", "consistency", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let warnings = v["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("replications")), "{warnings:?}");
    for s in v["sizes"].as_array().unwrap() {
        assert!(s["supnorm_full"]["median"].as_f64().unwrap().is_finite());
        assert!(s["beta_error"]["median"].as_f64().unwrap().is_finite());
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = study_config(&dir, 4);
    let csv_dir = dir.path().join("csv");
    let mut bodies = Vec::new();
    for threads in ["1", "2", "3"] {
        let out = dir.path().join(format!("study{threads}.json"));
        let o = coxmeas(&[
            "study",
            "--config",
            path(&cfg),
            "--kind",
            "normality",
            "--threads",
            threads,
            "--seed",
            "5",
            "--csv",
            path(&csv_dir),
            "--out",
            path(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(manifest_path(&out).exists());
        bodies.push((fs::read(&out).unwrap(), fs::read(csv_dir.join("replicates.csv")).unwrap()));
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}
