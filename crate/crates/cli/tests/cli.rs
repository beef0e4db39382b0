use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use calibra::synth::{calibrated_labels, logistic_normal_model};
use serde_json::Value;
use tempfile::TempDir;

fn calibra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calibra")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FOUR_POINT: &str = "c0,c1,label\n0.8,0.2,0\n0.8,0.2,0\n0.8,0.2,0\n0.8,0.2,1\n";

fn calibrated_file(dir: &TempDir, name: &str, n: usize, seed: u64) -> PathBuf {
    let m = logistic_normal_model(3, 1.0, 11).unwrap();
    let d = calibrated_labels(m.sample_many(n, seed), seed + 1).unwrap();
    let p = dir.path().join(name);
    d.write_csv(std::fs::File::create(&p).unwrap()).unwrap();
    p
}

#[test]
fn estimate_ece_on_four_points() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "four.csv", FOUR_POINT);
    let out = calibra(&["estimate", "--input", s(&f), "--estimator", "ece", "--bins", "15"]);
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["empty_bins"], 14);
    let manifest: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(manifest["command"], "estimate");
    assert_eq!(
        manifest["inputs"][0]["sha256"].as_str().unwrap().len(),
        64,
        "digest is a hex SHA-256"
    );
}

#[test]
fn rbs_is_zero_on_perfect_predictions() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "perfect.csv", "c0,c1,c2,label\n1,0,0,0\n0,1,0,1\n0,0,1,2\n");
    let v = json(&calibra(&["estimate", "--input", s(&f), "--estimator", "rbs"]));
    assert_eq!(v["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "four.csv", FOUR_POINT);
    let out = calibra(&["estimate", "--input", s(&f), "--estimator", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown estimator 'nope'"));

    let out = calibra(&["estimate", "--input", s(&f), "--estimator", "ks", "--bins", "10"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = write(&dir, "bad.csv", "c0,c1,label\n0.5,oops,1\n");
    assert_eq!(calibra(&["estimate", "--input", s(&bad), "--estimator", "ece"]).status.code(), Some(3));
    let missing = dir.path().join("missing.csv");
    assert_eq!(calibra(&["estimate", "--input", s(&missing), "--estimator", "ece"]).status.code(), Some(3));

    assert_eq!(calibra(&["recalibrate", "--test", s(&f)]).status.code(), Some(2));
    assert_eq!(calibra(&["sweep", "--input", s(&f)]).status.code(), Some(2), "--seed is required");
    assert_eq!(calibra(&["counterexample"]).status.code(), Some(2));
}

#[test]
fn recalibrate_with_temperature_on_calibrated_data() {
    let dir = TempDir::new().unwrap();
    let val = calibrated_file(&dir, "val.csv", 5000, 1);
    let test = calibrated_file(&dir, "test.csv", 5000, 3);
    let v = json(&calibra(&[
        "recalibrate", "--val", s(&val), "--test", s(&test), "--method", "ts",
        "--estimator", "ece", "--estimator", "rbs",
    ]));
    let t = v["map"]["parameters"]["t"].as_str().map(|x| x.parse::<f64>().unwrap()).or(v["map"]["parameters"]["t"].as_f64());
    let t = t.expect("temperature present");
    assert!((t - 1.0).abs() < 0.05, "{t}");
    for row in v["rows"].as_array().unwrap() {
        assert!(row["improvement"].as_f64().unwrap().abs() < 0.01, "{row}");
    }
}

#[test]
fn recalibrate_with_blunt_map_zeroes_ece() {
    let dir = TempDir::new().unwrap();
    let val = calibrated_file(&dir, "val.csv", 5000, 5);
    let test = calibrated_file(&dir, "test.csv", 5000, 7);
    let v = json(&calibra(&[
        "recalibrate", "--val", s(&val), "--test", s(&test), "--method", "tf", "--estimator", "ece",
    ]));
    let after = v["rows"][0]["after"].as_f64().unwrap();
    assert!(after < 0.02, "{after}");
}

#[test]
fn class_mismatch_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let val = calibrated_file(&dir, "val.csv", 50, 1);
    let test = write(&dir, "four.csv", FOUR_POINT);
    let out = calibra(&["recalibrate", "--val", s(&val), "--test", s(&test)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_bias_curve_decreases() {
    let v = json(&calibra(&[
        "simulate-bias", "--classes", "100", "--n-grid", "100..10000", "--pool", "2000",
        "--replicates", "20", "--seed", "1",
    ]));
    let mu: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["mu_n"].as_f64().unwrap()).collect();
    assert_eq!(mu.len(), 5);
    assert!(mu.windows(2).all(|w| w[1] < w[0]), "{mu:?}");
}

#[test]
fn counterexample_table() {
    let dir = TempDir::new().unwrap();
    let joint = dir.path().join("joint.json");
    let v = json(&calibra(&[
        "counterexample", "--classes", "100", "--eps", "0.01", "--seed", "0", "--joint-out", s(&joint),
    ]));
    let get = |name: &str| {
        v["table"].as_array().unwrap().iter().find(|r| r["error"] == name).unwrap()["value"].as_f64().unwrap()
    };
    assert!(get("ce_2") >= 0.9899);
    assert!(get("ece_15b").abs() < 1e-12);

    // The written joint feeds decompose.
    let d = json(&calibra(&["decompose", "--joint", s(&joint), "--score", "brier"]));
    assert!(d["rows"][0]["residual"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn decompose_residual() {
    let v = json(&calibra(&["decompose", "--classes", "4", "--support", "6", "--seed", "3"]));
    for row in v["rows"].as_array().unwrap() {
        assert!(row["residual"].as_f64().unwrap().abs() < 1e-10);
    }
    assert_eq!(calibra(&["decompose"]).status.code(), Some(2));
}

#[test]
fn sweep_is_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let pool = calibrated_file(&dir, "pool.csv", 400, 9);
    let args = |threads: &'static str| {
        calibra(&[
            "--threads", threads, "sweep", "--input", s(&pool), "--min-size", "50", "--ticks", "3",
            "--replicates", "20", "--seed", "4", "--estimator", "ece", "--estimator", "rbs",
            "--temperature", "2", "--output-format", "csv",
        ])
    };
    let a = args("1");
    let b = args("4");
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("estimator,map,n,mean,se,replicates\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2);
}

#[test]
fn improvement_sweep_and_plot_data() {
    let dir = TempDir::new().unwrap();
    let val = calibrated_file(&dir, "val.csv", 300, 1);
    let test = calibrated_file(&dir, "test.csv", 400, 2);
    let plot = dir.path().join("plot.csv");
    let manifest = dir.path().join("manifest.json");
    let out = calibra(&[
        "--manifest", s(&manifest), "sweep", "--input", s(&test), "--val", s(&val), "--method", "ts",
        "--min-size", "100", "--ticks", "2", "--replicates", "10", "--seed", "2", "--estimator", "rbs",
        "--plot-data", s(&plot),
    ]);
    let v = json(&out);
    assert!(out.stderr.is_empty());
    assert!(v["improvement"]["validation_fingerprint"].is_string());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["seed"], 2);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    let plot = std::fs::read_to_string(&plot).unwrap();
    assert!(plot.starts_with("figure,estimator,map,x,y,se\n"));
    assert!(plot.contains("improvement_squared,RBS,temperature,400,"));
}

#[test]
fn regress_demo_writes_curve() {
    let dir = TempDir::new().unwrap();
    let curve = dir.path().join("curve.jsonl");
    let out = calibra(&[
        "regress-demo", "--seed", "1", "--n", "30", "--iterations", "40", "--hidden", "6", "--eval-every", "20",
        "--curve", s(&curve), "--output-format", "text",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Avg Var (calibrated)"));
    assert!(text.contains("SE/Var ratio"));
    let lines: Vec<Value> = std::fs::read_to_string(&curve)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    for key in ["iter", "dss_train", "dss_val", "avg_var_raw", "avg_var_cal", "skce"] {
        assert!(lines[0].get(key).is_some(), "{key}");
    }
}
