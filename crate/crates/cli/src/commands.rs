use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use calibra::estimators::{estimate, Bandwidth, BinningScheme, EstimatorParams};
use calibra::harness::{
    improvement_sweep_split, relative_bias, sweep, write_improvement_csv, write_improvement_plot_data,
    write_report_csv, write_sweep_plot_data, Source, SweepConfig,
};
use calibra::numeric::derive_seed;
use calibra::recal::{improvement, RecalMap, RecalMethod};
use calibra::regress::{variance_demo, DemoConfig, DemoReport, Friedman1, MdnConfig};
use calibra::scores::{decompose, ClassScore, ProperScore};
use calibra::synth::{counterexample, ece_bias_mu, pool_joint, random_joint, true_error, LogisticNormalModel, TrueError};
use calibra::{load_csv, ColumnFormat, EstimatorConfig, Error, FiniteJointModel, LabeledPredictions, Result, Split};
use log::info;
use serde_json::{json, Value};

use crate::manifest::{Recorder, SCHEMA_VERSION};
use crate::spec::parse_estimators;
use crate::{
    Command, CounterexampleArgs, DecomposeArgs, EstimateArgs, RecalibrateArgs, RegressDemoArgs, SimulateBiasArgs,
    SweepArgs,
};

/// Output of a command: what goes to stdout, plus the manifest recorder.
struct Run {
    stdout: String,
    recorder: Recorder,
}

pub fn run(cmd: &Command, manifest: Option<&Path>) -> Result<()> {
    let config = serde_json::to_value(cmd)?;
    let out = match cmd {
        Command::Estimate(a) => cmd_estimate(a, config)?,
        Command::Recalibrate(a) => cmd_recalibrate(a, config)?,
        Command::Sweep(a) => cmd_sweep(a, config)?,
        Command::SimulateBias(a) => cmd_simulate_bias(a, config)?,
        Command::Counterexample(a) => cmd_counterexample(a, config)?,
        Command::RegressDemo(a) => cmd_regress_demo(a, config)?,
        Command::Decompose(a) => cmd_decompose(a, config)?,
    };
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(out.stdout.as_bytes())?;
    stdout.flush()?;
    let m = serde_json::to_string(&out.recorder.finish())?;
    match manifest {
        Some(path) => std::fs::write(path, m + "\n")?,
        None => eprintln!("{m}"),
    }
    Ok(())
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::Config(format!("{command} is stochastic; pass --seed")))
}

fn payload(command: &str, body: Value) -> String {
    let mut v = json!({ "schema_version": SCHEMA_VERSION, "command": command });
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
    }
    serde_json::to_string_pretty(&v).expect("JSON values serialize") + "\n"
}

fn load(rec: &mut Recorder, path: &Path, format: &str) -> Result<LabeledPredictions> {
    let format: ColumnFormat = format.parse()?;
    rec.input(path)?;
    let d = load_csv(path, format)?;
    info!("loaded {} rows with {} classes from {}", d.len(), d.n_classes(), path.display());
    Ok(d)
}

fn load_joint(rec: &mut Recorder, path: &Path) -> Result<FiniteJointModel> {
    rec.input(path)?;
    FiniteJointModel::from_json(&std::fs::read_to_string(path)?)
}

fn cmd_estimate(a: &EstimateArgs, config: Value) -> Result<Run> {
    let mut rec = Recorder::new("estimate", config, None);
    let params = EstimatorParams {
        bins: a.bins,
        equal_mass: a.equal_mass,
        p: a.p,
        debias: a.debias,
        bandwidth: a.bandwidth.as_deref().map(str::parse::<Bandwidth>).transpose()?,
        nu: a.nu,
    };
    let cfg = EstimatorConfig::from_parts(&a.estimator, &params)?;
    let data = load(&mut rec, &a.input, &a.format)?;
    let e = estimate(&data, &cfg)?;
    let body = json!({
        "estimator": cfg.label(),
        "value": e.value,
        "n": e.n,
        "config": e.config,
        "empty_bins": e.empty_bins,
    });
    Ok(Run { stdout: payload("estimate", body), recorder: rec })
}

fn cmd_recalibrate(a: &RecalibrateArgs, config: Value) -> Result<Run> {
    let mut rec = Recorder::new("recalibrate", config, None);
    let method: RecalMethod = a.method.parse()?;
    let estimators = parse_estimators(&a.estimators)?;
    let split = Split::new(load(&mut rec, &a.val, &a.format)?, load(&mut rec, &a.test, &a.format)?)?;
    let map = method.fit(&split.validation)?;
    info!("fitted {} map on {} validation rows", map.kind(), split.validation.len());
    let rows = estimators
        .iter()
        .map(|cfg| {
            let imp = improvement(&split.test, &map, cfg)?;
            Ok(json!({
                "estimator": cfg.label(),
                "before": imp.before,
                "after": imp.after,
                "improvement": imp.plain(),
                "improvement_squared": imp.squared(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let body = json!({
        "map": map,
        "validation_fingerprint": split.validation.fingerprint(),
        "n_validation": split.validation.len(),
        "n_test": split.test.len(),
        "rows": rows,
    });
    Ok(Run { stdout: payload("recalibrate", body), recorder: rec })
}

fn parse_counts(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad replicate count '{x}'"))))
        .collect()
}

fn cmd_sweep(a: &SweepArgs, config: Value) -> Result<Run> {
    let seed = require_seed(a.seed, "sweep")?;
    let mut rec = Recorder::new("sweep", config, Some(seed));
    if !matches!(a.output_format.as_str(), "csv" | "json") {
        return Err(Error::Config(format!("unknown output format '{}' (expected csv|json)", a.output_format)));
    }
    let mut cfg = SweepConfig {
        min_size: a.min_size,
        max_size: a.max_size,
        ticks: a.ticks,
        seed,
        estimators: parse_estimators(&a.estimators)?,
        maps: a.temperatures.iter().map(|&t| RecalMap::temperature(t)).collect::<Result<_>>()?,
        ..SweepConfig::default()
    };
    if let Some(r) = &a.replicates {
        cfg.replicates = parse_counts(r)?;
    } else if a.ticks != cfg.replicates.len() {
        return Err(Error::Config(format!(
            "the default replicate schedule has {} ticks; pass --replicates for {}",
            cfg.replicates.len(),
            a.ticks
        )));
    }
    cfg.validate()?;

    let mut plot = Vec::new();
    let stdout = if let Some(val_path) = &a.val {
        let method: RecalMethod = a.method.parse()?;
        let test_path = a.input.as_ref().expect("clap enforces --input with --val");
        let split = Split::new(load(&mut rec, val_path, &a.format)?, load(&mut rec, test_path, &a.format)?)?;
        let report = improvement_sweep_split(&split, &[method], &cfg)?;
        if a.plot_data.is_some() {
            write_improvement_plot_data(&mut plot, &report)?;
        }
        if a.output_format == "csv" {
            let mut buf = Vec::new();
            write_improvement_csv(&mut buf, &report.rows)?;
            String::from_utf8(buf).expect("CSV is UTF-8")
        } else {
            payload("sweep", json!({ "improvement": report }))
        }
    } else {
        let (pool, joint);
        let source = match (&a.input, &a.joint) {
            (Some(p), _) => {
                pool = load(&mut rec, p, &a.format)?;
                Source::Pool(&pool)
            }
            (None, Some(j)) => {
                joint = load_joint(&mut rec, j)?;
                Source::Joint(&joint)
            }
            (None, None) => return Err(Error::Config("sweep needs --input or --joint".into())),
        };
        let report = sweep(source, &cfg)?;
        if a.plot_data.is_some() {
            write_sweep_plot_data(&mut plot, &report)?;
        }
        if a.output_format == "csv" {
            let mut buf = Vec::new();
            write_report_csv(&mut buf, &report.rows)?;
            String::from_utf8(buf).expect("CSV is UTF-8")
        } else {
            let relative = relative_bias(&report)?;
            payload("sweep", json!({ "report": report, "relative": relative }))
        }
    };
    if let Some(path) = &a.plot_data {
        std::fs::write(path, plot)?;
    }
    Ok(Run { stdout, recorder: rec })
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("bad size range '{s}' (expected lo..hi)"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn cmd_simulate_bias(a: &SimulateBiasArgs, config: Value) -> Result<Run> {
    let seed = require_seed(a.seed, "simulate-bias")?;
    let rec = Recorder::new("simulate-bias", config, Some(seed));
    let (lo, hi) = parse_range(&a.n_grid)?;
    if lo < a.bins {
        return Err(Error::Config(format!("smallest size {lo} is below the bin count {}", a.bins)));
    }
    let model = LogisticNormalModel::new(a.classes, a.scale, a.df.unwrap_or(a.classes as f64), derive_seed(seed, &[0]))?;
    let joint = pool_joint(&model.sample_many(a.pool, derive_seed(seed, &[1])), a.temperature)?;
    let ece = EstimatorConfig::Ece { binning: BinningScheme::equal_width(a.bins)? };
    let cfg = SweepConfig {
        min_size: lo,
        max_size: Some(hi),
        ticks: a.ticks,
        replicates: vec![a.replicates],
        seed: derive_seed(seed, &[2]),
        estimators: vec![ece],
        maps: Vec::new(),
    };
    let report = sweep(Source::Joint(&joint), &cfg)?;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let approx = ece_bias_mu(&joint, r.n as f64, a.bins)?;
            Ok(json!({ "n": r.n, "mc_mean": r.mean, "mc_se": r.se, "mu_n": approx.mu_n, "limit": approx.limit() }))
        })
        .collect::<Result<Vec<_>>>()?;
    let body = json!({
        "population_ece": true_error(&joint, TrueError::Ece { m: a.bins })?,
        "replicates": a.replicates,
        "rows": rows,
    });
    Ok(Run { stdout: payload("simulate-bias", body), recorder: rec })
}

fn cmd_counterexample(a: &CounterexampleArgs, config: Value) -> Result<Run> {
    let seed = require_seed(a.seed, "counterexample")?;
    let rec = Recorder::new("counterexample", config, Some(seed));
    let joint = counterexample(a.classes, a.eps, a.support, seed)?;
    let which = [
        TrueError::CeP { p: 1.0 },
        TrueError::CeP { p: 2.0 },
        TrueError::CwceP { p: 1.0 },
        TrueError::CwceP { p: 2.0 },
        TrueError::TceP { p: 1.0 },
        TrueError::TceP { p: 2.0 },
        TrueError::Ece { m: 15 },
        TrueError::Ks,
        TrueError::Mmce { nu: 0.4 },
        TrueError::CeBrier,
        TrueError::Brier,
    ];
    let table = which
        .iter()
        .map(|w| Ok(json!({ "error": w.label(), "value": true_error(&joint, *w)? })))
        .collect::<Result<Vec<_>>>()?;
    let joint_json: Value = serde_json::from_str(&joint.to_json()?)?;
    let mut body = json!({ "table": table });
    match &a.joint_out {
        Some(path) => {
            std::fs::write(path, joint.to_json()?)?;
            body["joint_path"] = json!(path.display().to_string());
        }
        None => body["joint"] = joint_json,
    }
    Ok(Run { stdout: payload("counterexample", body), recorder: rec })
}

fn demo_tables(r: &DemoReport) -> String {
    let mut s = String::new();
    let splits = [("train", &r.train), ("val", &r.val), ("test", &r.test)];
    let _ = writeln!(s, "{:<24}{:>12}{:>12}{:>12}", "", "train", "val", "test");
    let line = |s: &mut String, name: &str, f: &dyn Fn(&calibra::regress::DemoSplit) -> String| {
        let _ = write!(s, "{name:<24}");
        for (_, sp) in &splits {
            let _ = write!(s, "{:>12}", f(sp));
        }
        let _ = writeln!(s);
    };
    line(&mut s, "Avg Var (uncalibrated)", &|x| format!("{:.3}", x.raw.avg_var));
    line(&mut s, "Avg Var (calibrated)", &|x| format!("{:.3}", x.calibrated.avg_var));
    line(&mut s, "MSE", &|x| format!("{:.3}", x.raw.mse));
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<24}{:>24}{:>24}", "SE/Var ratio", "uncalibrated", "calibrated");
    for (name, sp) in &splits {
        let pm = |d: &calibra::regress::Diagnostics| match d.ratio_sd {
            Some(sd) => format!("{:.3} ± {:.3}", d.ratio_mean, sd),
            None => format!("{:.3}", d.ratio_mean),
        };
        let _ = writeln!(s, "{name:<24}{:>24}{:>24}", pm(&sp.raw), pm(&sp.calibrated));
    }
    let _ = writeln!(s, "\nbest iteration {}, map {:?}", r.best_iter, r.map);
    s
}

fn cmd_regress_demo(a: &RegressDemoArgs, config: Value) -> Result<Run> {
    let seed = require_seed(a.seed, "regress-demo")?;
    let rec = Recorder::new("regress-demo", config, Some(seed));
    if !matches!(a.output_format.as_str(), "text" | "json") {
        return Err(Error::Config(format!("unknown output format '{}' (expected json|text)", a.output_format)));
    }
    let cfg = DemoConfig {
        n_train: a.n,
        n_val: a.n,
        n_test: a.n,
        data: Friedman1 { noise_as_std: a.noise_as_std, ..Friedman1::new(a.n) },
        mdn: MdnConfig {
            hidden: a.hidden,
            learning_rate: a.learning_rate,
            iterations: a.iterations,
            eval_every: a.eval_every,
            ..MdnConfig::default()
        },
        ..DemoConfig::default()
    };
    let report = variance_demo(seed, &cfg)?;
    if let Some(path) = &a.curve {
        let mut lines = String::new();
        for p in &report.curve {
            lines.push_str(&serde_json::to_string(p)?);
            lines.push('\n');
        }
        std::fs::write(path, lines)?;
    }
    let stdout = if a.output_format == "text" {
        demo_tables(&report)
    } else {
        payload("regress-demo", json!({ "report": report }))
    };
    Ok(Run { stdout, recorder: rec })
}

fn cmd_decompose(a: &DecomposeArgs, config: Value) -> Result<Run> {
    let scores: Vec<ClassScore> = match a.score.as_str() {
        "both" => vec![ClassScore::Brier, ClassScore::Log],
        s => vec![s.parse()?],
    };
    let (rec, joint) = match &a.joint {
        Some(path) => {
            let mut rec = Recorder::new("decompose", config, a.seed);
            let j = load_joint(&mut rec, path)?;
            (rec, j)
        }
        None => {
            let seed = require_seed(a.seed, "decompose without --joint")?;
            (Recorder::new("decompose", config, Some(seed)), random_joint(a.classes, a.support, seed)?)
        }
    };
    let rows = scores
        .iter()
        .map(|s| {
            let d = decompose(&joint, *s)?;
            Ok(json!({
                "score": s.name(),
                "entropy": d.entropy,
                "sharpness": d.sharpness,
                "calibration": d.calibration,
                "expected_score": d.expected_score,
                "residual": d.residual(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Run { stdout: payload("decompose", json!({ "rows": rows })), recorder: rec })
}
