//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::time::{Duration, Instant};

use calibra::estimators::{evaluate, skce, BinningScheme, EstimatorConfig};
use calibra::harness::{improvement_sweep, relative_bias, sweep, Source, SweepConfig};
use calibra::recal::{tf_accuracy, RecalMap};
use calibra::regress::{
    apply_platt, diagnostics, fit_platt_variance, friedman1, overconfident_gaussians, skce_regression,
    skce_regression_pairs, variance_demo, DemoConfig, Mdn, SkceKernel,
};
use calibra::scores::{decompose, ClassScore};
use calibra::synth::{
    calibrated_labels, counterexample, ece_bias_mu, logistic_normal_model, pool_joint, random_joint, sample,
    true_error, FiniteJointModel, TrueError,
};
use calibra::{LabeledPredictions, ProbVector};

type Outcome = Result<String, String>;

fn ece15() -> EstimatorConfig {
    EstimatorConfig::Ece { binning: BinningScheme::equal_width(15).unwrap() }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let slack = -1e-10;
    let mut worst = f64::INFINITY;
    for k in 0..100u64 {
        let n = [2, 3, 5][k as usize % 3];
        let support = 1 + (k as usize * 7) % 8;
        let p = if k % 2 == 0 { 1.0 } else { 2.0 };
        let j = random_joint(n, support, 1000 + k).map_err(|e| e.to_string())?;
        let t = |w| true_error(&j, w).unwrap();
        let bs = t(TrueError::Brier);
        let chain = [
            (n as f64).powf(1.0 / p - 0.5) * bs.sqrt(),
            t(TrueError::CeP { p }),
            t(TrueError::CwceP { p }),
            t(TrueError::TceP { p }),
            t(TrueError::TceP { p: 1.0 }),
            t(TrueError::Ks).max(t(TrueError::Ece { m: 15 })),
            0.0,
        ];
        for w in chain.windows(2) {
            worst = worst.min(w[0] - w[1]);
        }
        if chain.windows(2).any(|w| w[0] - w[1] < slack) {
            return Err(format!("joint {k} (n={n}, support={support}, p={p}): chain {chain:?}"));
        }
    }
    Ok(format!("100 joints, smallest gap {worst:.3e}"))
}

fn criterion_2() -> Outcome {
    let j = counterexample(100, 0.01, 50, 0).map_err(|e| e.to_string())?;
    let zero = [
        TrueError::CwceP { p: 1.0 },
        TrueError::CwceP { p: 2.0 },
        TrueError::TceP { p: 1.0 },
        TrueError::TceP { p: 2.0 },
        TrueError::Ece { m: 15 },
        TrueError::Ks,
        TrueError::Mmce { nu: 0.4 },
    ];
    let mut worst: f64 = 0.0;
    for w in zero {
        let v = true_error(&j, w).unwrap();
        worst = worst.max(v.abs());
    }
    let ce2 = true_error(&j, TrueError::CeP { p: 2.0 }).unwrap();
    let bound = (0.99f64 - 1.0 / 100.0).sqrt();
    check(worst <= 1e-12 && ce2 >= bound, format!("max zero-error {worst:.1e}, CE_2 {ce2:.6} >= {bound:.6}"))
}

fn criterion_3() -> Outcome {
    // Calibrated 100-class pool, fresh samples per replicate.
    let m = logistic_normal_model(100, 0.01, 0).unwrap();
    let j = pool_joint(&m.sample_many(20_000, 1), 1.0).unwrap();
    let cfg = SweepConfig {
        min_size: 100,
        max_size: Some(6400),
        ticks: 4,
        replicates: vec![500],
        estimators: vec![ece15()],
        seed: 3,
        ..SweepConfig::default()
    };
    let r = sweep(Source::Joint(&j), &cfg).map_err(|e| e.to_string())?;
    let ns: Vec<f64> = r.rows.iter().map(|x| x.n as f64).collect();
    let es: Vec<f64> = r.rows.iter().map(|x| x.mean).collect();
    if r.sizes != [100, 400, 1600, 6400] {
        return Err(format!("unexpected grid {:?}", r.sizes));
    }
    let decreasing = es.windows(2).all(|w| w[1] < w[0]);
    let slopes: Vec<f64> = (1..4).map(|i| (es[i] - es[i - 1]) / (ns[i] - ns[i - 1])).collect();
    let convex = slopes.windows(2).all(|w| w[1] > w[0]);

    // Two-class analytic joint: Monte-Carlo mean against the closed form.
    let atoms = (0..20)
        .map(|i| {
            let c = 0.52 + 0.46 * i as f64 / 19.0;
            let z = ProbVector::new(vec![c, 1.0 - c]).unwrap();
            let q = ProbVector::new(vec![c - 0.03, 1.03 - c]).unwrap();
            (z, 1.0, q)
        })
        .collect();
    let two = FiniteJointModel::from_weights(atoms).unwrap();
    let cfg2 = SweepConfig {
        min_size: 1000,
        max_size: Some(8000),
        ticks: 4,
        replicates: vec![2000],
        estimators: vec![ece15()],
        seed: 4,
        ..SweepConfig::default()
    };
    let r2 = sweep(Source::Joint(&two), &cfg2).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for row in &r2.rows {
        let mu = ece_bias_mu(&two, row.n as f64, 15).unwrap().mu_n;
        worst = worst.max((row.mean / mu - 1.0).abs());
    }
    check(
        decreasing && convex && worst < 0.10,
        format!("ECE {es:.4?} decreasing={decreasing} convex={convex}; max |MC/mu - 1| = {worst:.4} over n={:?}", r2.sizes),
    )
}

fn criterion_4() -> Outcome {
    let mut joints: Vec<FiniteJointModel> = (0..20u64).map(|k| random_joint(2 + k as usize % 4, 1 + k as usize % 8, k).unwrap()).collect();
    joints.push(counterexample(10, 0.05, 6, 1).unwrap());
    let m = logistic_normal_model(10, 0.01, 2).unwrap();
    joints.push(pool_joint(&m.sample_many(200, 3), 0.7).unwrap());
    let mut worst: f64 = 0.0;
    for j in &joints {
        for s in [ClassScore::Brier, ClassScore::Log] {
            let d = decompose(j, s).map_err(|e| e.to_string())?;
            worst = worst.max(d.residual().abs());
        }
    }
    check(worst < 1e-10, format!("{} joints x 2 scores, max residual {worst:.2e}", joints.len()))
}

fn criterion_5() -> Outcome {
    let mut worst_exact: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let cfg = SweepConfig {
        min_size: 500,
        max_size: Some(500),
        ticks: 1,
        replicates: vec![1000],
        estimators: vec![EstimatorConfig::Rbs],
        ..SweepConfig::default()
    };
    for k in 0..20u64 {
        let j = random_joint([2, 3, 5][k as usize % 3], 2 + k as usize % 7, 500 + k).unwrap();
        for t in [0.5, 2.0] {
            let map = RecalMap::temperature(t).unwrap();
            let jt = j.map_predictions(|p| map.apply_one(p)).unwrap();
            let ub = true_error(&j, TrueError::Brier).unwrap() - true_error(&jt, TrueError::Brier).unwrap();
            let ce = true_error(&j, TrueError::CeBrier).unwrap() - true_error(&jt, TrueError::CeBrier).unwrap();
            worst_exact = worst_exact.max((ub - ce).abs());
            let r = improvement_sweep(Source::Joint(&j), &[map], &SweepConfig { seed: k * 10 + t as u64, ..cfg.clone() })
                .map_err(|e| e.to_string())?;
            let row = &r.rows[0];
            let z = (row.squared.mean - ce).abs() / row.squared.se.unwrap();
            worst_z = worst_z.max(z);
        }
    }
    check(
        worst_exact <= 1e-9 && worst_z <= 3.0,
        format!("40 (joint, T) pairs: max |dU - dCE| {worst_exact:.1e}, max |sample - oracle| / SE {worst_z:.2}"),
    )
}

fn criterion_6() -> Outcome {
    let m = logistic_normal_model(100, 0.01, 0).unwrap();
    let pool = calibrated_labels(m.sample_many(10_000, 1), 2).unwrap();
    let tempered = calibra::synth::temper(&pool, 0.7).unwrap();
    let cfg = SweepConfig { estimators: vec![EstimatorConfig::Rbs, ece15()], seed: 6, ..SweepConfig::default() };
    let r = sweep(Source::Pool(&tempered), &cfg).map_err(|e| e.to_string())?;
    let rel = relative_bias(&r).map_err(|e| e.to_string())?;
    let rbs_worst = rel
        .iter()
        .filter(|x| x.estimator == "RBS" && x.n >= 400)
        .map(|x| (x.ratio.unwrap_or(f64::NAN) - 1.0).abs())
        .fold(0.0, f64::max);
    let ece100 = rel.iter().find(|x| x.estimator == "15b ECE" && x.n == 100).and_then(|x| x.ratio).unwrap_or(f64::NAN);
    check(
        rbs_worst < 0.03 && ece100 > 1.2,
        format!("RBS max |rel - 1| at n>=400: {rbs_worst:.4}; 15b ECE rel at n=100: {ece100:.3}"),
    )
}

fn skce_brute(data: &LabeledPredictions, nu: f64) -> f64 {
    let n = data.len();
    let rows: Vec<(&ProbVector, usize)> = data.iter().collect();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (p, y) = rows[i];
            let (q, z) = rows[j];
            let d2: f64 = p.iter().zip(q.iter()).map(|(a, b)| (a - b).powi(2)).sum();
            let dot: f64 = (0..p.len())
                .map(|c| (p[c] - (c == y) as u8 as f64) * (q[c] - (c == z) as u8 as f64))
                .sum();
            s += (-d2 / (2.0 * nu * nu)).exp() * dot;
        }
    }
    s / (n * (n - 1)) as f64
}

fn criterion_7() -> Outcome {
    let reps = 2000u64;
    let m = logistic_normal_model(5, 0.5, 7).unwrap();
    let j = pool_joint(&m.sample_many(500, 8), 1.0).unwrap();
    let cls: Vec<f64> = (0..reps).map(|r| skce(&sample(&j, 50, 10_000 + r).unwrap(), 1.0).unwrap()).collect();
    let kernel = SkceKernel::default();
    let reg: Vec<f64> = (0..reps)
        .map(|r| {
            let (p, y) = overconfident_gaussians(50, 1.0, 20_000 + r).unwrap();
            skce_regression(&p, &y, kernel).unwrap()
        })
        .collect();
    let z = |v: &[f64]| {
        let (mean, sd) = calibra::numeric::mean_sd(v);
        mean.abs() / (sd.unwrap() / (v.len() as f64).sqrt())
    };
    let (zc, zr) = (z(&cls), z(&reg));

    let mut brute: f64 = 0.0;
    for (r, n) in [(0u64, 2usize), (1, 10), (2, 30)] {
        let d = sample(&j, n, 30_000 + r).unwrap();
        brute = brute.max((skce(&d, 1.0).unwrap() - skce_brute(&d, 1.0)).abs());
        let (p, y) = overconfident_gaussians(n, 3.0, 40_000 + r).unwrap();
        brute = brute.max((skce_regression(&p, &y, kernel).unwrap() - skce_regression_pairs(&p, &y, kernel).unwrap()).abs());
    }
    check(
        zc <= 3.0 && zr <= 3.0 && brute <= 1e-12,
        format!("|mean|/SE classification {zc:.2}, regression {zr:.2}; max brute-force gap {brute:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let cfg = DemoConfig::default();
    let mut good = 0;
    let mut logs = Vec::new();
    for seed in 0..5 {
        let r = variance_demo(seed, &cfg).map_err(|e| e.to_string())?;
        let l = (r.test.calibrated.avg_var / r.test.raw.mse).ln();
        logs.push(l);
        if l.abs() < 2f64.ln() {
            good += 1;
        }
    }
    let (val_p, val_y) = overconfident_gaussians(1000, 4.0, 80).unwrap();
    let (test_p, test_y) = overconfident_gaussians(1000, 4.0, 81).unwrap();
    let map = fit_platt_variance(&val_p, &val_y).map_err(|e| e.to_string())?;
    let (cal, _) = apply_platt(&map, &test_p).map_err(|e| e.to_string())?;
    let raw_ratio = diagnostics(&test_p, &test_y).unwrap().ratio_mean;
    let cal_ratio = diagnostics(&cal, &test_y).unwrap().ratio_mean;
    check(
        good >= 4 && (0.5..=2.0).contains(&cal_ratio) && raw_ratio > 2.5,
        format!("log(avg_var/MSE) per seed {logs:.3?} ({good}/5 within log 2); SE/Var ratio raw {raw_ratio:.2}, calibrated {cal_ratio:.2}"),
    )
}

fn criterion_9() -> Outcome {
    let d = friedman1(5, 9, true).unwrap();
    let model = Mdn::new(d.dim(), 50, 9).with_output_bias(14.0, 2.0);
    let (_, g) = model.loss_and_grad(d.features(), d.targets());
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, gk) in g.iter().enumerate() {
        let mut plus = model.clone();
        plus.params_mut()[k] += step;
        let mut minus = model.clone();
        minus.params_mut()[k] -= step;
        let fd = (plus.loss_and_grad(d.features(), d.targets()).0 - minus.loss_and_grad(d.features(), d.targets()).0)
            / (2.0 * step);
        worst = worst.max((fd - gk).abs() / fd.abs().max(gk.abs()).max(1e-6));
    }
    check(worst < 1e-4, format!("{} parameters, max relative error {worst:.2e}", model.n_params()))
}

fn criterion_10() -> Outcome {
    // Calibrated four-class joint whose leftover mass sits on one class,
    // so spreading it evenly is far from the true conditional.
    let mut atoms = Vec::new();
    for k in 0..4 {
        let mut hi = vec![0.0; 4];
        hi[k] = 0.95;
        hi[(k + 1) % 4] = 0.05;
        let mut lo = vec![0.0; 4];
        lo[k] = 0.5;
        lo[(k + 1) % 4] = 0.45;
        lo[(k + 2) % 4] = 0.05;
        let (hi, lo) = (ProbVector::new(hi).unwrap(), ProbVector::new(lo).unwrap());
        atoms.push((hi.clone(), 0.8, hi));
        atoms.push((lo.clone(), 0.2, lo));
    }
    let j = FiniteJointModel::from_weights(atoms).unwrap();
    let map = tf_accuracy(4, j.accuracy()).unwrap();
    let jt = j.map_predictions(|p| map.apply_one(p)).unwrap();
    let ce2 = true_error(&jt, TrueError::CeP { p: 2.0 }).unwrap();
    let acc_same = (jt.accuracy() - j.accuracy()).abs() < 1e-12;

    let test = sample(&j, 10_000, 10).unwrap();
    let mapped = map.apply(&test).unwrap();
    let ece = evaluate(&mapped, &ece15()).unwrap();
    let sample_acc_same = mapped.accuracy() == test.accuracy();
    check(
        ece < 0.01 && ce2 > 0.2 && acc_same && sample_acc_same,
        format!("ECE after tf_accuracy {ece:.4}, oracle CE_2 {ce2:.4}, accuracy {:.4} preserved={}", j.accuracy(), acc_same && sample_acc_same),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 inequality chain", criterion_1, Duration::from_secs(10)),
        ("2 counterexample", criterion_2, Duration::from_secs(1)),
        ("3 ECE bias shape", criterion_3, Duration::from_secs(300)),
        ("4 decomposition identity", criterion_4, Duration::from_secs(1)),
        ("5 improvement equality", criterion_5, Duration::from_secs(120)),
        ("6 robustness sweep", criterion_6, Duration::from_secs(600)),
        ("7 SKCE unbiasedness", criterion_7, Duration::from_secs(120)),
        ("8 variance regression", criterion_8, Duration::from_secs(300)),
        ("9 gradient check", criterion_9, Duration::from_secs(5)),
        ("10 blunt transform", criterion_10, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (took <= budget, d),
            Err(d) => (false, d),
        };
        println!(
            "criterion {name}: {} ({detail}; {:.2}s of {}s)",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
        failed += !ok as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
