//! Test-set-size sweeps with repeated subsampling, relative-bias curves and
//! recalibration-improvement curves.

use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledPredictions, Split};
use crate::error::{Error, Result};
use crate::estimators::{evaluate, EstimatorConfig};
use crate::numeric::{derive_seed, mean_sd};
use crate::recal::{RecalMap, RecalMethod};
use crate::synth::FiniteJointModel;

/// Replicates per tick for the default ten-tick grid, smallest size first.
pub const DEFAULT_REPLICATES: [usize; 10] = [20000, 15842, 12168, 8978, 6272, 4050, 2312, 1058, 288, 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub min_size: usize,
    /// Largest tick; `None` means the whole dataset.
    pub max_size: Option<usize>,
    pub ticks: usize,
    /// One count per tick, or a single count used for every tick.
    pub replicates: Vec<usize>,
    pub seed: u64,
    pub estimators: Vec<EstimatorConfig>,
    /// Each estimator is also evaluated after each of these maps.
    pub maps: Vec<RecalMap>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            min_size: 100,
            max_size: None,
            ticks: 10,
            replicates: DEFAULT_REPLICATES.to_vec(),
            seed: 0,
            estimators: EstimatorConfig::standard_roster(),
            maps: Vec::new(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_size < 1 || self.ticks < 1 {
            return Err(Error::config("min size and tick count must be at least 1"));
        }
        if self.replicates.len() != 1 && self.replicates.len() != self.ticks {
            return Err(Error::config(format!(
                "{} replicate counts given for {} ticks",
                self.replicates.len(),
                self.ticks
            )));
        }
        if self.replicates.contains(&0) {
            return Err(Error::config("replicate counts must be positive"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("no estimators configured"));
        }
        for m in &self.maps {
            m.validate()?;
        }
        Ok(())
    }

    /// Tick sizes, evenly spaced in log2 between the minimum and the
    /// maximum, which defaults to `available`.
    pub fn sizes(&self, available: Option<usize>) -> Result<Vec<usize>> {
        self.validate()?;
        let max = match (self.max_size, available) {
            (Some(m), Some(a)) if m > a => {
                return Err(Error::config(format!("largest tick {m} exceeds the {a} available rows")))
            }
            (Some(m), _) => m,
            (None, Some(a)) => a,
            (None, None) => return Err(Error::config("a maximum size is needed when sampling from a joint")),
        };
        if self.min_size > max {
            return Err(Error::config(format!("minimum size {} exceeds maximum {max}", self.min_size)));
        }
        if self.ticks == 1 {
            return Ok(vec![max]);
        }
        let (lo, hi) = ((self.min_size as f64).log2(), (max as f64).log2());
        let step = (hi - lo) / (self.ticks - 1) as f64;
        let mut out: Vec<usize> = (0..self.ticks).map(|k| (lo + step * k as f64).exp2().round() as usize).collect();
        out[0] = self.min_size;
        out[self.ticks - 1] = max;
        for k in 1..out.len() {
            out[k] = out[k].clamp(out[k - 1], max);
        }
        Ok(out)
    }

    pub fn replicates_at(&self, tick: usize) -> usize {
        if self.replicates.len() == 1 {
            self.replicates[0]
        } else {
            self.replicates[tick]
        }
    }
}

/// Where subsamples come from.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    /// Draw without replacement from a fixed set.
    Pool(&'a LabeledPredictions),
    /// Draw fresh i.i.d. samples from a joint.
    Joint(&'a FiniteJointModel),
}

impl Source<'_> {
    fn available(&self) -> Option<usize> {
        match self {
            Source::Pool(d) => Some(d.len()),
            Source::Joint(_) => None,
        }
    }

    fn draw(&self, n: usize, seed: u64) -> Result<LabeledPredictions> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            Source::Pool(d) if n == d.len() => Ok((*d).clone()),
            Source::Pool(d) => d.select(&index::sample(&mut rng, d.len(), n).into_vec()),
            Source::Joint(j) => j.sampler().sample(n, &mut rng),
        }
    }
}

/// Mean and standard error over replicates. The SE is `None` with a single
/// replicate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let (mean, sd) = mean_sd(values);
        Stat { mean, se: sd.map(|s| s / (values.len() as f64).sqrt()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub estimator: String,
    /// Map kind, or `none`.
    pub map: String,
    pub n: usize,
    pub mean: f64,
    pub se: Option<f64>,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub rows: Vec<ReportRow>,
}

fn map_name(m: Option<&RecalMap>) -> String {
    m.map_or_else(|| "none".to_owned(), |m| m.kind().to_owned())
}

/// Runs every estimator, before and after every map, on `replicates`
/// subsamples of each tick size. Replicate `r` of tick `t` is seeded by
/// `derive_seed(seed, [t, r])`, so results do not depend on scheduling.
pub fn sweep(source: Source<'_>, cfg: &SweepConfig) -> Result<SweepReport> {
    let sizes = cfg.sizes(source.available())?;
    // For a pool, mapping once up front gives the same subsamples as mapping
    // each one.
    let mapped: Vec<LabeledPredictions> = match source {
        Source::Pool(d) => cfg.maps.iter().map(|m| m.apply(d)).collect::<Result<_>>()?,
        Source::Joint(_) => Vec::new(),
    };
    let combos = cfg.estimators.len() * (1 + cfg.maps.len());
    let mut rows = Vec::new();
    for (t, &n) in sizes.iter().enumerate() {
        let reps = cfg.replicates_at(t);
        let values: Vec<Vec<f64>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(cfg.seed, &[t as u64, r as u64]);
                let base = source.draw(n, seed)?;
                let mut views = vec![base.clone()];
                match source {
                    Source::Pool(_) => {
                        for m in &mapped {
                            views.push(source_subsample(m, n, seed)?);
                        }
                    }
                    Source::Joint(_) => {
                        for m in &cfg.maps {
                            views.push(m.apply(&base)?);
                        }
                    }
                }
                let mut out = Vec::with_capacity(combos);
                for v in &views {
                    for e in &cfg.estimators {
                        out.push(evaluate(v, e)?);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut k = 0;
        for m in std::iter::once(None).chain(cfg.maps.iter().map(Some)) {
            for e in &cfg.estimators {
                let col: Vec<f64> = values.iter().map(|v| v[k]).collect();
                let s = Stat::of(&col);
                rows.push(ReportRow {
                    estimator: e.label(),
                    map: map_name(m),
                    n,
                    mean: s.mean,
                    se: s.se,
                    replicates: reps,
                });
                k += 1;
            }
        }
    }
    Ok(SweepReport { seed: cfg.seed, sizes, rows })
}

fn source_subsample(pool: &LabeledPredictions, n: usize, seed: u64) -> Result<LabeledPredictions> {
    Source::Pool(pool).draw(n, seed)
}

/// One point of a relative-bias curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeRow {
    pub estimator: String,
    pub map: String,
    pub n: usize,
    /// `mean(n) / mean(max n)`; `None` when the divisor is zero.
    pub ratio: Option<f64>,
    pub defined: bool,
}

/// Divides each mean by the mean at the largest tick of the same
/// estimator and map.
pub fn relative_bias(report: &SweepReport) -> Result<Vec<RelativeRow>> {
    let max = *report.sizes.last().ok_or_else(|| Error::validation("empty report"))?;
    report
        .rows
        .iter()
        .map(|r| {
            let base = report
                .rows
                .iter()
                .find(|b| b.n == max && b.estimator == r.estimator && b.map == r.map)
                .ok_or_else(|| Error::validation(format!("no row at n={max} for {} / {}", r.estimator, r.map)))?;
            let defined = base.mean != 0.0;
            Ok(RelativeRow {
                estimator: r.estimator.clone(),
                map: r.map.clone(),
                n: r.n,
                ratio: defined.then(|| r.mean / base.mean),
                defined,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub estimator: String,
    pub map: String,
    pub n: usize,
    pub before: Stat,
    pub after: Stat,
    /// `e(before) - e(after)`.
    pub plain: Stat,
    /// `e(before)^2 - e(after)^2`.
    pub squared: Stat,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub maps: Vec<RecalMap>,
    /// Fingerprint of the rows the maps were fitted on, if any.
    pub validation_fingerprint: Option<String>,
    pub rows: Vec<ImprovementRow>,
}

/// Fits each method on the validation half of `split` and measures the
/// improvement on subsamples of the test half. `cfg.maps` is ignored.
pub fn improvement_sweep_split(split: &Split, methods: &[RecalMethod], cfg: &SweepConfig) -> Result<ImprovementReport> {
    let maps = methods.iter().map(|m| m.fit(&split.validation)).collect::<Result<Vec<_>>>()?;
    let mut report = improvement_sweep(Source::Pool(&split.test), &maps, cfg)?;
    report.validation_fingerprint = Some(split.validation.fingerprint());
    Ok(report)
}

/// Improvement of each estimator under each already-fitted map, per tick.
/// The same subsample is used before and after a map.
pub fn improvement_sweep(source: Source<'_>, maps: &[RecalMap], cfg: &SweepConfig) -> Result<ImprovementReport> {
    if maps.is_empty() {
        return Err(Error::config("no maps to evaluate"));
    }
    let sizes = cfg.sizes(source.available())?;
    let ne = cfg.estimators.len();
    let mut rows = Vec::new();
    for (t, &n) in sizes.iter().enumerate() {
        let reps = cfg.replicates_at(t);
        // Per replicate: before values, then after values for each map.
        let values: Vec<Vec<f64>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let base = source.draw(n, derive_seed(cfg.seed, &[t as u64, r as u64]))?;
                let mut out = Vec::with_capacity(ne * (1 + maps.len()));
                for e in &cfg.estimators {
                    out.push(evaluate(&base, e)?);
                }
                for m in maps {
                    let after = m.apply(&base)?;
                    for e in &cfg.estimators {
                        out.push(evaluate(&after, e)?);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (mi, m) in maps.iter().enumerate() {
            for (ei, e) in cfg.estimators.iter().enumerate() {
                let b: Vec<f64> = values.iter().map(|v| v[ei]).collect();
                let a: Vec<f64> = values.iter().map(|v| v[ne * (1 + mi) + ei]).collect();
                let plain: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
                let squared: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x * x - y * y).collect();
                rows.push(ImprovementRow {
                    estimator: e.label(),
                    map: m.kind().to_owned(),
                    n,
                    before: Stat::of(&b),
                    after: Stat::of(&a),
                    plain: Stat::of(&plain),
                    squared: Stat::of(&squared),
                    replicates: reps,
                });
            }
        }
    }
    Ok(ImprovementReport { seed: cfg.seed, sizes, maps: maps.to_vec(), validation_fingerprint: None, rows })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:?}"))
}

/// `estimator,map,n,mean,se,replicates`; an undefined SE is left empty.
pub fn write_report_csv<W: Write>(mut w: W, rows: &[ReportRow]) -> Result<()> {
    writeln!(w, "estimator,map,n,mean,se,replicates")?;
    for r in rows {
        writeln!(w, "{},{},{},{:?},{},{}", r.estimator, r.map, r.n, r.mean, opt(r.se), r.replicates)?;
    }
    Ok(())
}

pub fn write_improvement_csv<W: Write>(mut w: W, rows: &[ImprovementRow]) -> Result<()> {
    writeln!(w, "estimator,map,n,before,after,plain,plain_se,squared,squared_se,replicates")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:?},{:?},{:?},{},{:?},{},{}",
            r.estimator,
            r.map,
            r.n,
            r.before.mean,
            r.after.mean,
            r.plain.mean,
            opt(r.plain.se),
            r.squared.mean,
            opt(r.squared.se),
            r.replicates
        )?;
    }
    Ok(())
}

/// Long-format plot data, one point per line: `figure,estimator,map,x,y,se`.
/// Figures are `error` (mean estimate against n), `relative_error`
/// (mean over the largest-tick mean) and, for improvement reports,
/// `improvement` and `improvement_squared`.
pub fn write_sweep_plot_data<W: Write>(mut w: W, report: &SweepReport) -> Result<()> {
    writeln!(w, "figure,estimator,map,x,y,se")?;
    for r in &report.rows {
        writeln!(w, "error,{},{},{},{:?},{}", r.estimator, r.map, r.n, r.mean, opt(r.se))?;
    }
    for r in relative_bias(report)? {
        if let Some(y) = r.ratio {
            writeln!(w, "relative_error,{},{},{},{:?},", r.estimator, r.map, r.n, y)?;
        }
    }
    Ok(())
}

pub fn write_improvement_plot_data<W: Write>(mut w: W, report: &ImprovementReport) -> Result<()> {
    writeln!(w, "figure,estimator,map,x,y,se")?;
    for r in &report.rows {
        writeln!(w, "improvement,{},{},{},{:?},{}", r.estimator, r.map, r.n, r.plain.mean, opt(r.plain.se))?;
    }
    for r in &report.rows {
        writeln!(w, "improvement_squared,{},{},{},{:?},{}", r.estimator, r.map, r.n, r.squared.mean, opt(r.squared.se))?;
    }
    Ok(())
}
