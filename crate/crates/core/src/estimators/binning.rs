use serde::{Deserialize, Serialize};

use crate::dataset::LabeledPredictions;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningKind {
    EqualWidth,
    EqualMass,
}

/// How confidences are grouped into `m` bins.
///
/// Equal-width bin `i` (1-based) is `((i-1)/m, i/m]`, with confidence `0`
/// placed in the first bin. Equal-mass bins split the sorted confidences
/// into contiguous groups whose sizes differ by at most one; tied values at
/// a boundary all stay in the earlier bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningScheme {
    pub kind: BinningKind,
    pub m: usize,
}

impl BinningScheme {
    pub fn new(kind: BinningKind, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::config("bin count must be at least 1"));
        }
        Ok(BinningScheme { kind, m })
    }

    pub fn equal_width(m: usize) -> Result<Self> {
        Self::new(BinningKind::EqualWidth, m)
    }

    pub fn equal_mass(m: usize) -> Result<Self> {
        Self::new(BinningKind::EqualMass, m)
    }

    /// Bin index in `0..m` for every value.
    pub fn assign(&self, values: &[f64]) -> Vec<usize> {
        match self.kind {
            BinningKind::EqualWidth => values.iter().map(|&c| equal_width_bin(c, self.m)).collect(),
            BinningKind::EqualMass => equal_mass_bins(values, self.m),
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            BinningKind::EqualWidth => format!("{}b", self.m),
            BinningKind::EqualMass => format!("{}mb", self.m),
        }
    }
}

/// Zero-based equal-width bin of `c`.
pub fn equal_width_bin(c: f64, m: usize) -> usize {
    if c <= 0.0 {
        return 0;
    }
    let i = (c * m as f64).ceil() as usize;
    i.clamp(1, m) - 1
}

fn equal_mass_bins(values: &[f64], m: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable: ties keep their original order.
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0; n];
    let (base, extra) = (n / m, n % m);
    let mut start = 0;
    let mut target = 0;
    for bin in 0..m {
        target += base + usize::from(bin < extra);
        let mut end = target.max(start);
        if bin == m - 1 {
            end = n;
        }
        while end < n && end > 0 && values[order[end]] == values[order[end - 1]] {
            end += 1;
        }
        for &i in &order[start..end] {
            out[i] = bin;
        }
        start = end;
    }
    out
}

/// Which probability is binned and which event counts as a hit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    /// Top-label confidence against correctness of the argmax.
    TopLabel,
    /// Probability of class `k` against the event `Y = k`.
    Class(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bin {
    pub count: usize,
    /// Mean confidence.
    pub conf: f64,
    /// Empirical hit rate.
    pub acc: f64,
    /// `count / N`.
    pub freq: f64,
    /// Population variance of the confidences in the bin.
    pub var_conf: f64,
    /// `acc * (1 - acc)`.
    pub var_acc: f64,
}

impl Bin {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Per-bin summaries. Every one of the `m` bins is present; empty bins have
/// `count == 0` and zero statistics, and are skipped by all estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct BinStats {
    pub bins: Vec<Bin>,
    pub n: usize,
}

impl BinStats {
    pub fn nonempty(&self) -> impl Iterator<Item = &Bin> {
        self.bins.iter().filter(|b| !b.is_empty())
    }

    pub fn empty_count(&self) -> usize {
        self.bins.iter().filter(|b| b.is_empty()).count()
    }
}

/// Binned statistics of one channel of a dataset.
pub fn bin_stats(data: &LabeledPredictions, scheme: BinningScheme, channel: Channel) -> Result<BinStats> {
    if scheme.m < 1 {
        return Err(Error::config("bin count must be at least 1"));
    }
    let (values, hits) = channel_values(data, channel)?;
    Ok(bin_values(&values, &hits, scheme))
}

pub(crate) fn channel_values(data: &LabeledPredictions, channel: Channel) -> Result<(Vec<f64>, Vec<bool>)> {
    match channel {
        Channel::TopLabel => Ok(data
            .iter()
            .map(|(p, y)| {
                let (c, conf) = p.top_label();
                (conf, c == y)
            })
            .unzip()),
        Channel::Class(k) => {
            if k >= data.n_classes() {
                return Err(Error::Index { index: k, len: data.n_classes() });
            }
            Ok(data.iter().map(|(p, y)| (p[k], y == k)).unzip())
        }
    }
}

pub(crate) fn bin_values(values: &[f64], hits: &[bool], scheme: BinningScheme) -> BinStats {
    let idx = scheme.assign(values);
    let m = scheme.m;
    let mut count = vec![0usize; m];
    let mut sum = vec![0.0; m];
    let mut sum_hits = vec![0usize; m];
    for ((&b, &v), &h) in idx.iter().zip(values).zip(hits) {
        count[b] += 1;
        sum[b] += v;
        sum_hits[b] += usize::from(h);
    }
    let mean: Vec<f64> = (0..m).map(|b| if count[b] > 0 { sum[b] / count[b] as f64 } else { 0.0 }).collect();
    let mut ss = vec![0.0; m];
    for (&b, &v) in idx.iter().zip(values) {
        ss[b] += (v - mean[b]) * (v - mean[b]);
    }
    let n = values.len();
    let bins = (0..m)
        .map(|b| {
            if count[b] == 0 {
                return Bin { count: 0, conf: 0.0, acc: 0.0, freq: 0.0, var_conf: 0.0, var_acc: 0.0 };
            }
            let c = count[b] as f64;
            let acc = sum_hits[b] as f64 / c;
            Bin { count: count[b], conf: mean[b], acc, freq: c / n as f64, var_conf: ss[b] / c, var_acc: acc * (1.0 - acc) }
        })
        .collect();
    BinStats { bins, n }
}
