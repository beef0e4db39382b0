use super::binning::{bin_values, channel_values, BinStats, BinningScheme, Channel};
use crate::dataset::LabeledPredictions;
use crate::error::{Error, Result};

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::config(format!("exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

fn lp_sum(stats: &BinStats, p: f64) -> f64 {
    stats.nonempty().map(|b| b.freq * (b.conf - b.acc).abs().powf(p)).sum()
}

/// Binned top-label error `sum_i p_i |conf_i - acc_i|`.
pub fn ece(data: &LabeledPredictions, scheme: BinningScheme) -> Result<f64> {
    let stats = super::bin_stats(data, scheme, Channel::TopLabel)?;
    Ok(lp_sum(&stats, 1.0))
}

/// Binned top-label `L^p` error.
///
/// With `debias`, each bin's squared deviation is reduced by the plug-in
/// variance `acc (1 - acc) / (n_i - 1)` (zero for single-item bins) and the
/// sum is clamped at zero before the square root. Debiasing is only defined
/// for `p = 2`.
pub fn tce(data: &LabeledPredictions, p: f64, scheme: BinningScheme, debias: bool) -> Result<f64> {
    check_p(p)?;
    if debias && p != 2.0 {
        return Err(Error::Unsupported(format!("debiasing is only defined for p = 2, got p = {p}")));
    }
    let stats = super::bin_stats(data, scheme, Channel::TopLabel)?;
    if !debias {
        return Ok(lp_sum(&stats, p).powf(1.0 / p));
    }
    let s: f64 = stats
        .nonempty()
        .map(|b| {
            let var = if b.count > 1 { b.var_acc / (b.count - 1) as f64 } else { 0.0 };
            b.freq * ((b.conf - b.acc).powi(2) - var)
        })
        .sum();
    Ok(s.max(0.0).sqrt())
}

/// Class-wise error: every probability channel is binned against the event
/// `Y = k` and the per-channel `L^p` sums are added without averaging.
pub fn cwce(data: &LabeledPredictions, p: f64, scheme: BinningScheme) -> Result<f64> {
    check_p(p)?;
    let mut s = 0.0;
    for k in 0..data.n_classes() {
        let (v, h) = channel_values(data, Channel::Class(k))?;
        s += lp_sum(&bin_values(&v, &h, scheme), p);
    }
    Ok(s.powf(1.0 / p))
}

/// Number of empty bins over the channels an estimator looks at.
pub(crate) fn empty_bins(data: &LabeledPredictions, scheme: BinningScheme, class_wise: bool) -> Result<usize> {
    if !class_wise {
        return Ok(super::bin_stats(data, scheme, Channel::TopLabel)?.empty_count());
    }
    let mut e = 0;
    for k in 0..data.n_classes() {
        let (v, h) = channel_values(data, Channel::Class(k))?;
        e += bin_values(&v, &h, scheme).empty_count();
    }
    Ok(e)
}
