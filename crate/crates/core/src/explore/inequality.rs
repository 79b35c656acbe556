use std::collections::BTreeMap;
use std::io::Write;

use crate::contract::ContractRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzResult {
    /// `(population share, usage share)` from `(0, 0)` to `(1, 1)`.
    pub curve: Vec<(f64, f64)>,
    pub gini: f64,
}

pub fn gini_lorenz(usage: &[f64]) -> Result<LorenzResult> {
    if usage.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Invalid("usage counts must be finite and nonnegative".into()));
    }
    let mut x = usage.to_vec();
    x.sort_by(f64::total_cmp);
    let total: f64 = x.iter().sum();
    if total <= 0.0 {
        return Err(Error::Invalid("usage counts are all zero".into()));
    }
    let n = x.len();
    let weighted: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (i + 1) as f64 - n as f64 - 1.0) * v)
        .sum();
    let gini = weighted / (n as f64 * total);

    let mut curve = Vec::with_capacity(n + 1);
    curve.push((0.0, 0.0));
    let mut cum = 0.0;
    for (i, v) in x.iter().enumerate() {
        cum += v;
        curve.push(((i + 1) as f64 / n as f64, cum / total));
    }
    if let Some(last) = curve.last_mut() {
        last.1 = 1.0;
    }
    Ok(LorenzResult { curve, gini })
}

/// Contract count per rider, keyed and ordered by rider id.
pub fn usage_counts(records: &[ContractRecord]) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for r in records {
        *out.entry(r.rider_id.clone()).or_insert(0) += 1;
    }
    out
}

/// Values sorted descending and paired with their 1-based rank.
pub fn rank_frequency(counts: &[f64]) -> Vec<(usize, f64)> {
    let mut v = counts.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.into_iter().enumerate().map(|(i, c)| (i + 1, c)).collect()
}

/// Two-parameter Pareto law `P(X <= x) = 1 - (scale / x)^shape`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoFit {
    pub scale: f64,
    pub shape: f64,
    pub tail_points: usize,
}

impl ParetoFit {
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.scale {
            0.0
        } else {
            1.0 - (self.scale / x).powf(self.shape)
        }
    }
}

/// Maximum-likelihood shape over the values at or above `scale`. Without a
/// scale the sample minimum is used.
pub fn pareto_fit(values: &[f64], scale: Option<f64>) -> Result<ParetoFit> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite value in Pareto sample".into()));
    }
    let scale = match scale {
        Some(s) => s,
        None => values.iter().copied().fold(f64::INFINITY, f64::min),
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Invalid(format!("Pareto scale must be positive, got {scale}")));
    }
    let tail: Vec<f64> = values.iter().copied().filter(|&v| v >= scale).collect();
    if tail.len() < 2 {
        return Err(Error::Invalid(format!("Pareto fit needs at least 2 tail points, got {}", tail.len())));
    }
    let log_sum: f64 = tail.iter().map(|v| (v / scale).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::Invalid("all tail points equal the scale".into()));
    }
    Ok(ParetoFit { scale, shape: tail.len() as f64 / log_sum, tail_points: tail.len() })
}

pub fn write_lorenz_csv<W: Write>(dest: W, lorenz: &LorenzResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    w.write_record(["pop_share", "usage_share"])?;
    for (p, u) in &lorenz.curve {
        w.write_record([crate::forecast::format_float(*p), crate::forecast::format_float(*u)])?;
    }
    w.flush()?;
    Ok(())
}
