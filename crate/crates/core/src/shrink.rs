//! Threshold rules, threshold selection and pyramid shrinkage.
//!
//! The pointwise rules are the hard keep-or-kill rule
//! `d * I[|d| > lambda]` and the soft rule
//! `sgn(d) (|d| - lambda) I[|d| > lambda]`. Thresholds come from a manual
//! value, the universal threshold `sigma sqrt(2 ln n)`, a per-level
//! SURE-hybrid choice, or a global coefficient budget of `7 * 2^L` details.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::DemandTensor;
use crate::wavelet::{dwt3d, idwt3d, CoeffPyramid, FilterBank, Subband};

/// Normal-consistency constant of the median absolute deviation.
pub const MAD_SCALE: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    Hard,
    Soft,
}

impl FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hard" => Ok(Self::Hard),
            "soft" => Ok(Self::Soft),
            other => Err(Error::Threshold(format!("unknown rule `{other}` (hard|soft)"))),
        }
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hard => "hard",
            Self::Soft => "soft",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSource {
    Manual(f64),
    Universal,
    SureHybrid,
    /// Keep the `7 * 2^L` largest detail coefficients.
    Budget(u32),
}

impl FromStr for ThresholdSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Threshold(format!("bad source `{s}` (manual:<lambda>|universal|sure|budget:<L>)"));
        match s.split_once(':') {
            Some(("manual", v)) => v.trim().parse().map(Self::Manual).map_err(|_| bad()),
            Some(("budget", v)) => v.trim().parse().map(Self::Budget).map_err(|_| bad()),
            None if s == "universal" => Ok(Self::Universal),
            None if s == "sure" => Ok(Self::SureHybrid),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ThresholdSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Manual(l) => write!(f, "manual:{l}"),
            Self::Universal => f.write_str("universal"),
            Self::SureHybrid => f.write_str("sure"),
            Self::Budget(l) => write!(f, "budget:{l}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Fixed(f64),
    Estimate,
}

impl FromStr for Sigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "estimate" => Ok(Self::Estimate),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && v.is_finite())
                .map(Self::Fixed)
                .ok_or_else(|| Error::Threshold(format!("sigma must be `estimate` or a positive number, got `{v}`"))),
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(s) => write!(f, "{s}"),
            Self::Estimate => f.write_str("estimate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSpec {
    pub rule: ThresholdRule,
    pub source: ThresholdSource,
    pub sigma: Sigma,
    /// Inclusive range of thresholded levels (1 = finest); `None` means all.
    pub levels: Option<(usize, usize)>,
}

impl ThresholdSpec {
    pub fn new(rule: ThresholdRule, source: ThresholdSource) -> Self {
        Self { rule, source, sigma: Sigma::Estimate, levels: None }
    }

    pub fn budget(level: u32) -> Self {
        Self::new(ThresholdRule::Soft, ThresholdSource::Budget(level))
    }

    pub fn manual(rule: ThresholdRule, lambda: f64) -> Self {
        Self::new(rule, ThresholdSource::Manual(lambda))
    }

    fn level_range(&self, depth: usize) -> Result<(usize, usize)> {
        let (lo, hi) = self.levels.unwrap_or((1, depth));
        if lo == 0 || lo > hi || hi > depth {
            return Err(Error::Threshold(format!(
                "level range {lo}..={hi} is invalid for a {depth}-level pyramid"
            )));
        }
        Ok((lo, hi))
    }
}

/// Outcome of one shrinkage pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkReport {
    /// Nonzero detail coefficients left after thresholding.
    pub coefficients_retained: usize,
    /// Nonzero coefficients in the (never thresholded) approximation block.
    pub approximation_retained: usize,
    /// `binned records / coefficients_retained`, once a record count is supplied.
    pub compression_ratio: Option<f64>,
    /// Threshold applied at each level, finest first; `None` for untouched levels.
    pub threshold_used: Vec<Option<f64>>,
    pub sigma_used: f64,
    /// Set when the noise estimate came out as zero.
    pub sigma_degenerate: bool,
}

impl ShrinkReport {
    pub fn total_retained(&self) -> usize {
        self.coefficients_retained + self.approximation_retained
    }

    pub fn with_records(mut self, records: u64) -> Self {
        self.compression_ratio = compression_ratio(self.coefficients_retained, records).ok();
        self
    }
}

/// Applies the hard or soft rule to a single coefficient.
#[inline]
pub fn threshold_value(d: f64, lambda: f64, rule: ThresholdRule) -> f64 {
    if d.abs() > lambda {
        match rule {
            ThresholdRule::Hard => d,
            ThresholdRule::Soft => d.signum() * (d.abs() - lambda),
        }
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: f64,
    /// The finest HHH subband was identically zero.
    pub degenerate: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    let n = v.len();
    let cmp = |a: &f64, b: &f64| a.total_cmp(b);
    let (_, hi, _) = v.select_nth_unstable_by(n / 2, cmp);
    let hi = *hi;
    if n % 2 == 1 {
        return hi;
    }
    let lo = v[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    0.5 * (lo + hi)
}

/// Robust noise scale `median(|HHH_1|) / 0.6745` from the finest HHH subband.
pub fn estimate_sigma(pyramid: &CoeffPyramid) -> SigmaEstimate {
    let hhh = pyramid.detail(1, Subband::Hhh);
    let sigma = median(hhh.as_slice().iter().map(|v| v.abs()).collect()) / MAD_SCALE;
    SigmaEstimate { sigma, degenerate: sigma == 0.0 }
}

/// `sigma * sqrt(2 ln n)`.
pub fn universal_threshold(sigma: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Threshold(format!("universal threshold needs n >= 2, got {n}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Threshold(format!("sigma must be non-negative, got {sigma}")));
    }
    Ok(sigma * (2.0 * (n as f64).ln()).sqrt())
}

fn check_sure_input(d: &[f64], sigma: f64) -> Result<()> {
    if d.is_empty() {
        return Err(Error::Threshold("SURE needs at least one coefficient".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::Threshold(format!("SURE needs sigma > 0, got {sigma}")));
    }
    Ok(())
}

/// Minimizer of Stein's unbiased risk estimate for soft thresholding, without
/// the sparse-case fallback.
///
/// With `x = d / sigma`, the risk of threshold `t` is
/// `n - 2 #{|x_i| <= t} + sum_i min(x_i^2, t^2)`. It is minimized over
/// `{0} U {|x_i| : |x_i| <= sqrt(2 ln n)}`; ties go to the smaller `t`.
pub fn sure_minimizer(d: &[f64], sigma: f64) -> Result<f64> {
    check_sure_input(d, sigma)?;
    let n = d.len();
    let cap = (2.0 * (n as f64).ln()).sqrt();
    let mut a: Vec<f64> = d.iter().map(|v| (v / sigma).abs()).collect();
    a.sort_by(f64::total_cmp);

    let nf = n as f64;
    let zeros = a.iter().take_while(|v| **v == 0.0).count();
    let mut best_t = 0.0;
    let mut best = nf - 2.0 * zeros as f64;

    let mut below_sq = 0.0;
    let mut i = 0;
    while i < n && a[i] <= cap {
        let t = a[i];
        let mut j = i;
        while j < n && a[j] == t {
            below_sq += t * t;
            j += 1;
        }
        let risk = nf - 2.0 * j as f64 + below_sq + (n - j) as f64 * t * t;
        if risk < best {
            best = risk;
            best_t = t;
        }
        i = j;
    }
    Ok(sigma * best_t)
}

/// Whether the hybrid rule falls back to the universal threshold:
/// `(sum x_i^2 - n) / n <= (log2 n)^(3/2) / sqrt n`.
pub fn sure_is_sparse(d: &[f64], sigma: f64) -> bool {
    let n = d.len() as f64;
    let s: f64 = d.iter().map(|v| (v / sigma).powi(2) - 1.0).sum::<f64>() / n;
    s <= n.log2().powf(1.5) / n.sqrt()
}

/// SureShrink hybrid threshold.
pub fn sure_threshold(d: &[f64], sigma: f64) -> Result<f64> {
    check_sure_input(d, sigma)?;
    if d.len() >= 2 && sure_is_sparse(d, sigma) {
        return universal_threshold(sigma, d.len());
    }
    sure_minimizer(d, sigma)
}

pub fn compression_ratio(retained: usize, total_records: u64) -> Result<f64> {
    if retained == 0 {
        return Err(Error::Invalid("compression ratio with no retained coefficients".into()));
    }
    Ok(total_records as f64 / retained as f64)
}

/// Number of detail coefficients kept by `budget(L)`.
pub fn budget_size(level: u32) -> usize {
    7usize << level
}

fn apply_levels(p: &mut CoeffPyramid, lo: usize, hi: usize, lambda: &[f64], rule: ThresholdRule) {
    for level in lo..=hi {
        let lam = lambda[level - lo];
        for c in p.level_mut(level) {
            for v in c.as_mut_slice() {
                *v = threshold_value(*v, lam, rule);
            }
        }
    }
}

/// Keeps the `k` largest-magnitude details in `lo..=hi`; ties go to the
/// earlier coefficient in (level, subband, index) order. Returns the
/// magnitude of the largest discarded coefficient.
fn keep_top_k(p: &mut CoeffPyramid, lo: usize, hi: usize, k: usize, rule: ThresholdRule) -> f64 {
    let mut mags: Vec<(f64, usize)> = (lo..=hi)
        .flat_map(|level| p.level(level).iter())
        .flat_map(|c| c.as_slice().iter().map(|v| v.abs()))
        .enumerate()
        .map(|(i, m)| (m, i))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    let mut keep = vec![false; mags.len()];
    let mut lambda = 0.0;
    if k >= mags.len() {
        keep.fill(true);
    } else {
        let (top, nth, _) = mags.select_nth_unstable_by(k, order);
        lambda = nth.0;
        for (_, i) in top.iter() {
            keep[*i] = true;
        }
    }

    let mut i = 0;
    for level in lo..=hi {
        for c in p.level_mut(level) {
            for v in c.as_mut_slice() {
                *v = if !keep[i] {
                    0.0
                } else {
                    match rule {
                        ThresholdRule::Hard => *v,
                        ThresholdRule::Soft => v.signum() * (v.abs() - lambda).max(0.0),
                    }
                };
                i += 1;
            }
        }
    }
    lambda
}

/// Thresholds the detail subbands of a pyramid. The approximation block is
/// never touched.
///
/// With `budget(L)` and the soft rule the kept coefficients are shrunk by the
/// magnitude of the largest discarded one.
pub fn shrink_pyramid(pyramid: &CoeffPyramid, spec: &ThresholdSpec) -> Result<(CoeffPyramid, ShrinkReport)> {
    let depth = pyramid.levels();
    let (lo, hi) = spec.level_range(depth)?;
    let estimate = match spec.sigma {
        Sigma::Fixed(s) => SigmaEstimate { sigma: s, degenerate: false },
        Sigma::Estimate => estimate_sigma(pyramid),
    };
    let sigma = estimate.sigma;

    let mut out = pyramid.clone();
    let mut used = vec![None; depth];
    match spec.source {
        ThresholdSource::Manual(lambda) => {
            if !(lambda >= 0.0) {
                return Err(Error::Threshold(format!("manual threshold must be >= 0, got {lambda}")));
            }
            let lams = vec![lambda; hi - lo + 1];
            apply_levels(&mut out, lo, hi, &lams, spec.rule);
            used[lo - 1..hi].iter_mut().for_each(|u| *u = Some(lambda));
        }
        ThresholdSource::Universal => {
            let lambda = universal_threshold(sigma, pyramid.coefficient_count())?;
            let lams = vec![lambda; hi - lo + 1];
            apply_levels(&mut out, lo, hi, &lams, spec.rule);
            used[lo - 1..hi].iter_mut().for_each(|u| *u = Some(lambda));
        }
        ThresholdSource::SureHybrid => {
            let mut lams = Vec::with_capacity(hi - lo + 1);
            for level in lo..=hi {
                let pooled: Vec<f64> = pyramid
                    .level(level)
                    .iter()
                    .flat_map(|c| c.as_slice().iter().copied())
                    .collect();
                let lambda = if sigma > 0.0 { sure_threshold(&pooled, sigma)? } else { 0.0 };
                lams.push(lambda);
                used[level - 1] = Some(lambda);
            }
            apply_levels(&mut out, lo, hi, &lams, spec.rule);
        }
        ThresholdSource::Budget(level) => {
            let available: usize = (lo..=hi).map(|l| 7 * pyramid.level(l)[0].len()).sum();
            let k = budget_size(level.min(40));
            if level > 40 || k > available {
                return Err(Error::Threshold(format!(
                    "budget({level}) keeps {k} coefficients but only {available} details are in range"
                )));
            }
            let lambda = keep_top_k(&mut out, lo, hi, k, spec.rule);
            used[lo - 1..hi].iter_mut().for_each(|u| *u = Some(lambda));
        }
    }

    let report = ShrinkReport {
        coefficients_retained: out.detail_values().filter(|v| *v != 0.0).count(),
        approximation_retained: out.approx().as_slice().iter().filter(|v| **v != 0.0).count(),
        compression_ratio: None,
        threshold_used: used,
        sigma_used: sigma,
        sigma_degenerate: estimate.degenerate,
    };
    Ok((out, report))
}

/// Transform, threshold, reconstruct.
pub fn denoise(
    tensor: &DemandTensor,
    bank: &FilterBank,
    depth: usize,
    spec: &ThresholdSpec,
) -> Result<(DemandTensor, ShrinkReport)> {
    let pyramid = dwt3d(&tensor.counts, bank, depth)?;
    let (shrunk, report) = shrink_pyramid(&pyramid, spec)?;
    let counts = idwt3d(&shrunk, bank)?;
    Ok((DemandTensor::new(tensor.grid, counts)?, report))
}
