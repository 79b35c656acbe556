//! Persistence forecasts from a (denoised) tensor and their error metrics.
//!
//! The forecast for time `t + lead` is the denoised slice at `t`. Errors are
//! `truth[x, y, t + lead] - denoised[x, y, t]`.

use std::fmt;
use std::io::Write;
use std::ops::{Range, RangeInclusive};

use crate::error::{Error, Result};
use crate::explore::flatten_time;
use crate::grid::{Cube, DemandTensor};
use crate::shrink::{shrink_pyramid, ThresholdRule, ThresholdSource, ThresholdSpec};
use crate::wavelet::{dwt3d, idwt3d, FilterBank};

pub const REPORT_HEADER: [&str; 10] = [
    "level", "coeff", "compress", "mse", "mae", "skew", "kurt", "pct_mse", "pct_mae", "pct_skew",
];

pub const SURFACE_HEADER: [&str; 3] = ["period", "lead", "avg_error"];

/// Spatial slice at time `t`, used as the prediction for `t + lead`.
pub fn predict_at_lead(denoised: &DemandTensor, t: usize, lead: usize) -> Result<Vec<f64>> {
    let n = denoised.n();
    if t.checked_add(lead).is_none_or(|end| end >= n) {
        return Err(Error::OutOfRange(format!("t = {t} with lead {lead} leaves the {n}-step time axis")));
    }
    Ok(denoised.counts.time_slice(t))
}

/// First four error statistics. Kurtosis is the plain (non-excess) ratio
/// `m4 / m2^2`, so a Gaussian scores 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMoments {
    pub mse: f64,
    pub mae: f64,
    /// `None` when the errors have zero variance.
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

/// Two-pass moments over a re-iterable error stream.
fn moments_of<I, F>(errors: F) -> Result<ErrorMoments>
where
    I: Iterator<Item = f64>,
    F: Fn() -> I,
{
    let (mut count, mut sum, mut sq, mut abs) = (0usize, 0.0, 0.0, 0.0);
    for e in errors() {
        count += 1;
        sum += e;
        sq += e * e;
        abs += e.abs();
    }
    if count < 2 {
        return Err(Error::Invalid(format!("error moments need at least 2 values, got {count}")));
    }
    let n = count as f64;
    let mean = sum / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for e in errors() {
        let c = e - mean;
        let c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let mse = sq / n;
    let degenerate = m2 <= 1e-24 * mse || m2 == 0.0;
    Ok(ErrorMoments {
        mse,
        mae: abs / n,
        skewness: (!degenerate).then(|| m3 / m2.powf(1.5)),
        kurtosis: (!degenerate).then(|| m4 / (m2 * m2)),
    })
}

pub fn error_moments(errors: &[f64]) -> Result<ErrorMoments> {
    moments_of(|| errors.iter().copied())
}

fn check_pair(truth: &DemandTensor, denoised: &DemandTensor) -> Result<usize> {
    if truth.n() != denoised.n() {
        return Err(Error::Shape(format!("truth n = {} but denoised n = {}", truth.n(), denoised.n())));
    }
    Ok(truth.n())
}

/// Every `truth[x, y, t + period] - denoised[x, y, t]` in (x, y, t) order.
pub fn lagged_errors<'a>(truth: &'a Cube, denoised: &'a Cube, period: usize) -> impl Iterator<Item = f64> + 'a {
    window_errors(truth, denoised, period, period, false)
}

/// Like [`lagged_errors`], restricted to targets `t + period >= first_target`.
fn window_errors<'a>(
    truth: &'a Cube,
    denoised: &'a Cube,
    period: usize,
    first_target: usize,
    clamp: bool,
) -> impl Iterator<Item = f64> + 'a {
    let n = truth.side();
    let first_target = first_target.max(period).min(n);
    let skip = first_target - period;
    (0..n * n).flat_map(move |xy| {
        let tr = &truth.as_slice()[xy * n + first_target..(xy + 1) * n];
        let de = &denoised.as_slice()[xy * n + skip..xy * n + skip + tr.len()];
        tr.iter().zip(de).map(move |(a, b)| a - if clamp { b.max(0.0) } else { *b })
    })
}

/// Evaluation-time adjustments. The default scores every valid target with
/// the forecast as reconstructed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Replace negative forecast values by zero.
    pub clamp: bool,
    /// Score only targets in the final quarter of the time axis.
    pub holdout: bool,
}

impl EvalOptions {
    fn first_target(&self, n: usize) -> usize {
        if self.holdout {
            n - n / 4
        } else {
            0
        }
    }
}

/// Error statistics of the persistence forecast at lead `period`.
pub fn evaluate_periodicity(truth: &DemandTensor, denoised: &DemandTensor, period: usize) -> Result<ErrorMoments> {
    evaluate_periodicity_with(truth, denoised, period, EvalOptions::default())
}

pub fn evaluate_periodicity_with(
    truth: &DemandTensor,
    denoised: &DemandTensor,
    period: usize,
    options: EvalOptions,
) -> Result<ErrorMoments> {
    let n = check_pair(truth, denoised)?;
    if period == 0 || period >= n {
        return Err(Error::OutOfRange(format!("period {period} must be in 1..{n}")));
    }
    let first = options.first_target(n);
    moments_of(|| window_errors(&truth.counts, &denoised.counts, period, first, options.clamp))
}

/// Row label of an evaluation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelLabel {
    Budget(u32),
    Unthresholded,
}

impl fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Budget(l) => write!(f, "{l}"),
            Self::Unthresholded => f.write_str("none"),
        }
    }
}

/// One row of a compression/error table.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub period: usize,
    pub level: LevelLabel,
    /// Retained detail coefficients; `None` means all of them.
    pub coeff: Option<usize>,
    pub compress: Option<f64>,
    pub moments: ErrorMoments,
    pub pct_mse: Option<f64>,
    pub pct_mae: Option<f64>,
    pub pct_skew: Option<f64>,
}

fn relative(value: f64, base: f64) -> Option<f64> {
    (base != 0.0 && value.is_finite()).then(|| (value - base) / base)
}

impl EvalReport {
    pub fn new(period: usize, level: LevelLabel, coeff: Option<usize>, compress: Option<f64>, moments: ErrorMoments) -> Self {
        Self { period, level, coeff, compress, moments, pct_mse: None, pct_mae: None, pct_skew: None }
    }

    /// Fills the relative-change columns against the unthresholded row.
    pub fn relative_to(mut self, base: &ErrorMoments) -> Self {
        self.pct_mse = relative(self.moments.mse, base.mse);
        self.pct_mae = relative(self.moments.mae, base.mae);
        self.pct_skew = match (self.moments.skewness, base.skewness) {
            (Some(s), Some(b)) => relative(s, b),
            _ => None,
        };
        self
    }
}

/// Settings of a level sweep.
#[derive(Debug, Clone)]
pub struct LevelSweep {
    pub bank: FilterBank,
    pub depth: usize,
    pub rule: ThresholdRule,
    pub levels: Vec<u32>,
    pub periods: Vec<usize>,
    /// Binned record count for the compression column.
    pub records: u64,
    pub options: EvalOptions,
}

/// Builds one table per period: a row per budget level plus the
/// unthresholded baseline, which is the raw tensor itself.
pub fn evaluate_levels(truth: &DemandTensor, sweep: &LevelSweep) -> Result<Vec<Vec<EvalReport>>> {
    let pyramid = dwt3d(&truth.counts, &sweep.bank, sweep.depth)?;
    let baselines: Vec<ErrorMoments> = sweep
        .periods
        .iter()
        .map(|&p| evaluate_periodicity_with(truth, truth, p, sweep.options))
        .collect::<Result<_>>()?;
    let mut tables: Vec<Vec<EvalReport>> = vec![Vec::new(); sweep.periods.len()];
    for &level in &sweep.levels {
        let spec = ThresholdSpec::new(sweep.rule, ThresholdSource::Budget(level));
        let (shrunk, report) = shrink_pyramid(&pyramid, &spec)?;
        let report = report.with_records(sweep.records);
        let denoised = DemandTensor::new(truth.grid, idwt3d(&shrunk, &sweep.bank)?)?;
        for (i, &p) in sweep.periods.iter().enumerate() {
            let m = evaluate_periodicity_with(truth, &denoised, p, sweep.options)?;
            let row = EvalReport::new(
                p,
                LevelLabel::Budget(level),
                Some(report.coefficients_retained),
                report.compression_ratio,
                m,
            );
            tables[i].push(row.relative_to(&baselines[i]));
        }
    }
    for (i, &p) in sweep.periods.iter().enumerate() {
        let row = EvalReport::new(p, LevelLabel::Unthresholded, None, None, baselines[i]);
        tables[i].push(row.relative_to(&baselines[i]));
    }
    Ok(tables)
}

/// Signed spatial-mean forecast error over (start time, lead).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSurface {
    pub periods: Range<usize>,
    pub leads: RangeInclusive<usize>,
    /// Row-major by period then lead; `None` where `t + lead` leaves the axis.
    pub values: Vec<Option<f64>>,
}

impl ErrorSurface {
    pub fn lead_count(&self) -> usize {
        self.leads.clone().count()
    }

    pub fn get(&self, t: usize, lead: usize) -> Option<f64> {
        if !self.periods.contains(&t) || !self.leads.contains(&lead) {
            return None;
        }
        let i = (t - self.periods.start) * self.lead_count() + (lead - self.leads.start());
        self.values[i]
    }

    /// Mean of squared surface values at each lead, over the periods where
    /// the entry is defined.
    pub fn lead_profile(&self) -> Vec<(usize, f64)> {
        self.leads
            .clone()
            .filter_map(|lead| {
                let vals: Vec<f64> = self.periods.clone().filter_map(|t| self.get(t, lead)).collect();
                (!vals.is_empty()).then(|| (lead, vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64))
            })
            .collect()
    }
}

/// Half the time axis of start periods and up to 500 leads, capped at half
/// the axis.
pub fn default_surface_ranges(n: usize) -> (Range<usize>, RangeInclusive<usize>) {
    (0..n / 2, 1..=(n / 2).min(500))
}

/// Entry `(t, lead)` is the mean over all `n^2` cells of
/// `truth[., ., t + lead] - denoised[., ., t]`.
pub fn error_surface(
    truth: &DemandTensor,
    denoised: &DemandTensor,
    periods: Range<usize>,
    leads: RangeInclusive<usize>,
) -> Result<ErrorSurface> {
    let n = check_pair(truth, denoised)?;
    if periods.is_empty() || periods.end > n {
        return Err(Error::OutOfRange(format!("periods {periods:?} outside 0..{n}")));
    }
    if leads.is_empty() || *leads.end() >= n {
        return Err(Error::OutOfRange(format!("leads {leads:?} outside 0..{n}")));
    }
    let tt = flatten_time(truth);
    let dt = flatten_time(denoised);
    let cells = (n * n) as f64;
    let mut values = Vec::with_capacity(periods.len() * leads.clone().count());
    for t in periods.clone() {
        for lead in leads.clone() {
            values.push((t + lead < n).then(|| (tt[t + lead] - dt[t]) / cells));
        }
    }
    Ok(ErrorSurface { periods, leads, values })
}

/// Plain decimal with ten significant digits; exponent form far from 1.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return "NA".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        format!("{:.*}", (9 - mag).max(0) as usize, v)
    } else {
        format!("{v:.9e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), format_float)
}

pub fn write_report_csv<W: Write>(dest: W, rows: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            r.coeff.map_or_else(|| "all".into(), |c| c.to_string()),
            r.compress.map_or_else(|| "NA".into(), |c| format!("{}", c.round())),
            format_float(r.moments.mse),
            format_float(r.moments.mae),
            opt(r.moments.skewness),
            opt(r.moments.kurtosis),
            opt(r.pct_mse),
            opt(r.pct_mae),
            opt(r.pct_skew),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format, undefined entries omitted.
pub fn write_surface_csv<W: Write>(dest: W, surface: &ErrorSurface) -> Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    w.write_record(SURFACE_HEADER)?;
    for t in surface.periods.clone() {
        for lead in surface.leads.clone() {
            if let Some(v) = surface.get(t, lead) {
                w.write_record([t.to_string(), lead.to_string(), format_float(v)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
