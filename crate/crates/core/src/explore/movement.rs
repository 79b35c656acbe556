use std::collections::BTreeMap;
use std::io::Write;

use crate::contract::ContractRecord;
use crate::error::{Error, Result};
use crate::forecast::format_float;
use crate::METERS_PER_DEGREE;

/// Start points of one rider's contracts, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct RiderTrack {
    pub rider_id: String,
    /// `(unix seconds, lon, lat)`
    pub points: Vec<(i64, f64, f64)>,
}

impl RiderTrack {
    pub fn new(rider_id: impl Into<String>, points: Vec<(i64, f64, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Invalid("track times must be strictly increasing".into()));
        }
        Ok(Self { rider_id: rider_id.into(), points })
    }

    /// Median gap between consecutive observations, in seconds.
    pub fn median_gap(&self) -> Option<f64> {
        let mut gaps: Vec<i64> = self.points.windows(2).map(|w| w[1].0 - w[0].0).collect();
        if gaps.is_empty() {
            return None;
        }
        gaps.sort_unstable();
        let m = gaps.len() / 2;
        Some(if gaps.len() % 2 == 1 { gaps[m] as f64 } else { (gaps[m - 1] + gaps[m]) as f64 / 2.0 })
    }
}

/// One track per rider, ordered by rider id. Repeated start times keep the
/// first record.
pub fn tracks_from_contracts(records: &[ContractRecord]) -> Vec<RiderTrack> {
    let mut by_rider: BTreeMap<&str, Vec<(i64, f64, f64)>> = BTreeMap::new();
    for r in records {
        by_rider.entry(&r.rider_id).or_default().push((r.start_time, r.start_lon, r.start_lat));
    }
    by_rider
        .into_iter()
        .map(|(id, mut pts)| {
            pts.sort_by_key(|p| p.0);
            pts.dedup_by_key(|p| p.0);
            RiderTrack { rider_id: id.to_owned(), points: pts }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceUnit {
    #[default]
    Degrees,
    Meters,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramBin {
    pub lag_seconds: f64,
    /// `None` when no pair falls in the bin.
    pub semivariance: Option<f64>,
    pub pairs: usize,
}

/// `count` lags at multiples of the median gap.
pub fn default_lags(track: &RiderTrack, count: usize) -> Vec<f64> {
    match track.median_gap() {
        Some(w) if w > 0.0 => (1..=count).map(|k| k as f64 * w).collect(),
        _ => Vec::new(),
    }
}

/// Half the mean squared displacement over pairs whose time gap lies in
/// `[lag - w/2, lag + w/2)`, where `w` is the median gap.
pub fn variogram(track: &RiderTrack, lags: &[f64], unit: DistanceUnit) -> Result<Vec<VariogramBin>> {
    if track.points.len() < 2 {
        return Err(Error::Invalid("variogram needs at least 2 points".into()));
    }
    if lags.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::Invalid("variogram lags must be positive".into()));
    }
    let width = track.median_gap().unwrap_or(0.0);
    let half = width / 2.0;
    let scale = match unit {
        DistanceUnit::Degrees => 1.0,
        DistanceUnit::Meters => METERS_PER_DEGREE,
    };
    let max_gap = lags.iter().copied().fold(0.0, f64::max) + half;
    let mut sums = vec![0.0; lags.len()];
    let mut pairs = vec![0usize; lags.len()];
    let pts = &track.points;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            let gap = (b.0 - a.0) as f64;
            if gap >= max_gap {
                break;
            }
            let d2 = ((b.1 - a.1) * scale).powi(2) + ((b.2 - a.2) * scale).powi(2);
            for (k, &lag) in lags.iter().enumerate() {
                if gap >= lag - half && gap < lag + half {
                    sums[k] += d2;
                    pairs[k] += 1;
                }
            }
        }
    }
    Ok(lags
        .iter()
        .zip(sums.iter().zip(&pairs))
        .map(|(&lag, (&s, &p))| VariogramBin {
            lag_seconds: lag,
            semivariance: (p > 0).then(|| s / (2.0 * p as f64)),
            pairs: p,
        })
        .collect())
}

pub fn write_variogram_csv<W: Write>(dest: W, bins: &[VariogramBin]) -> Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    w.write_record(["lag_seconds", "semivariance", "pairs"])?;
    for b in bins {
        w.write_record([
            format_float(b.lag_seconds),
            b.semivariance.map_or_else(|| "NA".into(), format_float),
            b.pairs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fit of `gamma(lag) = sigma2 * (1 - exp(-lag / tau))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuFit {
    pub sigma2: f64,
    pub tau: f64,
    pub rss: f64,
    /// The best `tau` sits on the edge of the search grid.
    pub degenerate: bool,
}

const GRID_POINTS: usize = 241;

fn ou_profile(points: &[(f64, f64)], tau: f64) -> (f64, f64) {
    let (mut fg, mut ff) = (0.0, 0.0);
    for &(lag, g) in points {
        let f = -(-lag / tau).exp_m1();
        fg += f * g;
        ff += f * f;
    }
    let sigma2 = if ff > 0.0 { fg / ff } else { 0.0 };
    let rss = points
        .iter()
        .map(|&(lag, g)| (g + sigma2 * (-lag / tau).exp_m1()).powi(2))
        .sum();
    (sigma2, rss)
}

/// Least squares over a log-spaced grid of `tau` spanning the lags by two
/// decades either side, refined by golden-section search.
pub fn fit_ou(points: &[(f64, f64)]) -> Result<OuFit> {
    if points.len() < 3 {
        return Err(Error::Invalid(format!("OU fit needs at least 3 lags, got {}", points.len())));
    }
    if points.iter().any(|(l, g)| !l.is_finite() || !g.is_finite() || *l <= 0.0) {
        return Err(Error::Invalid("OU fit needs finite points with positive lags".into()));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).ln() - 100f64.ln();
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max).ln() + 100f64.ln();
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let rss_at = |log_tau: f64| ou_profile(points, log_tau.exp()).1;

    let mut best = 0;
    let mut best_rss = f64::INFINITY;
    for i in 0..GRID_POINTS {
        let r = rss_at(lo + i as f64 * step);
        if r < best_rss {
            best = i;
            best_rss = r;
        }
    }
    let degenerate = best == 0 || best == GRID_POINTS - 1;
    let log_tau = if degenerate {
        lo + best as f64 * step
    } else {
        let (mut a, mut b) = (lo + (best - 1) as f64 * step, lo + (best + 1) as f64 * step);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (rss_at(c), rss_at(d));
        for _ in 0..200 {
            if b - a < 1e-13 {
                break;
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = rss_at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = rss_at(d);
            }
        }
        (a + b) / 2.0
    };
    let tau = log_tau.exp();
    let (sigma2, rss) = ou_profile(points, tau);
    Ok(OuFit { sigma2, tau, rss, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_track(n: i64, gap: i64, v: f64) -> RiderTrack {
        RiderTrack::new("r", (0..n).map(|i| (i * gap, 116.0 + v * (i * gap) as f64, 39.9)).collect()).unwrap()
    }

    #[test]
    fn track_validation() {
        assert!(RiderTrack::new("a", vec![(0, 0.0, 0.0), (0, 1.0, 1.0)]).is_err());
        let t = RiderTrack::new("a", vec![(0, 0.0, 0.0), (10, 0.0, 0.0), (40, 0.0, 0.0)]).unwrap();
        assert_eq!(t.median_gap(), Some(20.0));
    }

    #[test]
    fn stationary_track_has_zero_semivariance() {
        let t = RiderTrack::new("s", (0..20).map(|i| (i * 60, 116.3, 39.9)).collect()).unwrap();
        let v = variogram(&t, &default_lags(&t, 5), DistanceUnit::Degrees).unwrap();
        assert!(v.iter().all(|b| b.semivariance == Some(0.0)));
        assert_eq!(v[0].pairs, 19);
    }

    #[test]
    fn constant_velocity() {
        let speed = 1e-5;
        let t = line_track(50, 30, speed);
        let v = variogram(&t, &default_lags(&t, 6), DistanceUnit::Meters).unwrap();
        for b in &v {
            let want = (speed * METERS_PER_DEGREE * b.lag_seconds).powi(2) / 2.0;
            assert!((b.semivariance.unwrap() - want).abs() < 1e-9 * want);
        }
    }

    #[test]
    fn empty_bins_are_missing() {
        let t = line_track(4, 30, 1e-5);
        let v = variogram(&t, &[30.0, 45.0, 1000.0], DistanceUnit::Degrees).unwrap();
        assert_eq!(v[2], VariogramBin { lag_seconds: 1000.0, semivariance: None, pairs: 0 });
        assert!(variogram(&t, &[0.0], DistanceUnit::Degrees).is_err());
    }

    #[test]
    fn ou_exact_curve() {
        let (s2, tau) = (2.5e-4, 3600.0);
        let pts: Vec<(f64, f64)> = (1..=40).map(|k| {
            let lag = k as f64 * 600.0;
            (lag, s2 * (1.0 - (-lag / tau).exp()))
        }).collect();
        let f = fit_ou(&pts).unwrap();
        assert!(!f.degenerate);
        assert!((f.tau - tau).abs() < 1e-6 * tau, "{f:?}");
        assert!((f.sigma2 - s2).abs() < 1e-6 * s2);
        assert!(f.rss < 1e-20);
    }

    #[test]
    fn ou_flat_is_degenerate() {
        let pts: Vec<(f64, f64)> = (1..=10).map(|k| (k as f64, 3.0)).collect();
        let f = fit_ou(&pts).unwrap();
        assert!(f.degenerate);
        assert!((f.sigma2 - 3.0).abs() < 1e-12);
        assert!((f.tau - 0.01).abs() < 1e-12);
    }

    #[test]
    fn ou_errors() {
        assert!(fit_ou(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(fit_ou(&[(1.0, 1.0), (2.0, f64::NAN), (3.0, 1.0)]).is_err());
    }
}
