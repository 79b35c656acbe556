//! Seeded synthetic populations with planted periodic demand.
//!
//! Habitual riders start a contract every `period` time cells from a home
//! range that follows an Ornstein-Uhlenbeck process. Casual riders start a
//! Poisson number of contracts uniformly in space and time. Every rider draws
//! from its own ChaCha stream keyed by (seed, class, index).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::contract::{bin_contracts, ContractRecord};
use crate::error::{Error, Result};
use crate::explore::RiderTrack;
use crate::grid::{DemandTensor, GridSpec};

pub const DEFAULT_PERIODS: [usize; 4] = [10, 18, 36, 247];

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationConfig {
    pub n_habitual: usize,
    pub n_casual: usize,
    /// Planted cycle lengths in time cells, assigned to habitual riders in turn.
    pub periods: Vec<usize>,
    /// Stationary standard deviation of the home-range offset, in degrees.
    pub ou_sigma: f64,
    /// Mean-reversion time in seconds.
    pub ou_tau: f64,
    /// Mean contracts per casual rider.
    pub casual_rate: f64,
    pub seed: u64,
    pub grid: GridSpec,
    /// Start-time offset from the cell centre as a fraction of half a cell.
    /// At most 1, so contracts stay in their planted cell.
    pub jitter: f64,
    /// Share of each cycle that phases are drawn from; small values bunch
    /// habitual riders into a common rush slot.
    pub phase_spread: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            n_habitual: 300,
            n_casual: 2000,
            periods: DEFAULT_PERIODS.to_vec(),
            ou_sigma: 0.01,
            ou_tau: 6.0 * 3600.0,
            casual_rate: 1.5,
            seed: 0,
            grid: GridSpec::beijing().with_n(64),
            jitter: 1.0,
            phase_spread: 1.0,
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.periods.is_empty() && self.n_habitual > 0 {
            return Err(Error::Invalid("habitual riders need at least one period".into()));
        }
        if let Some(p) = self.periods.iter().find(|p| **p < 2) {
            return Err(Error::Invalid(format!("period {p} is shorter than 2 steps")));
        }
        if !(self.ou_sigma >= 0.0 && self.ou_sigma.is_finite()) {
            return Err(Error::Invalid(format!("ou_sigma must be >= 0, got {}", self.ou_sigma)));
        }
        if !(self.ou_tau > 0.0 && self.ou_tau.is_finite()) {
            return Err(Error::Invalid(format!("ou_tau must be > 0, got {}", self.ou_tau)));
        }
        if !(self.casual_rate >= 0.0 && self.casual_rate.is_finite()) {
            return Err(Error::Invalid(format!("casual_rate must be >= 0, got {}", self.casual_rate)));
        }
        if !(self.phase_spread > 0.0 && self.phase_spread <= 1.0) {
            return Err(Error::Invalid(format!("phase_spread must be in (0, 1], got {}", self.phase_spread)));
        }
        if !(0.0..=1.0).contains(&self.jitter) {
            return Err(Error::Invalid(format!("jitter must be in [0, 1], got {}", self.jitter)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiderClass {
    Habitual { period: usize, phase: usize },
    Casual,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiderLabel {
    pub rider_id: String,
    pub class: RiderClass,
    pub contracts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Binned habitual contracts only.
    pub habitual: DemandTensor,
    /// Binned contracts of every rider.
    pub observed: DemandTensor,
    pub labels: Vec<RiderLabel>,
    /// Habitual contracts per time cell, split by planted period.
    pub cycle_series: BTreeMap<usize, Vec<f64>>,
}

impl GroundTruth {
    /// Usage counts of riders with at least one contract, optionally only
    /// the habitual ones.
    pub fn usage(&self, habitual_only: bool) -> Vec<f64> {
        self.labels
            .iter()
            .filter(|l| l.contracts > 0 && (!habitual_only || matches!(l.class, RiderClass::Habitual { .. })))
            .map(|l| l.contracts as f64)
            .collect()
    }
}

const HABITUAL_STREAM: u64 = 1 << 32;
const CASUAL_STREAM: u64 = 2 << 32;

fn rider_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Whole second inside time cell `k`, offset from the centre by
/// `offset * half a cell`.
fn second_in_cell(grid: &GridSpec, k: usize, offset: f64) -> i64 {
    let span = (grid.t_max - grid.t_min) as i128;
    let n = grid.n as i128;
    let lo = grid.t_min + ((k as i128 * span + n - 1) / n) as i64;
    let hi = grid.t_min + (((k as i128 + 1) * span + n - 1) / n) as i64 - 1;
    let s = (grid.time_cell_start(k) + (0.5 + offset / 2.0) * grid.time_step_seconds()).floor() as i64;
    s.clamp(lo, hi.max(lo))
}

/// One exact OU step per coordinate.
fn ou_step(rng: &mut ChaCha8Rng, x: f64, dt: f64, sigma: f64, tau: f64) -> f64 {
    let decay = (-dt / tau).exp();
    let sd = sigma * (-(-2.0 * dt / tau).exp_m1()).sqrt();
    x * decay + sd * Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

/// OU home-range path sampled at `times`, starting from the stationary law.
pub fn simulate_ou_track(
    rider_id: &str,
    home: (f64, f64),
    sigma: f64,
    tau: f64,
    times: &[i64],
    seed: u64,
) -> Result<RiderTrack> {
    if !(sigma >= 0.0 && tau > 0.0) {
        return Err(Error::Invalid("OU track needs sigma >= 0 and tau > 0".into()));
    }
    let mut rng = rider_rng(seed, 0);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut dx, mut dy) = (sigma * unit.sample(&mut rng), sigma * unit.sample(&mut rng));
    let mut points = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            let dt = (t - times[i - 1]) as f64;
            dx = ou_step(&mut rng, dx, dt, sigma, tau);
            dy = ou_step(&mut rng, dy, dt, sigma, tau);
        }
        points.push((t, home.0 + dx, home.1 + dy));
    }
    RiderTrack::new(rider_id, points)
}

fn trip_end(rng: &mut ChaCha8Rng, grid: &GridSpec, start: (i64, f64, f64)) -> (i64, f64, f64) {
    let minutes = rng.random_range(5..=45);
    let lon = (start.1 + rng.random_range(-0.01..=0.01)).clamp(grid.lon_min, grid.lon_max);
    let lat = (start.2 + rng.random_range(-0.01..=0.01)).clamp(grid.lat_min, grid.lat_max);
    (start.0 + 60 * minutes, lon, lat)
}

fn record(rider: &str, rng: &mut ChaCha8Rng, grid: &GridSpec, start: (i64, f64, f64)) -> ContractRecord {
    let end = trip_end(rng, grid, start);
    ContractRecord {
        rider_id: rider.to_owned(),
        bike_id: format!("b{:06}", rng.random_range(0..1_000_000u32)),
        start_time: start.0,
        start_lon: start.1,
        start_lat: start.2,
        end_time: end.0,
        end_lon: end.1,
        end_lat: end.2,
    }
}

fn habitual_rider(cfg: &PopulationConfig, index: usize) -> (Vec<ContractRecord>, RiderLabel) {
    let g = &cfg.grid;
    let id = format!("h{index:06}");
    let mut rng = rider_rng(cfg.seed, HABITUAL_STREAM | index as u64);
    let period = cfg.periods[index % cfg.periods.len()];
    let slots = ((cfg.phase_spread * period as f64).ceil() as usize).clamp(1, period);
    let phase = rng.random_range(0..slots);
    let home_lon = g.lon_min + (g.lon_max - g.lon_min) * rng.random_range(0.1..0.9);
    let home_lat = g.lat_min + (g.lat_max - g.lat_min) * rng.random_range(0.1..0.9);
    let times: Vec<i64> = (phase..g.n)
        .step_by(period)
        .map(|k| second_in_cell(g, k, cfg.jitter * rng.random_range(-1.0..1.0)))
        .collect();
    let track = simulate_ou_track(&id, (home_lon, home_lat), cfg.ou_sigma, cfg.ou_tau, &times, rng.random())
        .expect("validated OU parameters and increasing cell times");
    let records = track
        .points
        .iter()
        .map(|&(t, lon, lat)| {
            let start = (t, lon.clamp(g.lon_min, g.lon_max), lat.clamp(g.lat_min, g.lat_max));
            record(&id, &mut rng, g, start)
        })
        .collect::<Vec<_>>();
    let label = RiderLabel { rider_id: id, class: RiderClass::Habitual { period, phase }, contracts: records.len() };
    (records, label)
}

fn casual_rider(cfg: &PopulationConfig, index: usize) -> (Vec<ContractRecord>, RiderLabel) {
    let g = &cfg.grid;
    let id = format!("c{index:06}");
    let mut rng = rider_rng(cfg.seed, CASUAL_STREAM | index as u64);
    let count = if cfg.casual_rate > 0.0 {
        Poisson::new(cfg.casual_rate).expect("positive rate").sample(&mut rng) as usize
    } else {
        0
    };
    let mut starts: Vec<(i64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.random_range(g.t_min..g.t_max),
                rng.random_range(g.lon_min..g.lon_max),
                rng.random_range(g.lat_min..g.lat_max),
            )
        })
        .collect();
    starts.sort_by_key(|s| s.0);
    let records: Vec<ContractRecord> = starts.into_iter().map(|s| record(&id, &mut rng, g, s)).collect();
    let label = RiderLabel { rider_id: id, class: RiderClass::Casual, contracts: records.len() };
    (records, label)
}

/// Contracts ordered by rider (habitual first) then start time, with the
/// binned ground truth.
pub fn simulate_population(cfg: &PopulationConfig) -> Result<(Vec<ContractRecord>, GroundTruth)> {
    cfg.validate()?;
    let riders: Vec<(Vec<ContractRecord>, RiderLabel)> = (0..cfg.n_habitual)
        .map(|i| habitual_rider(cfg, i))
        .chain((0..cfg.n_casual).map(|i| casual_rider(cfg, i)))
        .collect();

    let mut cycle_series: BTreeMap<usize, Vec<f64>> =
        cfg.periods.iter().map(|&p| (p, vec![0.0; cfg.grid.n])).collect();
    let mut habitual_records = Vec::new();
    let mut records = Vec::new();
    let mut labels = Vec::with_capacity(riders.len());
    for (recs, label) in riders {
        if let RiderClass::Habitual { period, .. } = label.class {
            let series = cycle_series.get_mut(&period).expect("period registered");
            for r in &recs {
                if let Some(t) = cfg.grid.time_cell(r.start_time) {
                    series[t] += 1.0;
                }
            }
            habitual_records.extend(recs.iter().cloned());
        }
        records.extend(recs);
        labels.push(label);
    }
    let habitual = bin_contracts(&habitual_records, &cfg.grid)?.tensor;
    let observed = bin_contracts(&records, &cfg.grid)?.tensor;
    Ok((records, GroundTruth { habitual, observed, labels, cycle_series }))
}

/// True when the habitual demand planted with `period` repeats exactly
/// every `period` cells over the part of the axis both copies cover.
pub fn planted_cycle_check(truth: &GroundTruth, period: usize) -> bool {
    match truth.cycle_series.get(&period) {
        Some(s) => period > 0 && s.iter().zip(s.iter().skip(period)).all(|(a, b)| a == b),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(period: usize, jitter: f64, sigma: f64) -> PopulationConfig {
        PopulationConfig {
            n_habitual: 1,
            n_casual: 0,
            periods: vec![period],
            ou_sigma: sigma,
            jitter,
            seed: 7,
            ..PopulationConfig::default()
        }
    }

    #[test]
    fn lone_rider_hits_one_cell() {
        let (records, truth) = simulate_population(&single(36, 0.0, 0.0)).unwrap();
        let RiderClass::Habitual { phase, .. } = truth.labels[0].class else { panic!() };
        let n = truth.observed.n();
        let mut cells = std::collections::BTreeSet::new();
        for x in 0..n {
            for y in 0..n {
                for t in 0..n {
                    if truth.observed.counts.get(x, y, t) != 0.0 {
                        cells.insert((x, y));
                        assert_eq!(t % 36, phase);
                    }
                }
            }
        }
        assert_eq!(cells.len(), 1);
        assert_eq!(records.len(), (phase..n).step_by(36).count());
        assert!(planted_cycle_check(&truth, 36));
    }

    #[test]
    fn jitter_stays_in_cell() {
        let g = GridSpec::beijing().with_n(64);
        for k in [0, 1, 31, 63] {
            for off in [-1.0, -0.5, 0.0, 0.999, 1.0] {
                assert_eq!(g.time_cell(second_in_cell(&g, k, off)), Some(k));
            }
        }
        let (_, truth) = simulate_population(&PopulationConfig { n_casual: 0, ..Default::default() }).unwrap();
        for p in DEFAULT_PERIODS {
            assert!(planted_cycle_check(&truth, p));
        }
    }

    #[test]
    fn shuffled_slices_break_the_cycle() {
        let (_, mut truth) = simulate_population(&PopulationConfig { n_casual: 0, ..Default::default() }).unwrap();
        let s = truth.cycle_series.get_mut(&10).unwrap();
        s.swap(3, 4);
        s.swap(20, 51);
        assert!(!planted_cycle_check(&truth, 10));
        assert!(!planted_cycle_check(&truth, 11));
    }

    #[test]
    fn observed_is_habitual_plus_casual() {
        let cfg = PopulationConfig::default();
        let (records, truth) = simulate_population(&cfg).unwrap();
        let casual: Vec<ContractRecord> = records.iter().filter(|r| r.rider_id.starts_with('c')).cloned().collect();
        let casual = bin_contracts(&casual, &cfg.grid).unwrap().tensor;
        for ((o, h), c) in truth.observed.counts.as_slice().iter().zip(truth.habitual.counts.as_slice()).zip(casual.counts.as_slice()) {
            assert_eq!(*o, h + c);
        }
        assert_eq!(truth.observed.total() as usize, records.len());
        assert_eq!(truth.labels.iter().map(|l| l.contracts).sum::<usize>(), records.len());
        assert!(records.iter().all(|r| r.validate().is_ok()));
    }

    #[test]
    fn reproducible_per_seed() {
        let cfg = PopulationConfig { n_habitual: 20, n_casual: 50, ..Default::default() };
        let a = simulate_population(&cfg).unwrap();
        let b = simulate_population(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_population(&PopulationConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn config_validation() {
        let bad = [
            PopulationConfig { periods: vec![1], ..Default::default() },
            PopulationConfig { jitter: 1.5, ..Default::default() },
            PopulationConfig { ou_tau: 0.0, ..Default::default() },
            PopulationConfig { casual_rate: -1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(simulate_population(&cfg).is_err());
        }
    }
}
