//! Binning geometry and the dense cubic tensor type.

use std::io::{Read, Write};

use chrono::{TimeZone, Utc};

use crate::error::{Error, Result};
use crate::METERS_PER_DEGREE;

/// Magic bytes of the dense tensor block format.
pub const TENSOR_MAGIC: &[u8; 4] = b"WDT1";

/// Cell fractions this close to an integer are snapped onto the boundary, so
/// decimal inputs such as 39.9 land where their exact value would.
const BOUNDARY_SNAP: f64 = 1e-9;

/// Space-time box divided into `n` cells per axis.
///
/// Times are UTC unix seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub t_min: i64,
    pub t_max: i64,
    pub n: usize,
}

impl GridSpec {
    /// Central Beijing, 2017-07-15 to 2017-08-13, 1024 cells per axis.
    pub fn beijing() -> Self {
        Self {
            lon_min: 116.0,
            lon_max: 116.8,
            lat_min: 39.8,
            lat_max: 40.0,
            t_min: Utc.with_ymd_and_hms(2017, 7, 15, 0, 0, 0).unwrap().timestamp(),
            t_max: Utc.with_ymd_and_hms(2017, 8, 13, 0, 0, 0).unwrap().timestamp(),
            n: 1024,
        }
    }

    /// Same bounds with a different resolution.
    pub fn with_n(self, n: usize) -> Self {
        Self { n, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lon_min < self.lon_max) {
            return Err(Error::Grid(format!("lon_min {} must be below lon_max {}", self.lon_min, self.lon_max)));
        }
        if !(self.lat_min < self.lat_max) {
            return Err(Error::Grid(format!("lat_min {} must be below lat_max {}", self.lat_min, self.lat_max)));
        }
        if self.t_min >= self.t_max {
            return Err(Error::Grid(format!("t_min {} must be before t_max {}", self.t_min, self.t_max)));
        }
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(Error::Grid(format!("n = {} must be a power of two >= 2", self.n)));
        }
        Ok(())
    }

    /// Width of one time cell in seconds.
    pub fn time_step_seconds(&self) -> f64 {
        (self.t_max - self.t_min) as f64 / self.n as f64
    }

    pub fn lon_cell(&self, lon: f64) -> Option<usize> {
        axis_cell(lon, self.lon_min, self.lon_max, self.n)
    }

    pub fn lat_cell(&self, lat: f64) -> Option<usize> {
        axis_cell(lat, self.lat_min, self.lat_max, self.n)
    }

    /// Time binning runs on integer seconds, so it is exact.
    pub fn time_cell(&self, t: i64) -> Option<usize> {
        if t < self.t_min || t > self.t_max {
            return None;
        }
        let span = (self.t_max - self.t_min) as i128;
        let cell = (t - self.t_min) as i128 * self.n as i128 / span;
        Some((cell as usize).min(self.n - 1))
    }

    /// Cell containing the point, or `None` when it lies outside the closed box.
    pub fn cell(&self, lon: f64, lat: f64, t: i64) -> Option<(usize, usize, usize)> {
        Some((self.lon_cell(lon)?, self.lat_cell(lat)?, self.time_cell(t)?))
    }

    /// Start of time cell `k` in unix seconds (fractional).
    pub fn time_cell_start(&self, k: usize) -> f64 {
        self.t_min as f64 + k as f64 * self.time_step_seconds()
    }
}

fn axis_cell(v: f64, lo: f64, hi: f64, n: usize) -> Option<usize> {
    if !(v >= lo && v <= hi) {
        return None;
    }
    let f = (v - lo) / (hi - lo) * n as f64;
    let r = f.round();
    let f = if (f - r).abs() < BOUNDARY_SNAP { r } else { f };
    Some((f.floor() as usize).min(n - 1))
}

/// Physical size of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResolution {
    pub meters_lon: f64,
    pub meters_lat: f64,
    pub minutes: f64,
}

/// Cell size with a flat 111 km per degree on both axes.
pub fn cell_resolution(spec: &GridSpec) -> CellResolution {
    let n = spec.n as f64;
    CellResolution {
        meters_lon: (spec.lon_max - spec.lon_min) / n * METERS_PER_DEGREE,
        meters_lat: (spec.lat_max - spec.lat_min) / n * METERS_PER_DEGREE,
        minutes: spec.time_step_seconds() / 60.0,
    }
}

/// Dense `n x n x n` array of reals stored row-major in (x, y, t) order,
/// so the last axis is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    n: usize,
    data: Vec<f64>,
}

impl Cube {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n * n {
            return Err(Error::Shape(format!("{} values cannot fill a {n}^3 cube", data.len())));
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n * n);
        for x in 0..n {
            for y in 0..n {
                for t in 0..n {
                    data.push(f(x, y, t));
                }
            }
        }
        Self { n, data }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        (x * self.n + y) * self.n + t
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        self.data[self.index(x, y, t)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, t: usize, v: f64) {
        let i = self.index(x, y, t);
        self.data[i] = v;
    }

    #[inline]
    pub fn add(&mut self, x: usize, y: usize, t: usize, v: f64) {
        let i = self.index(x, y, t);
        self.data[i] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Cube) -> f64 {
        assert_eq!(self.n, other.n, "cube sides differ");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Spatial `n x n` slice at time cell `t`, indexed `[x * n + y]`.
    pub fn time_slice(&self, t: usize) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for xy in 0..n * n {
            out.push(self.data[xy * n + t]);
        }
        out
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(TENSOR_MAGIC)?;
        for _ in 0..3 {
            w.write_all(&(self.n as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::Format(format!("expected magic WDT1, found {magic:?}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *d = u64::from_le_bytes(b) as usize;
        }
        if dims[0] != dims[1] || dims[1] != dims[2] {
            return Err(Error::Format(format!("non-cubic dims {dims:?}")));
        }
        let n = dims[0];
        let count = n
            .checked_mul(n)
            .and_then(|v| v.checked_mul(n))
            .ok_or_else(|| Error::Format(format!("dimension {n} overflows")))?;
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { n, data })
    }
}

/// Counts (or reconstructed demand) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTensor {
    pub grid: GridSpec,
    pub counts: Cube,
}

impl DemandTensor {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { counts: Cube::zeros(grid.n), grid }
    }

    pub fn new(grid: GridSpec, counts: Cube) -> Result<Self> {
        if counts.side() != grid.n {
            return Err(Error::Shape(format!(
                "cube side {} does not match grid n {}",
                counts.side(),
                grid.n
            )));
        }
        Ok(Self { grid, counts })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn total(&self) -> f64 {
        self.counts.sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beijing_resolution() {
        let r = cell_resolution(&GridSpec::beijing());
        assert!((r.meters_lon - 86.7).abs() < 0.05, "{}", r.meters_lon);
        assert!((r.meters_lat - 21.7).abs() < 0.05, "{}", r.meters_lat);
        assert!((r.minutes - 40.8).abs() < 0.05, "{}", r.minutes);
    }

    #[test]
    fn decimal_inputs_snap_to_boundaries() {
        let g = GridSpec::beijing();
        assert_eq!(g.lon_cell(116.4), Some(512));
        assert_eq!(g.lat_cell(39.9), Some(512));
        assert_eq!(g.lon_cell(116.8), Some(1023));
        assert_eq!(g.lat_cell(40.0), Some(1023));
        assert_eq!(g.lon_cell(115.0), None);
    }

    #[test]
    fn time_midpoint_and_end() {
        let g = GridSpec::beijing();
        assert_eq!(g.time_cell((g.t_min + g.t_max) / 2), Some(512));
        assert_eq!(g.time_cell(g.t_max), Some(1023));
        assert_eq!(g.time_cell(g.t_min), Some(0));
        assert_eq!(g.time_cell(g.t_max + 1), None);
    }

    #[test]
    fn invalid_grids() {
        let g = GridSpec::beijing();
        assert!(g.with_n(1000).validate().is_err());
        assert!(g.with_n(1).validate().is_err());
        assert!(GridSpec { lon_max: 115.0, ..g }.validate().is_err());
        assert!(GridSpec { t_max: g.t_min, ..g }.validate().is_err());
        assert!(g.validate().is_ok());
    }

    #[test]
    fn binary_layout() {
        let c = Cube::from_fn(2, |x, y, t| (x * 4 + y * 2 + t) as f64);
        let mut buf = Vec::new();
        c.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"WDT1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 4 + 24 + 8 * 8);
        // (0, 0, 1) is the second value on disk
        assert_eq!(f64::from_le_bytes(buf[36..44].try_into().unwrap()), 1.0);
        // (1, 0, 0) is the fifth
        assert_eq!(f64::from_le_bytes(buf[60..68].try_into().unwrap()), 4.0);
        assert_eq!(Cube::read_binary(&buf[..]).unwrap(), c);
    }

    #[test]
    fn binary_rejects_bad_magic() {
        let mut buf = Vec::new();
        Cube::zeros(2).write_binary(&mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(Cube::read_binary(&buf[..]), Err(Error::Format(_))));
    }
}
