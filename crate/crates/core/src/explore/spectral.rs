use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::forecast::format_float;
use crate::grid::DemandTensor;

pub const MORLET_OMEGA0: f64 = 6.0;

/// Total demand per time step.
pub fn flatten_time(tensor: &DemandTensor) -> Vec<f64> {
    let c = &tensor.counts;
    let n = c.side();
    let mut out = vec![0.0; n];
    for fiber in c.as_slice().chunks_exact(n) {
        for (o, v) in out.iter_mut().zip(fiber) {
            *o += v;
        }
    }
    out
}

fn demeaned(series: &[f64]) -> Vec<f64> {
    if series.iter().all(|v| *v == series[0]) {
        return vec![0.0; series.len()];
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    series.iter().map(|v| v - mean).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// One-sided power for bins `0..=N/2`; sums to `N * variance`.
    pub power: Vec<f64>,
    /// Local maxima, strongest first.
    pub peaks: Vec<usize>,
    pub len: usize,
}

impl Periodogram {
    /// Period in samples of frequency bin `k`.
    pub fn period(&self, k: usize) -> f64 {
        self.len as f64 / k as f64
    }
}

pub fn periodogram(series: &[f64]) -> Result<Periodogram> {
    let n = series.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite sample in series".into()));
    }
    let mut buf: Vec<Complex64> = demeaned(series).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let power: Vec<f64> = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / n as f64;
            if k == 0 || k == half { p } else { 2.0 * p }
        })
        .collect();
    let floor = 1e-12 * power.iter().sum::<f64>();
    let mut peaks: Vec<usize> = (1..=half)
        .filter(|&k| {
            let p = power[k];
            p > floor && p > power[k - 1] && (k == half || p >= power[k + 1])
        })
        .collect();
    peaks.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    Ok(Periodogram { power, peaks, len: n })
}

pub fn write_periodogram_csv<W: Write>(dest: W, p: &Periodogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    w.write_record(["bin", "period", "power", "peak_rank"])?;
    let mut rank = vec![None; p.power.len()];
    for (r, &k) in p.peaks.iter().enumerate() {
        rank[k] = Some(r + 1);
    }
    for (k, &pw) in p.power.iter().enumerate() {
        w.write_record([
            k.to_string(),
            if k == 0 { "NA".into() } else { format_float(p.period(k)) },
            format_float(pw),
            rank[k].map_or_else(|| "NA".into(), |r: usize| r.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fourier period equivalent of a Morlet scale.
pub fn fourier_period(scale: f64) -> f64 {
    4.0 * PI * scale / (MORLET_OMEGA0 + (2.0 + MORLET_OMEGA0 * MORLET_OMEGA0).sqrt())
}

/// Scales `2 * 2^(j/8)` up to a quarter of the series length.
pub fn default_scales(len: usize) -> Vec<f64> {
    let max = len as f64 / 4.0;
    (0..)
        .map(|j| 2.0 * 2f64.powf(j as f64 / 8.0))
        .take_while(|s| *s <= max)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub scales: Vec<f64>,
    pub periods: Vec<f64>,
    pub times: Vec<usize>,
    /// `power[scale][time]`
    pub power: Vec<Vec<f64>>,
    /// Largest scale free of edge effects at each time.
    pub coi: Vec<f64>,
}

impl PowerSpectrum {
    /// True where edge effects reach the coefficient.
    pub fn in_coi(&self, scale_index: usize, t: usize) -> bool {
        self.scales[scale_index] > self.coi[t]
    }

    /// Mean power per scale over times outside the cone of influence.
    pub fn global_power(&self) -> Vec<Option<f64>> {
        (0..self.scales.len())
            .map(|j| {
                let vals: Vec<f64> =
                    self.times.iter().filter(|&&t| !self.in_coi(j, t)).map(|&t| self.power[j][t]).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }
}

/// Morlet continuous wavelet power of the demeaned series, one FFT product
/// per scale on a zero-padded buffer.
pub fn morlet_power(series: &[f64], scales: &[f64]) -> Result<PowerSpectrum> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Invalid("series needs at least 2 samples".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite sample in series".into()));
    }
    if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Invalid("scales must be positive".into()));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("scales must be strictly ascending".into()));
    }
    if let Some(s) = scales.iter().find(|s| **s > n as f64) {
        return Err(Error::OutOfRange(format!("scale {s} exceeds series length {n}")));
    }

    let m = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    for (s, v) in spec.iter_mut().zip(demeaned(series)) {
        s.re = v;
    }
    fwd.process(&mut spec);

    let omega: Vec<f64> = (0..m)
        .map(|k| {
            let k = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
            2.0 * PI * k / m as f64
        })
        .collect();
    let norm0 = PI.powf(-0.25);
    let power = scales
        .iter()
        .map(|&s| {
            let amp = (2.0 * PI * s).sqrt() * norm0;
            let mut buf: Vec<Complex64> = spec
                .iter()
                .zip(&omega)
                .map(|(x, &w)| {
                    if w > 0.0 {
                        x * (amp * (-(s * w - MORLET_OMEGA0).powi(2) / 2.0).exp())
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            inv.process(&mut buf);
            buf[..n].iter().map(|c| c.norm_sqr() / (m as f64 * m as f64)).collect()
        })
        .collect();

    let coi = (0..n).map(|t| t.min(n - 1 - t) as f64 / SQRT_2).collect();
    Ok(PowerSpectrum {
        scales: scales.to_vec(),
        periods: scales.iter().map(|&s| fourier_period(s)).collect(),
        times: (0..n).collect(),
        power,
        coi,
    })
}

pub fn write_spectrum_csv<W: Write>(dest: W, s: &PowerSpectrum) -> Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    w.write_record(["time_index", "scale", "power", "in_coi"])?;
    for &t in &s.times {
        for (j, &scale) in s.scales.iter().enumerate() {
            w.write_record([
                t.to_string(),
                format_float(scale),
                format_float(s.power[j][t]),
                u8::from(s.in_coi(j, t)).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
