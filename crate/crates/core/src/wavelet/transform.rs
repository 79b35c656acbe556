//! Periodic (circular) analysis and synthesis steps.
//!
//! One analysis step maps a length-`m` fiber to `[approx | detail]` with
//! `a[k] = sum_j h[j] x[(2k + j) mod m]` and `d[k] = sum_j g[j] x[(2k + j) mod m]`.
//! The 3D transform applies the step along lon, lat and time fibers of the
//! current approximation block and recurses on the all-low octant.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::bank::FilterBank;
use super::pyramid::{CoeffPyramid, Subband};
use crate::error::{Error, Result};
use crate::grid::Cube;

fn analyze(x: &[f64], h: &[f64], g: &[f64], out: &mut [f64]) {
    let m = x.len();
    let half = m / 2;
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (idx, (hj, gj)) in (2 * k..).zip(h.iter().zip(g)) {
            let v = x[idx % m];
            a += hj * v;
            d += gj * v;
        }
        out[k] = a;
        out[half + k] = d;
    }
}

fn synthesize(coeffs: &[f64], h: &[f64], g: &[f64], out: &mut [f64]) {
    let m = coeffs.len();
    let half = m / 2;
    out.fill(0.0);
    for k in 0..half {
        let (a, d) = (coeffs[k], coeffs[half + k]);
        for (idx, (hj, gj)) in (2 * k..).zip(h.iter().zip(g)) {
            out[idx % m] += hj * a + gj * d;
        }
    }
}

/// Multi-level 1D decomposition. `details[0]` is the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct Dwt1d {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

fn check_depth(len: usize, levels: usize) -> Result<()> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    if levels == 0 || levels > len.trailing_zeros() as usize {
        return Err(Error::TooDeep { levels, len });
    }
    Ok(())
}

pub fn dwt1d(signal: &[f64], bank: &FilterBank, levels: usize) -> Result<Dwt1d> {
    check_depth(signal.len(), levels)?;
    let (h, g) = (bank.lowpass(), bank.highpass());
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut buf = vec![0.0; signal.len()];
    for _ in 0..levels {
        let m = approx.len();
        analyze(&approx, h, g, &mut buf[..m]);
        details.push(buf[m / 2..m].to_vec());
        approx = buf[..m / 2].to_vec();
    }
    Ok(Dwt1d { approx, details })
}

pub fn idwt1d(approx: &[f64], details: &[Vec<f64>], bank: &FilterBank) -> Result<Vec<f64>> {
    let mut len = approx.len();
    for (j, d) in details.iter().enumerate().rev() {
        if d.len() != len {
            return Err(Error::Shape(format!(
                "detail level {} has {} values, expected {len}",
                j + 1,
                d.len()
            )));
        }
        len *= 2;
    }
    if approx.is_empty() {
        return Err(Error::Shape("empty approximation".into()));
    }
    let (h, g) = (bank.lowpass(), bank.highpass());
    let mut cur = approx.to_vec();
    for d in details.iter().rev() {
        let mut joined = cur;
        joined.extend_from_slice(d);
        let mut out = vec![0.0; joined.len()];
        synthesize(&joined, h, g, &mut out);
        cur = out;
    }
    Ok(cur)
}

/// Depth used when none is given: leaves a 4-per-axis approximation block
/// (8 levels at n = 1024).
pub fn default_depth(n: usize) -> usize {
    (n.trailing_zeros() as usize).saturating_sub(2).max(1)
}

/// Applies `step` to every contiguous length-`m` fiber.
fn each_fiber(data: &[f64], m: usize, step: impl Fn(&[f64], &mut [f64]) + Sync) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(m)
        .zip(data.par_chunks(m))
        .for_each(|(o, i)| step(i, o));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(m).zip(data.chunks(m)).for_each(|(o, i)| step(i, o));
    out
}

/// (a, b, c) layout -> (b, c, a) layout.
fn rotate(data: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for a in 0..m {
        for b in 0..m {
            let src = &data[(a * m + b) * m..(a * m + b + 1) * m];
            for (c, v) in src.iter().enumerate() {
                out[(b * m + c) * m + a] = *v;
            }
        }
    }
    out
}

/// (a, b, c) layout -> (c, a, b) layout.
fn rotate_back(data: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for a in 0..m {
        for b in 0..m {
            let src = &data[(a * m + b) * m..(a * m + b + 1) * m];
            for (c, v) in src.iter().enumerate() {
                out[(c * m + a) * m + b] = *v;
            }
        }
    }
    out
}

fn forward_level(block: &[f64], m: usize, bank: &FilterBank) -> Vec<f64> {
    let (h, g) = (bank.lowpass(), bank.highpass());
    let step = |i: &[f64], o: &mut [f64]| analyze(i, h, g, o);
    // (x, y, t) -> (y, t, x): lon fibers contiguous
    let cur = each_fiber(&rotate(block, m), m, step);
    // -> (t, x, y): lat fibers
    let cur = each_fiber(&rotate(&cur, m), m, step);
    // -> (x, y, t): time fibers
    each_fiber(&rotate(&cur, m), m, step)
}

fn inverse_level(block: &[f64], m: usize, bank: &FilterBank) -> Vec<f64> {
    let (h, g) = (bank.lowpass(), bank.highpass());
    let step = |i: &[f64], o: &mut [f64]| synthesize(i, h, g, o);
    let cur = each_fiber(block, m, step);
    let cur = each_fiber(&rotate_back(&cur, m), m, step);
    let cur = each_fiber(&rotate_back(&cur, m), m, step);
    rotate_back(&cur, m)
}

fn octant(block: &[f64], m: usize, band: Subband) -> Cube {
    let half = m / 2;
    let (ox, oy, ot) = band.offsets(half);
    Cube::from_fn(half, |x, y, t| block[((x + ox) * m + y + oy) * m + t + ot])
}

/// Separable multi-level 3D transform (Mallat pyramid).
pub fn dwt3d(tensor: &Cube, bank: &FilterBank, levels: usize) -> Result<CoeffPyramid> {
    let n = tensor.side();
    check_depth(n, levels)?;
    let mut approx = tensor.as_slice().to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut m = n;
    for _ in 0..levels {
        let block = forward_level(&approx, m, bank);
        details.push(Subband::DETAILS.map(|b| octant(&block, m, b)));
        approx = octant(&block, m, Subband::Lll).into_vec();
        m /= 2;
    }
    let approx = Cube::from_vec(m, approx)?;
    CoeffPyramid::new(bank.name(), approx, details)
}

/// Exact inverse of [`dwt3d`].
pub fn idwt3d(pyramid: &CoeffPyramid, bank: &FilterBank) -> Result<Cube> {
    pyramid.check_shapes()?;
    let mut approx = pyramid.approx().clone();
    for level in (1..=pyramid.levels()).rev() {
        let half = approx.side();
        let m = 2 * half;
        let mut block = vec![0.0; m * m * m];
        let mut place = |band: Subband, c: &Cube| {
            let (ox, oy, ot) = band.offsets(half);
            for x in 0..half {
                for y in 0..half {
                    let dst = ((x + ox) * m + y + oy) * m + ot;
                    let src = c.index(x, y, 0);
                    block[dst..dst + half].copy_from_slice(&c.as_slice()[src..src + half]);
                }
            }
        };
        place(Subband::Lll, &approx);
        for (band, c) in Subband::DETAILS.iter().zip(pyramid.level(level)) {
            place(*band, c);
        }
        approx = Cube::from_vec(m, inverse_level(&block, m, bank))?;
    }
    Ok(approx)
}
