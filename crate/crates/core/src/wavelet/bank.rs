use std::f64::consts::SQRT_2;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const TOL: f64 = 1e-12;

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

/// Daubechies extremal phase, 4 vanishing moments.
#[allow(clippy::excessive_precision)]
const DB4: [f64; 8] = [
    0.23037781330889650086,
    0.71484657055291564709,
    0.63088076792985890788,
    -0.027983769416859854211,
    -0.18703481171909308408,
    0.030841381835560763627,
    0.032883011666885199735,
    -0.010597401785069032105,
];

/// Daubechies least asymmetric, 8 vanishing moments.
#[allow(clippy::excessive_precision)]
const SYM8: [f64; 16] = [
    0.0018899503327676891843,
    -0.00030292051472413308126,
    -0.014952258337062199118,
    0.0038087520138944894631,
    0.049137179673730286787,
    -0.027219029917103486322,
    -0.051945838107881800736,
    0.36444189483617893676,
    0.77718575169962802862,
    0.48135965125905339159,
    -0.061273359067811077843,
    -0.14329423835127266284,
    0.0076074873249766081919,
    0.031695087811525991431,
    -0.00054213233180001068935,
    -0.0033824159510050025955,
];

/// Two-channel orthonormal filter bank. The high-pass filter is always
/// derived from the low-pass one, `g[k] = (-1)^k h[L-1-k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    name: String,
    h: Vec<f64>,
    g: Vec<f64>,
    vanishing_moments: usize,
}

impl FilterBank {
    /// Builds a bank and checks `sum(h) = sqrt 2` and even-shift orthonormality.
    pub fn new(name: impl Into<String>, h: Vec<f64>, vanishing_moments: usize) -> Result<Self> {
        let name = name.into();
        let len = h.len();
        if len < 2 || !len.is_multiple_of(2) {
            return Err(Error::Invalid(format!("bank `{name}` needs an even number of taps, got {len}")));
        }
        let sum: f64 = h.iter().sum();
        if (sum - SQRT_2).abs() > TOL {
            return Err(Error::Invalid(format!("bank `{name}`: sum(h) = {sum}, expected sqrt 2")));
        }
        for m in 0..len / 2 {
            let dot: f64 = (0..len - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
            let want = if m == 0 { 1.0 } else { 0.0 };
            if (dot - want).abs() > TOL {
                return Err(Error::Invalid(format!(
                    "bank `{name}`: shift-{} autocorrelation {dot} != {want}",
                    2 * m
                )));
            }
        }
        let g = (0..len)
            .map(|k| if k % 2 == 0 { h[len - 1 - k] } else { -h[len - 1 - k] })
            .collect();
        Ok(Self { name, h, g, vanishing_moments })
    }

    pub fn haar() -> Self {
        Self::builtin("haar")
    }

    pub fn db4() -> Self {
        Self::builtin("db4")
    }

    pub fn sym8() -> Self {
        Self::builtin("sym8")
    }

    fn builtin(name: &str) -> Self {
        builtin_banks()
            .into_iter()
            .find(|b| b.name == name)
            .expect("built-in bank")
    }

    /// Looks a built-in bank up by name (`haar`, `db4`, `sym8`).
    pub fn by_name(name: &str) -> Result<Self> {
        let key = name.trim().to_ascii_lowercase();
        let key = match key.as_str() {
            "db1" => "haar",
            "la16" | "symlet8" => "sym8",
            other => other,
        };
        builtin_banks()
            .into_iter()
            .find(|b| b.name == key)
            .ok_or_else(|| Error::UnknownBank(name.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.h
    }

    pub fn highpass(&self) -> &[f64] {
        &self.g
    }

    pub fn taps(&self) -> usize {
        self.h.len()
    }

    pub fn vanishing_moments(&self) -> usize {
        self.vanishing_moments
    }
}

/// Haar, db4 and sym8. The embedded constants are validated once.
pub fn builtin_banks() -> Vec<FilterBank> {
    static BANKS: OnceLock<Vec<FilterBank>> = OnceLock::new();
    BANKS
        .get_or_init(|| {
            vec![
                FilterBank::new("haar", HAAR.to_vec(), 1).expect("haar constants"),
                FilterBank::new("db4", DB4.to_vec(), 4).expect("db4 constants"),
                FilterBank::new("sym8", SYM8.to_vec(), 8).expect("sym8 constants"),
            ]
        })
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_satisfy_invariants() {
        let banks = builtin_banks();
        assert_eq!(banks.len(), 3);
        for b in &banks {
            let s: f64 = b.lowpass().iter().sum();
            assert!((s - SQRT_2).abs() < 1e-12, "{}", b.name());
            assert_eq!(b.taps(), 2 * b.vanishing_moments());
            // high-pass is orthogonal to low-pass at every even shift
            let l = b.taps();
            for m in 0..l / 2 {
                let dot: f64 = (0..l - 2 * m).map(|k| b.lowpass()[k] * b.highpass()[k + 2 * m]).sum();
                assert!(dot.abs() < 1e-12);
            }
        }
        assert_eq!(FilterBank::haar().lowpass(), &[std::f64::consts::FRAC_1_SQRT_2; 2]);
        assert_eq!(FilterBank::sym8().taps(), 16);
    }

    #[test]
    fn highpass_moments_vanish() {
        for b in builtin_banks() {
            for p in 0..b.vanishing_moments() as i32 {
                let m: f64 = b.highpass().iter().enumerate().map(|(k, g)| g * (k as f64).powi(p)).sum();
                let scale: f64 = b.highpass().iter().enumerate().map(|(k, g)| (g * (k as f64).powi(p)).abs()).sum();
                assert!(m.abs() < 1e-9 * scale.max(1.0), "{} moment {p}: {m}", b.name());
            }
        }
    }

    #[test]
    fn rejects_bad_filters() {
        assert!(FilterBank::new("odd", vec![1.0, 0.2, 0.2], 1).is_err());
        assert!(FilterBank::new("unnormalised", vec![1.0, 1.0], 1).is_err());
        assert!(FilterBank::new("nonorth", vec![0.5, 0.5, 0.5, -0.0857864376269049], 1).is_err());
        assert!(matches!(FilterBank::by_name("coif3"), Err(Error::UnknownBank(_))));
        assert_eq!(FilterBank::by_name("SYM8").unwrap().name(), "sym8");
    }
}
