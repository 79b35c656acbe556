use std::fmt;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::Cube;

pub const PYRAMID_MAGIC: &[u8; 4] = b"WPY1";

/// Octant of one analysis level, named by which axes (lon, lat, time) were
/// high-passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subband {
    Lll,
    Hll,
    Lhl,
    Llh,
    Hhl,
    Hlh,
    Lhh,
    Hhh,
}

impl Subband {
    /// Detail subbands in storage order.
    pub const DETAILS: [Subband; 7] = [
        Subband::Hll,
        Subband::Lhl,
        Subband::Llh,
        Subband::Hhl,
        Subband::Hlh,
        Subband::Lhh,
        Subband::Hhh,
    ];

    fn highs(self) -> (bool, bool, bool) {
        match self {
            Subband::Lll => (false, false, false),
            Subband::Hll => (true, false, false),
            Subband::Lhl => (false, true, false),
            Subband::Llh => (false, false, true),
            Subband::Hhl => (true, true, false),
            Subband::Hlh => (true, false, true),
            Subband::Lhh => (false, true, true),
            Subband::Hhh => (true, true, true),
        }
    }

    /// Offset of this octant inside a block whose half-side is `half`.
    pub fn offsets(self, half: usize) -> (usize, usize, usize) {
        let (x, y, t) = self.highs();
        (x as usize * half, y as usize * half, t as usize * half)
    }

    pub fn label(self) -> &'static str {
        match self {
            Subband::Lll => "LLL",
            Subband::Hll => "HLL",
            Subband::Lhl => "LHL",
            Subband::Llh => "LLH",
            Subband::Hhl => "HHL",
            Subband::Hlh => "HLH",
            Subband::Lhh => "LHH",
            Subband::Hhh => "HHH",
        }
    }
}

impl fmt::Display for Subband {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Coefficients of a multi-level 3D transform.
///
/// Level 1 is the finest. Each level holds seven detail cubes of side
/// `n / 2^level` in [`Subband::DETAILS`] order; the approximation block has
/// side `n / 2^levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffPyramid {
    bank: String,
    approx: Cube,
    details: Vec<[Cube; 7]>,
}

impl CoeffPyramid {
    pub fn new(bank: impl Into<String>, approx: Cube, details: Vec<[Cube; 7]>) -> Result<Self> {
        let p = Self { bank: bank.into(), approx, details };
        p.check_shapes()?;
        Ok(p)
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        if self.details.is_empty() {
            return Err(Error::Shape("pyramid has no detail levels".into()));
        }
        let mut side = self.approx.side();
        if side == 0 {
            return Err(Error::Shape("empty approximation block".into()));
        }
        for (j, level) in self.details.iter().enumerate().rev() {
            for (band, c) in Subband::DETAILS.iter().zip(level) {
                if c.side() != side {
                    return Err(Error::Shape(format!(
                        "level {} {band} has side {}, expected {side}",
                        j + 1,
                        c.side()
                    )));
                }
            }
            side *= 2;
        }
        Ok(())
    }

    pub fn bank(&self) -> &str {
        &self.bank
    }

    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Side of the tensor this pyramid came from.
    pub fn n(&self) -> usize {
        self.approx.side() << self.levels()
    }

    pub fn approx(&self) -> &Cube {
        &self.approx
    }

    pub fn approx_mut(&mut self) -> &mut Cube {
        &mut self.approx
    }

    /// Detail cubes of `level` (1 = finest).
    pub fn level(&self, level: usize) -> &[Cube; 7] {
        &self.details[level - 1]
    }

    pub fn level_mut(&mut self, level: usize) -> &mut [Cube; 7] {
        &mut self.details[level - 1]
    }

    pub fn detail(&self, level: usize, band: Subband) -> &Cube {
        let i = Subband::DETAILS
            .iter()
            .position(|b| *b == band)
            .expect("detail subband");
        &self.details[level - 1][i]
    }

    pub fn coefficient_count(&self) -> usize {
        self.approx.len() + self.detail_count()
    }

    pub fn detail_count(&self) -> usize {
        self.details.iter().map(|l| 7 * l[0].len()).sum()
    }

    pub fn energy(&self) -> f64 {
        self.approx.energy() + self.details.iter().flatten().map(Cube::energy).sum::<f64>()
    }

    /// Detail values in tie-break order: level ascending, then subband order,
    /// then linear index.
    pub fn detail_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.details
            .iter()
            .flatten()
            .flat_map(|c| c.as_slice().iter().copied())
    }

    pub fn detail_values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.details
            .iter_mut()
            .flatten()
            .flat_map(|c| c.as_mut_slice().iter_mut())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(PYRAMID_MAGIC)?;
        w.write_all(&(self.bank.len() as u64).to_le_bytes())?;
        w.write_all(self.bank.as_bytes())?;
        w.write_all(&(self.levels() as u64).to_le_bytes())?;
        self.approx.write_binary(&mut w)?;
        for level in self.details.iter().rev() {
            for c in level {
                c.write_binary(&mut w)?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PYRAMID_MAGIC {
            return Err(Error::Format(format!("expected magic WPY1, found {magic:?}")));
        }
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        let name_len = u64::from_le_bytes(b) as usize;
        if name_len > 256 {
            return Err(Error::Format(format!("bank name length {name_len}")));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let bank = String::from_utf8(name)
            .ok()
            .filter(|s| s.is_ascii())
            .ok_or_else(|| Error::Format("bank name is not ASCII".into()))?;
        r.read_exact(&mut b)?;
        let levels = u64::from_le_bytes(b) as usize;
        if levels == 0 || levels > 32 {
            return Err(Error::Format(format!("{levels} levels")));
        }
        let approx = Cube::read_binary(&mut r)?;
        let mut details = Vec::with_capacity(levels);
        for _ in 0..levels {
            let level: Vec<Cube> = (0..7).map(|_| Cube::read_binary(&mut r)).collect::<Result<_>>()?;
            details.push(<[Cube; 7]>::try_from(level).expect("seven subbands"));
        }
        details.reverse();
        Self::new(bank, approx, details)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{dwt3d, FilterBank};

    #[test]
    fn dyadic_shapes_and_count() {
        let c = Cube::from_fn(16, |x, y, t| (x * 3 + y * 5 + t * 7) as f64 % 11.0);
        let p = dwt3d(&c, &FilterBank::db4(), 3).unwrap();
        assert_eq!(p.levels(), 3);
        assert_eq!(p.n(), 16);
        assert_eq!(p.approx().side(), 2);
        assert_eq!(p.level(1)[0].side(), 8);
        assert_eq!(p.level(3)[6].side(), 2);
        assert_eq!(p.coefficient_count(), 16 * 16 * 16);
        assert_eq!(p.detail_count(), 16 * 16 * 16 - 8);
    }

    #[test]
    fn serialization_order() {
        let c = Cube::from_fn(4, |x, y, t| (x + 2 * y + 3 * t) as f64);
        let p = dwt3d(&c, &FilterBank::haar(), 2).unwrap();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"WPY1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 4);
        assert_eq!(&buf[12..16], b"haar");
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 2);
        // LLL block first, then the coarsest level's HLL
        let lll = Cube::read_binary(&buf[24..]).unwrap();
        assert_eq!(&lll, p.approx());
        let hll = Cube::read_binary(&buf[24 + 36..]).unwrap();
        assert_eq!(&hll, p.detail(2, Subband::Hll));
        assert_eq!(CoeffPyramid::read_binary(&buf[..]).unwrap(), p);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let approx = Cube::zeros(2);
        let bad = std::array::from_fn(|i| Cube::zeros(if i == 3 { 2 } else { 4 }));
        assert!(matches!(CoeffPyramid::new("haar", approx, vec![bad]), Err(Error::Shape(_))));
    }
}
