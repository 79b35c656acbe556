//! Orthonormal periodic wavelet transforms in one and three dimensions.

mod bank;
mod pyramid;
mod transform;

pub use bank::{builtin_banks, FilterBank};
pub use pyramid::{CoeffPyramid, Subband, PYRAMID_MAGIC};
pub use transform::{default_depth, dwt1d, dwt3d, idwt1d, idwt3d, Dwt1d};
