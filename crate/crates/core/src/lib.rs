//! Space-time demand analysis with thresholded 3D wavelet transforms.
//!
//! Contract records are binned into a dense power-of-two tensor indexed by
//! (longitude cell, latitude cell, time cell). The tensor is decomposed with
//! an orthonormal separable wavelet pyramid, small detail coefficients are
//! removed, and the reconstruction is used as a persistence forecast for
//! later time slices. Inequality and periodicity analytics plus a seeded
//! synthetic population generator round out the toolkit.

pub mod contract;
pub mod error;
pub mod explore;
pub mod forecast;
pub mod grid;
pub mod shrink;
pub mod synth;
pub mod wavelet;

pub use contract::{bin_contracts, parse_contracts, write_contracts, BinOutcome, ContractRecord, ParseOutcome, Rejection};
pub use error::{Error, Result};
pub use forecast::{error_moments, error_surface, evaluate_levels, evaluate_periodicity, ErrorMoments, ErrorSurface, EvalReport};
pub use grid::{cell_resolution, CellResolution, Cube, DemandTensor, GridSpec};
pub use shrink::{denoise, Sigma, ShrinkReport, ThresholdRule, ThresholdSource, ThresholdSpec};
pub use synth::{planted_cycle_check, simulate_population, GroundTruth, PopulationConfig};
pub use wavelet::{builtin_banks, dwt3d, idwt3d, CoeffPyramid, FilterBank, Subband};

/// Meters per degree used for every degree-to-meter conversion in the crate.
///
/// The same flat factor is applied to longitude and latitude.
pub const METERS_PER_DEGREE: f64 = 111_000.0;
