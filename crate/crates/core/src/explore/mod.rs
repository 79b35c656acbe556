//! Inequality, movement and periodicity analytics.

mod inequality;
mod movement;
mod spectral;

pub use inequality::{gini_lorenz, pareto_fit, rank_frequency, usage_counts, write_lorenz_csv, LorenzResult, ParetoFit};
pub use movement::{
    default_lags, fit_ou, tracks_from_contracts, variogram, write_variogram_csv, DistanceUnit, OuFit, RiderTrack,
    VariogramBin,
};
pub use spectral::{
    default_scales, flatten_time, fourier_period, morlet_power, periodogram, write_periodogram_csv, write_spectrum_csv,
    Periodogram, PowerSpectrum, MORLET_OMEGA0,
};
