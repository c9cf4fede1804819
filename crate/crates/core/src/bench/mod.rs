//! Monte-Carlo benchmark harness: detection points, ensemble error
//! metrics, filter-order sweeps, calibration transfer and SNR scaling fits.

mod detection;
mod fit;
mod harness;
mod stats;

pub use detection::{
    all_detection_points, find_detection_points, slope_crossing_indices, DetectionPointSet,
};
pub use fit::{fit_scaling, ScalingFit};
pub use harness::{
    calibrate_beta, default_beta_grid, gain_at, gain_profile, run_ensemble, snr_at_optimum,
    snr_series, sweep_beta, window_end_for, BenchConfig, BetaSweep, EnsembleRun, GainPoint,
    SnrPoint, TemplateSharing, DEFAULT_DELTA_B,
};
pub use stats::{
    ensemble_stats, signal_amplitude, snr, stats_from_samples, EnsembleStats, PointStats,
};
