//! Wavelet denoising of photon-shot-noise-limited Ramsey photoluminescence.
//!
//! * [`wavelet`]: decimated and undecimated filter-bank transforms.
//! * [`ramsey`]: NV-centre PL model, shot-noise formula and Monte-Carlo traces.
//! * [`tmt`]: template margin thresholding denoiser.
//! * [`bench`]: ensemble error metrics, filter-order sweeps and SNR scaling.

pub mod bench;
pub mod error;
pub mod numeric;
pub mod ramsey;
pub mod rng;
pub mod tmt;
pub mod wavelet;

pub use error::{Error, Result};
