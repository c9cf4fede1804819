//! Configuration, orchestration and result export for the `tmt` binary.

pub mod config;
pub mod error;
pub mod export;
pub mod manifest;
pub mod run;

pub use config::{load_config, parse_config, Format, Mode, RunConfig};
pub use error::{Error, Result};
pub use run::{compute, run, RunOptions, RunReport};
