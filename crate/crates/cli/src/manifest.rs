use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Mode, RunConfig};

/// Derived quantities for one simulated window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowInfo {
    pub t_i: f64,
    pub t_f: f64,
    pub f_sample: f64,
    pub n_samples: usize,
    pub detection_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub n0: f64,
    pub n1: f64,
    pub omega_calib: f64,
    pub omega_sense: f64,
    pub beta_grid: Vec<f64>,
    pub windows: Vec<WindowInfo>,
}

/// Everything needed to reproduce a run. The copy embedded in JSON tables
/// leaves out the timing and checksums, which are not reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    pub seed: u64,
    pub config: RunConfig,
    pub derived: Derived,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub checksums: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
