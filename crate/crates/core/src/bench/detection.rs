use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ramsey::{template, AcquisitionPlan, SensorParams};

/// Samples on the negative fringe slopes where the ensemble error is scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionPointSet {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    /// Noise-free PL at each detection time.
    pub truths: Vec<f64>,
}

impl DetectionPointSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Sample indices nearest to each `omega t = pi/2 (mod 2 pi)` crossing that
/// falls on the plan's sample grid.
pub fn slope_crossing_indices(omega: f64, plan: &AcquisitionPlan) -> Vec<usize> {
    if !(omega > 0.0) {
        return Vec::new();
    }
    let n = plan.n_samples();
    let period = 2.0 * PI / omega;
    let first = ((omega * plan.t_i - FRAC_PI_2) / (2.0 * PI)).ceil() as i64;
    let mut out = Vec::new();
    for cycle in first.. {
        let t = (FRAC_PI_2 + 2.0 * PI * cycle as f64) / omega;
        if t > plan.t_f + period {
            break;
        }
        if t < plan.t_i || t > plan.t_f {
            continue;
        }
        let k = ((t - plan.t_i) * plan.f_sample).round();
        if k < 0.0 || k as usize >= n {
            continue;
        }
        let k = k as usize;
        if out.last() != Some(&k) {
            out.push(k);
        }
    }
    out
}

/// First `n_sd` detection points of the window at reference frequency
/// `omega`, with truths taken from the template at `omega_true`.
pub fn find_detection_points(
    omega: f64,
    plan: &AcquisitionPlan,
    n_sd: usize,
    params: &SensorParams,
    omega_true: f64,
) -> Result<DetectionPointSet> {
    let all = slope_crossing_indices(omega, plan);
    if n_sd == 0 || all.len() < n_sd {
        return Err(Error::WindowTooShort {
            t_i: plan.t_i,
            t_f: plan.t_f,
            found: all.len(),
            wanted: n_sd,
        });
    }
    let indices: Vec<usize> = all.into_iter().take(n_sd).collect();
    let times: Vec<f64> = indices.iter().map(|&k| plan.time(k)).collect();
    let truths = times
        .iter()
        .map(|&t| template(t, omega_true, params))
        .collect();
    Ok(DetectionPointSet {
        indices,
        times,
        truths,
    })
}

/// Every detection point in the window.
pub fn all_detection_points(
    omega: f64,
    plan: &AcquisitionPlan,
    params: &SensorParams,
    omega_true: f64,
) -> Result<DetectionPointSet> {
    let n = slope_crossing_indices(omega, plan).len();
    find_detection_points(omega, plan, n.max(1), params, omega_true)
}
