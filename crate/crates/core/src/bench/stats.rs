use serde::{Deserialize, Serialize};

use super::detection::DetectionPointSet;
use crate::error::{Error, Result};
use crate::numeric::neumaier_sum;
use crate::ramsey::{template, PLTrace, SensorParams};

/// Ensemble error at one detection point.
///
/// Population normalisation (divide by `N_exp`) throughout, so
/// `mse = bias^2 + variance` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub time: f64,
    pub truth: f64,
    pub sample_mean: f64,
    pub mse: f64,
    pub bias: f64,
    pub variance: f64,
    /// Standard error of `mse`.
    pub mse_se: f64,
    /// Standard error of `bias^2` (delta method).
    pub bias_sq_se: f64,
    /// Standard error of `variance`.
    pub variance_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub per_point: Vec<PointStats>,
    pub fringe_averaged_mse: f64,
    pub fringe_averaged_bias_sq: f64,
    pub fringe_averaged_variance: f64,
    pub fringe_averaged_mse_se: f64,
    pub fringe_averaged_bias_sq_se: f64,
    pub fringe_averaged_variance_se: f64,
    pub n_exp: usize,
    /// Filter order, `None` for the raw ensemble.
    pub beta: Option<f64>,
}

fn mean(xs: impl IntoIterator<Item = f64>, n: usize) -> f64 {
    neumaier_sum(xs) / n as f64
}

fn point_stats(values: &[f64], truth: f64, time: f64) -> PointStats {
    let n = values.len();
    let nf = n as f64;
    let sample_mean = mean(values.iter().copied(), n);
    let sq_err: Vec<f64> = values.iter().map(|v| (v - truth).powi(2)).collect();
    let sq_dev: Vec<f64> = values.iter().map(|v| (v - sample_mean).powi(2)).collect();
    let mse = mean(sq_err.iter().copied(), n);
    let variance = mean(sq_dev.iter().copied(), n);
    let bias = mean(values.iter().map(|v| v - truth), n);
    let se_of = |xs: &[f64], m: f64| {
        let s2 = neumaier_sum(xs.iter().map(|x| (x - m).powi(2))) / (nf - 1.0).max(1.0);
        (s2 / nf).sqrt()
    };
    let bias_se = (variance / nf).sqrt();
    PointStats {
        time,
        truth,
        sample_mean,
        mse,
        bias,
        variance,
        mse_se: se_of(&sq_err, mse),
        bias_sq_se: 2.0 * bias.abs() * bias_se + bias_se * bias_se,
        variance_se: se_of(&sq_dev, variance),
    }
}

/// Statistics from a matrix of detection-point values,
/// `samples[experiment][point]`.
pub fn stats_from_samples(
    samples: &[Vec<f64>],
    points: &DetectionPointSet,
    beta: Option<f64>,
) -> Result<EnsembleStats> {
    if samples.len() < 2 {
        return Err(Error::EnsembleTooSmall {
            needed: 2,
            got: samples.len(),
        });
    }
    if points.is_empty() {
        return Err(Error::InvalidTrace("no detection points".into()));
    }
    if let Some(bad) = samples.iter().position(|s| s.len() != points.len()) {
        return Err(Error::GridMismatch(format!(
            "experiment {bad} has {} point values, expected {}",
            samples[bad].len(),
            points.len()
        )));
    }
    let per_point: Vec<PointStats> = (0..points.len())
        .map(|q| {
            let column: Vec<f64> = samples.iter().map(|s| s[q]).collect();
            point_stats(&column, points.truths[q], points.times[q])
        })
        .collect();
    let nq = per_point.len();
    let avg = |f: &dyn Fn(&PointStats) -> f64| mean(per_point.iter().map(f), nq);
    let avg_se = |f: &dyn Fn(&PointStats) -> f64| {
        neumaier_sum(per_point.iter().map(|p| f(p).powi(2))).sqrt() / nq as f64
    };
    Ok(EnsembleStats {
        fringe_averaged_mse: avg(&|p| p.mse),
        fringe_averaged_bias_sq: avg(&|p| p.bias * p.bias),
        fringe_averaged_variance: avg(&|p| p.variance),
        fringe_averaged_mse_se: avg_se(&|p| p.mse_se),
        fringe_averaged_bias_sq_se: avg_se(&|p| p.bias_sq_se),
        fringe_averaged_variance_se: avg_se(&|p| p.variance_se),
        per_point,
        n_exp: samples.len(),
        beta,
    })
}

/// Ensemble MSE, bias and variance at the detection points.
pub fn ensemble_stats(
    traces: &[PLTrace],
    points: &DetectionPointSet,
    beta: Option<f64>,
) -> Result<EnsembleStats> {
    if traces.is_empty() {
        return Err(Error::EnsembleTooSmall { needed: 2, got: 0 });
    }
    let reference = &traces[0];
    for (i, tr) in traces.iter().enumerate() {
        if tr.len() != reference.len()
            || tr.plan.t_i != reference.plan.t_i
            || tr.plan.f_sample != reference.plan.f_sample
        {
            return Err(Error::GridMismatch(format!(
                "trace {i} is on a different time grid"
            )));
        }
    }
    if let Some(&k) = points.indices.iter().find(|&&k| k >= reference.len()) {
        return Err(Error::GridMismatch(format!(
            "detection index {k} outside a {}-sample trace",
            reference.len()
        )));
    }
    let samples: Vec<Vec<f64>> = traces
        .iter()
        .map(|tr| points.indices.iter().map(|&k| tr.values[k]).collect())
        .collect();
    stats_from_samples(&samples, points, beta)
}

/// Mean `|K(t_q, omega_sense) - K(t_q, omega_calib)|` over the detection
/// times: the PL change produced by the sensing field.
pub fn signal_amplitude(
    points: &DetectionPointSet,
    params: &SensorParams,
    omega_sense: f64,
    omega_calib: f64,
) -> f64 {
    mean(
        points
            .times
            .iter()
            .map(|&t| (template(t, omega_sense, params) - template(t, omega_calib, params)).abs()),
        points.len().max(1),
    )
}

/// `delta_n / sqrt(fringe-averaged MSE)`.
pub fn snr(stats: &EnsembleStats, delta_n: f64) -> Result<f64> {
    if !(stats.fringe_averaged_mse > 0.0) {
        return Err(Error::ZeroMse);
    }
    Ok(delta_n / stats.fringe_averaged_mse.sqrt())
}
