use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `SNR = c (M t_f)^alpha`, fitted by least squares in log-log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub r_squared: f64,
    /// `(M t_f, SNR)` pairs.
    pub points: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }
}

pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidFit(format!(
            "{} points, need at least 3",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|&&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::InvalidFit(format!("non-positive point ({x}, {y})")));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidFit("all abscissae identical".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(ScalingFit {
        prefactor: intercept.exp(),
        exponent,
        r_squared,
        points: points.to_vec(),
    })
}
