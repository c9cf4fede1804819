//! Template margin thresholding.
//!
//! 1. Estimate the template frequency by maximising the DC-free correlation
//!    between the collected PL and the analytic template.
//! 2. Place upper/lower margins `K(t) +- 10^-beta Delta N(t) / sqrt(T_I M f_sample)`
//!    around the template and decompose both with the undecimated transform.
//! 3. Clamp each raw detail coefficient into `[l_jk, u_jk]`, keep the raw
//!    approximation, and invert.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::neumaier_sum;
use crate::ramsey::{shot_noise, template, AcquisitionPlan, NoiseModel, PLTrace, SensorParams};
use crate::wavelet::{
    iuwt_reconstruct, uwt_decompose, Boundary, WaveletBasis, WaveletDecomposition,
};

/// Uniform angular-frequency search grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_points: usize,
}

impl FrequencyGrid {
    pub const DEFAULT_HALF_WIDTH: f64 = 0.15;
    pub const DEFAULT_POINTS: usize = 2001;

    /// `center * (1 +- half_width)`.
    pub fn around(center: f64, half_width: f64, n_points: usize) -> Self {
        Self {
            omega_min: center * (1.0 - half_width),
            omega_max: center * (1.0 + half_width),
            n_points,
        }
    }

    /// The default search grid around the calibration frequency.
    pub fn default_for(params: &SensorParams) -> Self {
        Self::around(
            params.omega_calib,
            Self::DEFAULT_HALF_WIDTH,
            Self::DEFAULT_POINTS,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 3 {
            return Err(Error::InvalidGrid(format!(
                "{} grid points, need at least 3",
                self.n_points
            )));
        }
        if !(self.omega_min.is_finite() && self.omega_max.is_finite()) || self.omega_min <= 0.0 {
            return Err(Error::InvalidGrid(
                "bounds must be finite and positive".into(),
            ));
        }
        if self.omega_max <= self.omega_min {
            return Err(Error::InvalidGrid(format!(
                "empty range [{}, {}]",
                self.omega_min, self.omega_max
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.omega_max - self.omega_min) / (self.n_points - 1) as f64
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.omega_min + i as f64 * self.step()
    }
}

/// Scoring of a trial frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationNorm {
    /// `R(w) / ||K_w - mean K_w||`. The maximiser of the plain inner product
    /// drifts with the template's in-window energy; dividing it out puts the
    /// maximum of a noiseless trace exactly on its own frequency.
    Normalized,
    /// Plain DC-free inner product `R(w)`. Slightly biased towards
    /// frequencies whose template carries more in-window energy.
    #[default]
    Plain,
}

/// Result of the template-frequency search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateEstimate {
    pub omega_temp: f64,
    /// `(omega, R(omega))` over the search grid.
    pub correlation_curve: Vec<(f64, f64)>,
    pub grid: FrequencyGrid,
}

fn trapezoid_weights(n: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![dt; n];
    if n > 1 {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    w
}

fn mean(xs: &[f64]) -> f64 {
    neumaier_sum(xs.iter().copied()) / xs.len() as f64
}

/// DC-free correlation `R(omega)` of a trace against the template.
pub fn correlation(
    trace: &PLTrace,
    params: &SensorParams,
    omega: f64,
    norm: CorrelationNorm,
) -> Result<f64> {
    let ctx = CorrelationContext::new(trace, params)?;
    Ok(ctx.eval(omega, norm))
}

struct CorrelationContext<'a> {
    times: &'a [f64],
    weights: Vec<f64>,
    weighted: Vec<f64>,
    envelope: Vec<f64>,
    params: &'a SensorParams,
}

impl<'a> CorrelationContext<'a> {
    fn new(trace: &'a PLTrace, params: &'a SensorParams) -> Result<Self> {
        if trace.is_empty() {
            return Err(Error::InvalidTrace("empty trace".into()));
        }
        let x_mean = mean(&trace.values);
        let centered: Vec<f64> = trace.values.iter().map(|v| v - x_mean).collect();
        let scale = trace.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let spread = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if spread <= 1e-14 * scale || spread == 0.0 {
            return Err(Error::DegenerateTrace);
        }
        let w = trapezoid_weights(trace.len(), 1.0 / trace.plan.f_sample);
        let weighted = centered.iter().zip(&w).map(|(c, w)| c * w).collect();

        let envelope = trace.times.iter().map(|&t| params.envelope(t)).collect();
        Ok(Self {
            times: &trace.times,
            weights: w,
            weighted,
            envelope,
            params,
        })
    }

    fn kernel_into(&self, cos_phase: impl Iterator<Item = f64>, out: &mut [f64]) {
        let p = self.params;
        let dn = p.n0 - p.n1;
        for ((o, c), e) in out.iter_mut().zip(cos_phase).zip(&self.envelope) {
            *o = 0.5 * (1.0 + c * e) * dn + p.n1;
        }
    }

    fn eval(&self, omega: f64, norm: CorrelationNorm) -> f64 {
        let mut kernel = vec![0.0; self.times.len()];
        self.kernel_into(self.times.iter().map(|&t| (omega * t).cos()), &mut kernel);
        self.score(&kernel, norm)
    }

    /// `R` over a uniform grid; `cos(w t)` advances by phasor rotation and is
    /// re-seeded exactly every 64 steps.
    fn scan(&self, grid: &FrequencyGrid, norm: CorrelationNorm) -> Vec<(f64, f64)> {
        let step = grid.step();
        let rot: Vec<(f64, f64)> = self.times.iter().map(|&t| (step * t).sin_cos()).collect();
        let mut phasor: Vec<(f64, f64)> = Vec::new();
        let mut kernel = vec![0.0; self.times.len()];
        (0..grid.n_points)
            .map(|i| {
                let omega = grid.omega(i);
                if i % 64 == 0 {
                    phasor = self.times.iter().map(|&t| (omega * t).sin_cos()).collect();
                } else {
                    for (p, r) in phasor.iter_mut().zip(&rot) {
                        *p = (p.0 * r.1 + p.1 * r.0, p.1 * r.1 - p.0 * r.0);
                    }
                }
                self.kernel_into(phasor.iter().map(|p| p.1), &mut kernel);
                (omega, self.score(&kernel, norm))
            })
            .collect()
    }

    fn score(&self, kernel: &[f64], norm: CorrelationNorm) -> f64 {
        let k_mean = mean(kernel);
        let r = neumaier_sum(
            self.weighted
                .iter()
                .zip(kernel)
                .map(|(x, k)| x * (k - k_mean)),
        );
        match norm {
            CorrelationNorm::Plain => r,
            CorrelationNorm::Normalized => {
                let energy = neumaier_sum(
                    self.weights
                        .iter()
                        .zip(kernel)
                        .map(|(w, k)| w * (k - k_mean) * (k - k_mean)),
                );
                if energy > 0.0 {
                    r / energy.sqrt()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Grid search for the template frequency with one parabolic refinement
/// around the discrete maximum.
pub fn estimate_template_frequency(
    trace: &PLTrace,
    params: &SensorParams,
    grid: &FrequencyGrid,
    norm: CorrelationNorm,
) -> Result<TemplateEstimate> {
    grid.validate()?;
    let ctx = CorrelationContext::new(trace, params)?;
    let curve = ctx.scan(grid, norm);
    let best = curve
        .iter()
        .enumerate()
        .fold(0, |b, (i, &(_, r))| if r > curve[b].1 { i } else { b });
    if best == 0 || best == curve.len() - 1 {
        return Err(Error::MaximumAtBoundary {
            omega: curve[best].0,
        });
    }
    let (r_lo, r_mid, r_hi) = (curve[best - 1].1, curve[best].1, curve[best + 1].1);
    let denom = r_lo - 2.0 * r_mid + r_hi;
    let shift = if denom < 0.0 {
        (0.5 * (r_lo - r_hi) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Ok(TemplateEstimate {
        omega_temp: curve[best].0 + shift * grid.step(),
        correlation_curve: curve,
        grid: *grid,
    })
}

/// Margin half-width per unit shot noise, `10^-beta / sqrt(T_I M f_sample)`.
pub fn margin_scale(beta: f64, plan: &AcquisitionPlan) -> f64 {
    10f64.powf(-beta) / (plan.duration() * plan.repetitions as f64 * plan.f_sample).sqrt()
}

/// Time-domain margins and their per-coefficient wavelet-domain bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSet {
    pub upper_time: Vec<f64>,
    pub lower_time: Vec<f64>,
    /// `u_jk`, levels `0..=J`.
    pub upper_coeffs: Vec<Vec<f64>>,
    /// `l_jk`, levels `0..=J`.
    pub lower_coeffs: Vec<Vec<f64>>,
    pub beta: f64,
    pub levels: usize,
    pub omega_temp: f64,
    pub boundary: Boundary,
    pub basis_name: String,
    pub plan: AcquisitionPlan,
}

/// Per-trace margin settings shared by the single-shot and batch paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginOptions {
    pub levels: usize,
    pub boundary: Boundary,
    pub noise: NoiseModel,
}

/// Decomposition depth used for denoising (details `d0..d8`).
pub const DEFAULT_TMT_LEVELS: usize = 8;

impl Default for MarginOptions {
    fn default() -> Self {
        Self {
            levels: DEFAULT_TMT_LEVELS,
            boundary: Boundary::Periodic,
            noise: NoiseModel::Verbatim,
        }
    }
}

/// Builds `U`, `L` on the plan's grid and the coefficient bounds
/// `l = min(d^U, d^L)`, `u = max(d^U, d^L)`.
pub fn build_margins(
    omega_temp: f64,
    beta: f64,
    params: &SensorParams,
    plan: &AcquisitionPlan,
    basis: &WaveletBasis,
    opts: MarginOptions,
) -> Result<MarginSet> {
    plan.validate()?;
    if !beta.is_finite() {
        return Err(Error::InvalidParams(format!(
            "filter order {beta} is not finite"
        )));
    }
    let scale = margin_scale(beta, plan);
    let times = plan.times();
    let (upper_time, lower_time): (Vec<f64>, Vec<f64>) = times
        .iter()
        .map(|&t| {
            let k = template(t, omega_temp, params);
            let half = scale * shot_noise(t, omega_temp, params, opts.noise);
            (k + half, k - half)
        })
        .unzip();
    let du = uwt_decompose(&upper_time, basis, opts.levels, opts.boundary)?;
    let dl = uwt_decompose(&lower_time, basis, opts.levels, opts.boundary)?;
    let (upper_coeffs, lower_coeffs) = du
        .details
        .iter()
        .zip(&dl.details)
        .map(|(u, l)| {
            u.iter()
                .zip(l)
                .map(|(&a, &b)| (a.max(b), a.min(b)))
                .unzip::<f64, f64, Vec<f64>, Vec<f64>>()
        })
        .unzip();
    Ok(MarginSet {
        upper_time,
        lower_time,
        upper_coeffs,
        lower_coeffs,
        beta,
        levels: opts.levels,
        omega_temp,
        boundary: opts.boundary,
        basis_name: basis.name.clone(),
        plan: *plan,
    })
}

/// Hard margin shrinkage of one coefficient.
#[inline]
pub fn clamp_coefficient(raw: f64, lower: f64, upper: f64) -> f64 {
    if raw > upper {
        upper
    } else if raw < lower {
        lower
    } else {
        raw
    }
}

fn same_grid(a: &AcquisitionPlan, b: &AcquisitionPlan) -> bool {
    a.t_i == b.t_i && a.f_sample == b.f_sample && a.n_samples() == b.n_samples()
}

/// Clamps the raw trace's detail coefficients into the margins and
/// reconstructs; the approximation `c_J` is left untouched.
pub fn tmt_denoise(trace: &PLTrace, margins: &MarginSet, basis: &WaveletBasis) -> Result<PLTrace> {
    if !same_grid(&trace.plan, &margins.plan) || trace.len() != margins.upper_time.len() {
        return Err(Error::GridMismatch(format!(
            "trace has {} samples from t_i = {:e} at {:e} Hz, margins {} from {:e} at {:e} Hz",
            trace.len(),
            trace.plan.t_i,
            trace.plan.f_sample,
            margins.upper_time.len(),
            margins.plan.t_i,
            margins.plan.f_sample
        )));
    }
    if basis.name != margins.basis_name {
        return Err(Error::GridMismatch(format!(
            "margins built with `{}`, denoising with `{}`",
            margins.basis_name, basis.name
        )));
    }
    let raw = uwt_decompose(&trace.values, basis, margins.levels, margins.boundary)?;
    let values = iuwt_reconstruct(&margins.shrink_coefficients(&raw)?, basis)?;
    trace.with_values(values)
}

impl MarginSet {
    /// Clamps every detail coefficient of `raw` into its margin interval;
    /// the approximation passes through.
    ///
    /// The bounds hold for the returned coefficients. Re-analysing their
    /// reconstruction projects them back onto the range of the redundant
    /// transform, which generally moves fine-scale values outside again.
    pub fn shrink_coefficients(&self, raw: &WaveletDecomposition) -> Result<WaveletDecomposition> {
        if raw.details.len() != self.upper_coeffs.len()
            || raw
                .details
                .iter()
                .zip(&self.upper_coeffs)
                .any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::GridMismatch("coefficient layout differs".into()));
        }
        Ok(raw.map(|level, k, v| match level {
            Some(j) => clamp_coefficient(v, self.lower_coeffs[j][k], self.upper_coeffs[j][k]),
            None => v,
        }))
    }
}

/// Full TMT settings for one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmtSettings {
    pub beta: f64,
    pub margins: MarginOptions,
    pub grid: FrequencyGrid,
    pub norm: CorrelationNorm,
}

/// Frequency search, margin construction and shrinkage in one call.
pub fn denoise_pipeline(
    trace: &PLTrace,
    params: &SensorParams,
    basis: &WaveletBasis,
    settings: &TmtSettings,
) -> Result<(PLTrace, TemplateEstimate)> {
    let estimate = estimate_template_frequency(trace, params, &settings.grid, settings.norm)?;
    let margins = build_margins(
        estimate.omega_temp,
        settings.beta,
        params,
        &trace.plan,
        basis,
        settings.margins,
    )?;
    let enhanced = tmt_denoise(trace, &margins, basis)?;
    Ok((enhanced, estimate))
}

/// Margins for every filter order at once: by linearity
/// `d^U = d^K + s d^(Delta N)` and `d^L = d^K - s d^(Delta N)`.
#[derive(Debug, Clone)]
pub struct MarginFamily {
    center: WaveletDecomposition,
    spread: WaveletDecomposition,
    plan: AcquisitionPlan,
}

impl MarginFamily {
    pub fn new(
        omega_temp: f64,
        params: &SensorParams,
        plan: &AcquisitionPlan,
        basis: &WaveletBasis,
        opts: MarginOptions,
    ) -> Result<Self> {
        let times = plan.times();
        let k: Vec<f64> = times
            .iter()
            .map(|&t| template(t, omega_temp, params))
            .collect();
        let dn: Vec<f64> = times
            .iter()
            .map(|&t| shot_noise(t, omega_temp, params, opts.noise))
            .collect();
        Ok(Self {
            center: uwt_decompose(&k, basis, opts.levels, opts.boundary)?,
            spread: uwt_decompose(&dn, basis, opts.levels, opts.boundary)?,
            plan: *plan,
        })
    }

    /// Shrinks a raw decomposition (same layout) at filter order `beta`.
    pub fn shrink(&self, raw: &WaveletDecomposition, beta: f64) -> WaveletDecomposition {
        let s = margin_scale(beta, &self.plan);
        raw.map(|level, k, v| match level {
            Some(j) => {
                let c = self.center.details[j][k];
                let half = (s * self.spread.details[j][k]).abs();
                clamp_coefficient(v, c - half, c + half)
            }
            None => v,
        })
    }
}
