//! Synthetic Ramsey photoluminescence for a single NV sensor.
//!
//! The pi/2 - tau - pi/2 sequence is reduced to the projection probability
//! `p0(t) = (1 + cos(omega t) exp(-(t / T2*)^p)) / 2`. Each stored PL sample is
//! the mean photon count per repetition over `M` repetitions.

use std::f64::consts::PI;

use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamId;

/// Electron gyromagnetic ratio, rad s^-1 T^-1.
pub const GAMMA_E: f64 = -2.0 * PI * 28.024e9;
/// Readout contrast of the reference sensor.
pub const DEFAULT_CONTRAST: f64 = 0.2143;
/// Mean photons per repetition averaged over both spin states.
pub const DEFAULT_N_AVE: f64 = 0.196;
/// Dephasing time, seconds.
pub const DEFAULT_T2_STAR: f64 = 3.9e-6;
pub const DEFAULT_DECAY_EXPONENT: f64 = 2.0;
/// Calibration field, tesla.
pub const DEFAULT_B_CALIB: f64 = 100e-6;
pub const DEFAULT_F_SAMPLE: f64 = 128e6;
pub const DEFAULT_REPETITIONS: u64 = 25_000;

const CONSISTENCY_TOL: f64 = 1e-9;

/// Photon statistics and coherence of the NV readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    /// Mean photons per repetition in |0>.
    pub n0: f64,
    /// Mean photons per repetition in |1>.
    pub n1: f64,
    /// `(n0 - n1) / n0`.
    pub contrast: f64,
    /// `(n0 + n1) / 2`.
    pub n_ave: f64,
    /// Seconds.
    pub t2_star: f64,
    pub decay_exponent: f64,
    /// rad/s.
    pub omega_calib: f64,
    /// rad s^-1 T^-1.
    pub gamma_e: f64,
}

impl SensorParams {
    /// Builds parameters from contrast and mean photon number, deriving the
    /// per-state levels and the calibration frequency.
    pub fn from_contrast(
        contrast: f64,
        n_ave: f64,
        t2_star: f64,
        decay_exponent: f64,
        b_calib: f64,
        gamma_e: f64,
    ) -> Result<Self> {
        let (n0, n1) = derive_photon_levels(contrast, n_ave)?;
        let params = Self {
            n0,
            n1,
            contrast,
            n_ave,
            t2_star,
            decay_exponent,
            omega_calib: calib_frequency(b_calib, gamma_e),
            gamma_e,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParams(m));
        let all = [
            self.n0,
            self.n1,
            self.contrast,
            self.n_ave,
            self.t2_star,
            self.decay_exponent,
            self.omega_calib,
            self.gamma_e,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("non-finite value".into());
        }
        if !(self.n1 > 0.0 && self.n0 > self.n1) {
            return fail(format!(
                "need n0 > n1 > 0 (n0 = {}, n1 = {})",
                self.n0, self.n1
            ));
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return fail(format!("contrast {} outside (0, 1)", self.contrast));
        }
        if self.t2_star <= 0.0 {
            return fail(format!("T2* = {} must be positive", self.t2_star));
        }
        if self.decay_exponent < 1.0 {
            return fail(format!("decay exponent {} < 1", self.decay_exponent));
        }
        if self.omega_calib < 0.0 {
            return fail("negative calibration frequency".into());
        }
        let c = (self.n0 - self.n1) / self.n0;
        if (c - self.contrast).abs() > CONSISTENCY_TOL {
            return fail(format!(
                "contrast {} disagrees with (n0 - n1)/n0 = {c}",
                self.contrast
            ));
        }
        let ave = 0.5 * (self.n0 + self.n1);
        if (ave - self.n_ave).abs() > CONSISTENCY_TOL {
            return fail(format!(
                "n_ave {} disagrees with (n0 + n1)/2 = {ave}",
                self.n_ave
            ));
        }
        Ok(())
    }

    /// Sensing frequency for an additional field `delta_b` on top of the
    /// calibration field.
    pub fn sensing_frequency(&self, b_calib: f64, delta_b: f64) -> f64 {
        calib_frequency(b_calib + delta_b, self.gamma_e)
    }

    /// Dephasing envelope `exp(-(t / T2*)^p)`.
    pub fn envelope(&self, t: f64) -> f64 {
        (-(t / self.t2_star).powf(self.decay_exponent)).exp()
    }

    /// Probability of projecting onto |0> after free evolution `t`.
    pub fn p0(&self, t: f64, omega: f64) -> f64 {
        0.5 * (1.0 + (omega * t).cos() * self.envelope(t))
    }
}

impl Default for SensorParams {
    fn default() -> Self {
        Self::from_contrast(
            DEFAULT_CONTRAST,
            DEFAULT_N_AVE,
            DEFAULT_T2_STAR,
            DEFAULT_DECAY_EXPONENT,
            DEFAULT_B_CALIB,
            GAMMA_E,
        )
        .expect("default sensor parameters are valid")
    }
}

/// Solves `C = (n0 - n1)/n0`, `n_ave = (n0 + n1)/2` for `(n0, n1)`.
pub fn derive_photon_levels(contrast: f64, n_ave: f64) -> Result<(f64, f64)> {
    if !(contrast > 0.0 && contrast < 1.0) {
        return Err(Error::InvalidParams(format!(
            "contrast {contrast} outside (0, 1)"
        )));
    }
    if !(n_ave > 0.0 && n_ave.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "n_ave {n_ave} must be positive"
        )));
    }
    let n0 = 2.0 * n_ave / (2.0 - contrast);
    Ok((n0, n0 * (1.0 - contrast)))
}

/// Precession frequency `|gamma_e| * B`.
pub fn calib_frequency(b_field: f64, gamma_e: f64) -> f64 {
    gamma_e.abs() * b_field
}

/// Expected PL per repetition,
/// `K(t, w) = (1 + cos(w t) exp(-(t/T2*)^p)) (n0 - n1) / 2 + n1`.
pub fn template(t: f64, omega: f64, params: &SensorParams) -> f64 {
    params.p0(t, omega) * (params.n0 - params.n1) + params.n1
}

/// Shot-noise amplitude model for the margin construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `sqrt((n0 - n1)/4 sin^2(wt) + n0 cos^2(wt/2) + n1 sin^2(wt/2))`.
    #[default]
    Verbatim,
    /// Same with the projection term replaced by
    /// `(n0 - n1)^2/4 sin^2(wt) exp(-2 (t/T2*)^p)`.
    SquaredContrast,
}

/// Photon-number standard deviation per repetition, `Delta N(t)`.
pub fn shot_noise(t: f64, omega_temp: f64, params: &SensorParams, model: NoiseModel) -> f64 {
    let phase = omega_temp * t;
    let dn = params.n0 - params.n1;
    let projection = match model {
        NoiseModel::Verbatim => dn / 4.0 * phase.sin().powi(2),
        NoiseModel::SquaredContrast => {
            dn * dn / 4.0 * phase.sin().powi(2) * params.envelope(t).powi(2)
        }
    };
    let half = 0.5 * phase;
    (projection + params.n0 * half.cos().powi(2) + params.n1 * half.sin().powi(2)).sqrt()
}

/// Time window, sampling and repetition budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionPlan {
    /// Seconds.
    pub t_i: f64,
    /// Seconds.
    pub t_f: f64,
    /// Hz.
    pub f_sample: f64,
    /// Repetitions averaged into each sample.
    pub repetitions: u64,
    /// Independent experiments in an ensemble.
    pub n_exp: usize,
    pub seed: u64,
}

impl AcquisitionPlan {
    pub fn new(
        t_i: f64,
        t_f: f64,
        f_sample: f64,
        repetitions: u64,
        n_exp: usize,
        seed: u64,
    ) -> Result<Self> {
        let plan = Self {
            t_i,
            t_f,
            f_sample,
            repetitions,
            n_exp,
            seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidPlan(m));
        if !(self.t_i.is_finite() && self.t_f.is_finite() && self.f_sample.is_finite()) {
            return fail("non-finite time or frequency".into());
        }
        if !(self.t_i >= 0.0 && self.t_f > self.t_i) {
            return fail(format!(
                "need t_f > t_i >= 0 (t_i = {}, t_f = {})",
                self.t_i, self.t_f
            ));
        }
        if self.f_sample <= 0.0 {
            return fail(format!(
                "sampling frequency {} must be positive",
                self.f_sample
            ));
        }
        if self.repetitions < 1 {
            return fail("repetitions must be at least 1".into());
        }
        if self.n_exp < 1 {
            return fail("ensemble size must be at least 1".into());
        }
        if self.n_samples() < 4 {
            return fail(format!(
                "window holds {} samples, need at least 4",
                self.n_samples()
            ));
        }
        Ok(())
    }

    /// `T_I = t_f - t_i`.
    pub fn duration(&self) -> f64 {
        self.t_f - self.t_i
    }

    /// `round(T_I f_sample)`.
    pub fn n_samples(&self) -> usize {
        (self.duration() * self.f_sample).round() as usize
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_i + k as f64 / self.f_sample
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples()).map(|k| self.time(k)).collect()
    }

    /// `M t_f`, the integration time of the last sample.
    pub fn integration_time(&self) -> f64 {
        self.repetitions as f64 * self.t_f
    }

    pub fn with_repetitions(mut self, repetitions: u64) -> Self {
        self.repetitions = repetitions;
        self
    }

    pub fn with_window(mut self, t_i: f64, t_f: f64) -> Self {
        self.t_i = t_i;
        self.t_f = t_f;
        self
    }

    pub fn with_f_sample(mut self, f_sample: f64) -> Self {
        self.f_sample = f_sample;
        self
    }
}

/// Uniformly sampled PL time series, photons per repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub params: SensorParams,
    pub plan: AcquisitionPlan,
}

impl PLTrace {
    /// Wraps measured values on the plan's grid.
    pub fn new(values: Vec<f64>, params: SensorParams, plan: AcquisitionPlan) -> Result<Self> {
        plan.validate()?;
        if values.len() != plan.n_samples() {
            return Err(Error::InvalidTrace(format!(
                "{} values for a {}-sample plan",
                values.len(),
                plan.n_samples()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrace("non-finite sample".into()));
        }
        Ok(Self {
            times: plan.times(),
            values,
            params,
            plan,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Noise-free trace `K(t, omega)` on the plan's grid.
    pub fn noiseless(params: &SensorParams, plan: &AcquisitionPlan, omega: f64) -> Result<Self> {
        let values = plan
            .times()
            .iter()
            .map(|&t| template(t, omega, params))
            .collect();
        Self::new(values, *params, *plan)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.params, self.plan)
    }
}

/// How photons are drawn for each repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhotonModel {
    /// Bernoulli(p0) spin projection followed by a Poisson photon count with
    /// mean `n0` or `n1`.
    #[default]
    Compound,
    /// A single Poisson count with mean `K(t)`.
    PurePoisson,
}

fn poisson(rate: f64, rng: &mut impl rand::Rng) -> f64 {
    if rate <= 0.0 {
        0.0
    } else {
        Poisson::new(rate)
            .expect("finite positive rate")
            .sample(rng)
    }
}

/// Total photons over `m` repetitions at projection probability `p0`.
fn photon_total(
    p0: f64,
    m: u64,
    params: &SensorParams,
    model: PhotonModel,
    rng: &mut impl rand::Rng,
) -> f64 {
    match model {
        PhotonModel::Compound => {
            // Sum of m compound draws: K ~ Bin(m, p0) repetitions land in |0>,
            // and a sum of Poissons is Poisson.
            let k = Binomial::new(m, p0.clamp(0.0, 1.0))
                .expect("valid binomial")
                .sample(rng);
            poisson(k as f64 * params.n0, rng) + poisson((m - k) as f64 * params.n1, rng)
        }
        PhotonModel::PurePoisson => {
            poisson(m as f64 * (p0 * (params.n0 - params.n1) + params.n1), rng)
        }
    }
}

/// Simulates one experiment's PL trace at precession frequency `omega_true`.
pub fn simulate_trace(
    params: &SensorParams,
    plan: &AcquisitionPlan,
    omega_true: f64,
    stream: StreamId,
    model: PhotonModel,
) -> Result<PLTrace> {
    params.validate()?;
    plan.validate()?;
    if !(omega_true > 0.0 && omega_true.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "omega_true = {omega_true} must be positive"
        )));
    }
    let m = plan.repetitions;
    let values = (0..plan.n_samples())
        .map(|k| {
            let mut rng = stream.sample_rng(k as u64);
            let p0 = params.p0(plan.time(k), omega_true);
            photon_total(p0, m, params, model, &mut rng) / m as f64
        })
        .collect();
    PLTrace::new(values, *params, *plan)
}

/// Exact per-repetition variance of the compound photon draw at `t`.
pub fn compound_variance(t: f64, omega: f64, params: &SensorParams) -> f64 {
    let p0 = params.p0(t, omega);
    let dn = params.n0 - params.n1;
    p0 * params.n0 + (1.0 - p0) * params.n1 + p0 * (1.0 - p0) * dn * dn
}
