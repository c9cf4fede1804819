//! TOML run configuration. Every section except `[plan]` is optional;
//! unknown keys are rejected. All quantities are SI (seconds, hertz, tesla).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tmt_core::bench::{BenchConfig, TemplateSharing};
use tmt_core::ramsey::{
    derive_photon_levels, AcquisitionPlan, NoiseModel, PhotonModel, SensorParams, DEFAULT_B_CALIB,
    DEFAULT_CONTRAST, DEFAULT_DECAY_EXPONENT, DEFAULT_F_SAMPLE, DEFAULT_N_AVE, DEFAULT_REPETITIONS,
    DEFAULT_T2_STAR, GAMMA_E,
};
use tmt_core::tmt::{CorrelationNorm, FrequencyGrid, MarginOptions, DEFAULT_TMT_LEVELS};
use tmt_core::wavelet::{Boundary, WaveletBasis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Denoise,
    SweepBeta,
    Benchmark,
    GainProfile,
    FitScaling,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Denoise => "denoise",
            Mode::SweepBeta => "sweep-beta",
            Mode::Benchmark => "benchmark",
            Mode::GainProfile => "gain-profile",
            Mode::FitScaling => "fit-scaling",
        }
    }

    /// Monte-Carlo benchmark modes insist on an explicit seed.
    pub fn requires_seed(self) -> bool {
        !matches!(self, Mode::Simulate | Mode::Denoise)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub sensor: SensorSection,
    pub plan: PlanSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either `contrast` + `n_ave` or `n0` + `n1`; the missing pair is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub contrast: Option<f64>,
    pub n_ave: Option<f64>,
    pub n0: Option<f64>,
    pub n1: Option<f64>,
    #[serde(default = "d_t2")]
    pub t2_star: f64,
    #[serde(default = "d_decay")]
    pub decay_exponent: f64,
    #[serde(default = "d_b_calib")]
    pub b_calib: f64,
    #[serde(default = "d_gamma")]
    pub gamma_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub t_i: f64,
    pub t_f: f64,
    #[serde(default = "d_f_sample")]
    pub f_sample: f64,
    #[serde(default = "d_repetitions")]
    pub repetitions: u64,
    #[serde(default = "d_n_exp")]
    pub n_exp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    #[serde(default = "d_basis")]
    pub basis: String,
    #[serde(default = "d_levels")]
    pub levels: usize,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub noise_model: NoiseModel,
    #[serde(default)]
    pub correlation: CorrelationNorm,
    #[serde(default)]
    pub template_sharing: TemplateSharing,
    /// Filter order for `simulate` and `denoise`.
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "d_beta_min")]
    pub beta_min: f64,
    #[serde(default = "d_beta_max")]
    pub beta_max: f64,
    #[serde(default = "d_beta_step")]
    pub beta_step: f64,
    /// Explicit grid; overrides the min/max/step range.
    pub beta_values: Option<Vec<f64>>,
    /// Relative half width of the template-frequency search.
    #[serde(default = "d_half_width")]
    pub search_half_width: f64,
    #[serde(default = "d_search_points")]
    pub search_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Must agree with the subcommand when given.
    pub mode: Option<Mode>,
    /// Sensing field on top of the calibration field, tesla.
    #[serde(default = "d_delta_b")]
    pub delta_b: f64,
    /// Detection points scored; all in the window when absent.
    pub n_sd: Option<usize>,
    #[serde(default)]
    pub photon_model: PhotonModel,
    /// Window ends for `sweep-beta`, `benchmark` and `fit-scaling`;
    /// `[plan.t_f]` when absent.
    pub durations: Option<Vec<f64>>,
    #[serde(default = "d_series")]
    pub repetitions_series: Vec<u64>,
    /// Longest window of `gain-profile`, in detection points.
    #[serde(default = "d_n_sd_max")]
    pub n_sd_max: usize,
    /// Trace to denoise (CSV with a `value` column) instead of simulating.
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d_directory")]
    pub directory: PathBuf,
    #[serde(default = "d_formats")]
    pub formats: Vec<Format>,
}

fn d_t2() -> f64 {
    DEFAULT_T2_STAR
}
fn d_decay() -> f64 {
    DEFAULT_DECAY_EXPONENT
}
fn d_b_calib() -> f64 {
    DEFAULT_B_CALIB
}
fn d_gamma() -> f64 {
    GAMMA_E
}
fn d_f_sample() -> f64 {
    DEFAULT_F_SAMPLE
}
fn d_repetitions() -> u64 {
    DEFAULT_REPETITIONS
}
fn d_n_exp() -> usize {
    200
}
fn d_basis() -> String {
    "bior6.8".into()
}
fn d_levels() -> usize {
    DEFAULT_TMT_LEVELS
}
fn d_beta_min() -> f64 {
    -4.0
}
fn d_beta_max() -> f64 {
    2.0
}
fn d_beta_step() -> f64 {
    0.1
}
fn d_half_width() -> f64 {
    FrequencyGrid::DEFAULT_HALF_WIDTH
}
fn d_search_points() -> usize {
    FrequencyGrid::DEFAULT_POINTS
}
fn d_delta_b() -> f64 {
    tmt_core::bench::DEFAULT_DELTA_B
}
fn d_series() -> Vec<u64> {
    vec![25_000, 50_000, 100_000, 200_000, 400_000]
}
fn d_n_sd_max() -> usize {
    9
}
fn d_directory() -> PathBuf {
    "tmt-out".into()
}
fn d_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            contrast: None,
            n_ave: None,
            n0: None,
            n1: None,
            t2_star: d_t2(),
            decay_exponent: d_decay(),
            b_calib: d_b_calib(),
            gamma_e: d_gamma(),
        }
    }
}

impl Default for FilterSection {
    fn default() -> Self {
        toml::from_str("").expect("empty filter section")
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        toml::from_str("").expect("empty experiment section")
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        toml::from_str("").expect("empty output section")
    }
}

/// Parses and validates a configuration, filling every derived field so
/// the result is a complete record of the run.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.sensor.fill()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

impl SensorSection {
    fn fill(&mut self) -> Result<()> {
        let invalid = |m: &str| Err(Error::Invalid(format!("sensor: {m}")));
        match (self.contrast, self.n_ave, self.n0, self.n1) {
            (c, a, None, None) => {
                let c = c.unwrap_or(DEFAULT_CONTRAST);
                let a = a.unwrap_or(DEFAULT_N_AVE);
                let (n0, n1) = derive_photon_levels(c, a)?;
                *self = Self {
                    contrast: Some(c),
                    n_ave: Some(a),
                    n0: Some(n0),
                    n1: Some(n1),
                    ..self.clone()
                };
            }
            (None, None, Some(n0), Some(n1)) => {
                if !(n1 > 0.0 && n0 > n1) {
                    return invalid(&format!("need n0 > n1 > 0, got n0 = {n0}, n1 = {n1}"));
                }
                self.contrast = Some((n0 - n1) / n0);
                self.n_ave = Some(0.5 * (n0 + n1));
            }
            (Some(c), Some(a), Some(n0), Some(n1)) => {
                let (d0, d1) = derive_photon_levels(c, a)?;
                if (d0 - n0).abs() > 1e-9 || (d1 - n1).abs() > 1e-9 {
                    return invalid("n0/n1 disagree with contrast/n_ave");
                }
            }
            _ => return invalid("give either contrast and n_ave, or n0 and n1"),
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn sensor_params(&self) -> Result<SensorParams> {
        let s = &self.sensor;
        let missing = || Error::Invalid("sensor: photon levels not resolved".into());
        let params = SensorParams {
            n0: s.n0.ok_or_else(missing)?,
            n1: s.n1.ok_or_else(missing)?,
            contrast: s.contrast.ok_or_else(missing)?,
            n_ave: s.n_ave.ok_or_else(missing)?,
            t2_star: s.t2_star,
            decay_exponent: s.decay_exponent,
            omega_calib: tmt_core::ramsey::calib_frequency(s.b_calib, s.gamma_e),
            gamma_e: s.gamma_e,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn omega_sense(&self) -> Result<f64> {
        let p = self.sensor_params()?;
        Ok(p.sensing_frequency(self.sensor.b_calib, self.experiment.delta_b))
    }

    pub fn plan(&self, seed: u64) -> Result<AcquisitionPlan> {
        let p = &self.plan;
        Ok(AcquisitionPlan::new(
            p.t_i,
            p.t_f,
            p.f_sample,
            p.repetitions,
            p.n_exp,
            seed,
        )?)
    }

    pub fn basis(&self) -> Result<WaveletBasis> {
        Ok(WaveletBasis::from_name(&self.filter.basis)?)
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        let p = self.sensor_params()?;
        let g = FrequencyGrid::around(
            p.omega_calib,
            self.filter.search_half_width,
            self.filter.search_points,
        );
        g.validate()?;
        Ok(g)
    }

    pub fn margin_options(&self) -> MarginOptions {
        MarginOptions {
            levels: self.filter.levels,
            boundary: self.filter.boundary,
            noise: self.filter.noise_model,
        }
    }

    pub fn beta_grid(&self) -> Result<Vec<f64>> {
        let f = &self.filter;
        let grid = match &f.beta_values {
            Some(v) => v.clone(),
            None => {
                if !(f.beta_step > 0.0 && f.beta_max >= f.beta_min) {
                    return Err(Error::Invalid(format!(
                        "filter: beta range [{}, {}] with step {} is empty",
                        f.beta_min, f.beta_max, f.beta_step
                    )));
                }
                let n = ((f.beta_max - f.beta_min) / f.beta_step + 1e-9).floor() as usize;
                (0..=n)
                    .map(|i| f.beta_min + f.beta_step * i as f64)
                    .collect()
            }
        };
        if grid.len() < 3
            || grid.iter().any(|b| !b.is_finite())
            || grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Invalid(
                "filter: beta grid needs at least 3 finite, strictly increasing values".into(),
            ));
        }
        Ok(grid)
    }

    /// Window ends for duration-family modes.
    pub fn durations(&self) -> Vec<f64> {
        self.experiment
            .durations
            .clone()
            .unwrap_or_else(|| vec![self.plan.t_f])
    }

    /// Benchmark configuration for the plan's window and budget.
    pub fn bench_config(&self, seed: u64) -> Result<BenchConfig> {
        let params = self.sensor_params()?;
        Ok(BenchConfig {
            params,
            plan: self.plan(seed)?,
            omega_true: self.omega_sense()?,
            omega_reference: params.omega_calib,
            basis: self.basis()?,
            margins: self.margin_options(),
            grid: self.grid()?,
            norm: self.filter.correlation,
            photon_model: self.experiment.photon_model,
            sharing: self.filter.template_sharing,
            n_sd: self.experiment.n_sd,
            stream_tag: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor_params()?;
        self.plan(0)?;
        self.basis()?;
        self.grid()?;
        self.beta_grid()?;
        if !self.filter.beta.is_finite() {
            return Err(Error::Invalid("filter: beta must be finite".into()));
        }
        let e = &self.experiment;
        if !e.delta_b.is_finite() || self.omega_sense()? <= 0.0 {
            return Err(Error::Invalid(
                "experiment: delta_b must keep the field positive".into(),
            ));
        }
        if let Some(ds) = &e.durations {
            if ds.is_empty() {
                return Err(Error::Invalid("experiment: durations is empty".into()));
            }
            for &t_f in ds {
                AcquisitionPlan::new(self.plan.t_i, t_f, self.plan.f_sample, 1, 1, 0)?;
            }
        }
        if e.repetitions_series.contains(&0) {
            return Err(Error::Invalid(
                "experiment: repetitions must be at least 1".into(),
            ));
        }
        if e.n_sd == Some(0) || e.n_sd_max == 0 {
            return Err(Error::Invalid(
                "experiment: need at least one detection point".into(),
            ));
        }
        if self.output.formats.is_empty() {
            return Err(Error::Invalid("output: no formats selected".into()));
        }
        Ok(())
    }
}
