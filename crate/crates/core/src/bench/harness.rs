use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detection::{all_detection_points, find_detection_points, DetectionPointSet};
use super::stats::{signal_amplitude, snr, stats_from_samples, EnsembleStats};
use crate::error::{Error, Result};
use crate::ramsey::{simulate_trace, AcquisitionPlan, PhotonModel, SensorParams, DEFAULT_B_CALIB};
use crate::rng::{mix, StreamId};
use crate::tmt::{
    estimate_template_frequency, CorrelationNorm, FrequencyGrid, MarginFamily, MarginOptions,
};
use crate::wavelet::{iuwt_reconstruct, uwt_decompose, WaveletBasis};

/// Whether each ensemble member searches its own template frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateSharing {
    #[default]
    PerMember,
    /// The first member's estimate is reused for the whole ensemble.
    Shared,
}

/// One Monte-Carlo configuration: sensor, acquisition, field and filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub params: SensorParams,
    pub plan: AcquisitionPlan,
    /// Precession frequency during acquisition (calibration plus sensing field).
    pub omega_true: f64,
    /// Frequency known to the experimenter; places the detection points and
    /// is the zero of the sensing signal.
    pub omega_reference: f64,
    pub basis: WaveletBasis,
    pub margins: MarginOptions,
    pub grid: FrequencyGrid,
    pub norm: CorrelationNorm,
    pub photon_model: PhotonModel,
    pub sharing: TemplateSharing,
    /// Detection points to score; all in the window when `None`.
    pub n_sd: Option<usize>,
    /// Extra salt for the random streams.
    pub stream_tag: u64,
}

/// Default sensing field added on top of the calibration field, tesla.
pub const DEFAULT_DELTA_B: f64 = 2e-6;

impl BenchConfig {
    /// Default sensor and filter for `plan`, sensing `DEFAULT_DELTA_B`.
    pub fn new(plan: AcquisitionPlan) -> Self {
        let params = SensorParams::default();
        Self {
            omega_true: params.sensing_frequency(DEFAULT_B_CALIB, DEFAULT_DELTA_B),
            omega_reference: params.omega_calib,
            basis: WaveletBasis::bior6_8(),
            margins: MarginOptions::default(),
            grid: FrequencyGrid::default_for(&params),
            norm: CorrelationNorm::default(),
            photon_model: PhotonModel::default(),
            sharing: TemplateSharing::default(),
            n_sd: None,
            stream_tag: 0,
            params,
            plan,
        }
    }

    /// Random-stream key: distinct acquisitions draw independent numbers,
    /// filter settings do not enter (common random numbers across them).
    pub fn stream_config(&self) -> u64 {
        [
            self.stream_tag,
            self.plan.repetitions,
            self.plan.t_i.to_bits(),
            self.plan.t_f.to_bits(),
            self.plan.f_sample.to_bits(),
            self.omega_true.to_bits(),
        ]
        .iter()
        .fold(0u64, |h, &v| mix(h ^ v))
    }

    /// Calibration-only twin: same acquisition budget, no sensing field.
    pub fn calibration(&self) -> Self {
        Self {
            omega_true: self.omega_reference,
            ..self.clone()
        }
    }

    pub fn detection_points(&self) -> Result<DetectionPointSet> {
        match self.n_sd {
            Some(n) => find_detection_points(
                self.omega_reference,
                &self.plan,
                n,
                &self.params,
                self.omega_true,
            ),
            None => all_detection_points(
                self.omega_reference,
                &self.plan,
                &self.params,
                self.omega_true,
            ),
        }
    }

    /// PL change at the detection points caused by the sensing field.
    pub fn signal_amplitude(&self) -> Result<f64> {
        let points = self.detection_points()?;
        Ok(signal_amplitude(
            &points,
            &self.params,
            self.omega_true,
            self.omega_reference,
        ))
    }
}

/// Raw and per-filter-order statistics of one simulated ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRun {
    pub points: DetectionPointSet,
    pub raw: EnsembleStats,
    pub tmt: Vec<EnsembleStats>,
    pub betas: Vec<f64>,
    pub omega_temps: Vec<f64>,
}

struct ExperimentOutcome {
    raw: Vec<f64>,
    per_beta: Vec<Vec<f64>>,
    omega_temp: f64,
}

fn run_experiment(
    cfg: &BenchConfig,
    points: &DetectionPointSet,
    betas: &[f64],
    index: usize,
    shared_omega: Option<f64>,
) -> Result<ExperimentOutcome> {
    let stream = StreamId::new(cfg.plan.seed, cfg.stream_config(), index as u64);
    let trace = simulate_trace(
        &cfg.params,
        &cfg.plan,
        cfg.omega_true,
        stream,
        cfg.photon_model,
    )?;
    let omega_temp = match shared_omega {
        Some(w) => w,
        None => estimate_template_frequency(&trace, &cfg.params, &cfg.grid, cfg.norm)?.omega_temp,
    };
    let pick = |values: &[f64]| -> Vec<f64> { points.indices.iter().map(|&k| values[k]).collect() };
    let raw = pick(&trace.values);
    let mut per_beta = Vec::with_capacity(betas.len());
    if !betas.is_empty() {
        let family =
            MarginFamily::new(omega_temp, &cfg.params, &cfg.plan, &cfg.basis, cfg.margins)?;
        let coeffs = uwt_decompose(
            &trace.values,
            &cfg.basis,
            cfg.margins.levels,
            cfg.margins.boundary,
        )?;
        for &beta in betas {
            let enhanced = iuwt_reconstruct(&family.shrink(&coeffs, beta), &cfg.basis)?;
            per_beta.push(pick(&enhanced));
        }
    }
    Ok(ExperimentOutcome {
        raw,
        per_beta,
        omega_temp,
    })
}

/// Simulates `n_exp` experiments, denoises each at every filter order and
/// scores raw and enhanced PL at the detection points.
///
/// Experiments run on the current rayon pool; the result does not depend on
/// the number of threads.
pub fn run_ensemble(cfg: &BenchConfig, betas: &[f64]) -> Result<EnsembleRun> {
    cfg.params.validate()?;
    cfg.plan.validate()?;
    let points = cfg.detection_points()?;
    let shared = match cfg.sharing {
        TemplateSharing::PerMember => None,
        TemplateSharing::Shared => Some(run_experiment(cfg, &points, &[], 0, None)?.omega_temp),
    };
    let outcomes: Vec<ExperimentOutcome> = (0..cfg.plan.n_exp)
        .into_par_iter()
        .map(|i| run_experiment(cfg, &points, betas, i, shared))
        .collect::<Result<_>>()?;
    let raw_samples: Vec<Vec<f64>> = outcomes.iter().map(|o| o.raw.clone()).collect();
    let raw = stats_from_samples(&raw_samples, &points, None)?;
    let tmt = (0..betas.len())
        .map(|b| {
            let samples: Vec<Vec<f64>> = outcomes.iter().map(|o| o.per_beta[b].clone()).collect();
            stats_from_samples(&samples, &points, Some(betas[b]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleRun {
        points,
        raw,
        tmt,
        betas: betas.to_vec(),
        omega_temps: outcomes.iter().map(|o| o.omega_temp).collect(),
    })
}

/// Filter orders -4.0, -3.9, ..., 2.0.
pub fn default_beta_grid() -> Vec<f64> {
    (0..=60).map(|i| -4.0 + 0.1 * i as f64).collect()
}

fn validate_beta_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::InvalidBetaGrid(format!(
            "{} values, need at least 3",
            grid.len()
        )));
    }
    if grid.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidBetaGrid("non-finite value".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidBetaGrid(
            "values must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Bias-variance curve over filter orders with its MSE minimiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSweep {
    pub raw: EnsembleStats,
    pub curve: Vec<EnsembleStats>,
    pub betas: Vec<f64>,
    pub beta_opt: f64,
    pub opt_index: usize,
    /// The minimiser sits on a grid endpoint.
    pub opt_on_boundary: bool,
    pub points: DetectionPointSet,
    pub omega_temps: Vec<f64>,
}

impl BetaSweep {
    pub fn optimum(&self) -> &EnsembleStats {
        &self.curve[self.opt_index]
    }
}

/// Runs the full simulate / denoise / score pipeline for every filter order
/// with common random numbers across the grid.
pub fn sweep_beta(cfg: &BenchConfig, beta_grid: &[f64]) -> Result<BetaSweep> {
    validate_beta_grid(beta_grid)?;
    let run = run_ensemble(cfg, beta_grid)?;
    let opt_index = run.tmt.iter().enumerate().fold(0, |best, (i, s)| {
        if s.fringe_averaged_mse < run.tmt[best].fringe_averaged_mse {
            i
        } else {
            best
        }
    });
    Ok(BetaSweep {
        beta_opt: beta_grid[opt_index],
        opt_on_boundary: opt_index == 0 || opt_index == beta_grid.len() - 1,
        opt_index,
        raw: run.raw,
        curve: run.tmt,
        betas: run.betas,
        points: run.points,
        omega_temps: run.omega_temps,
    })
}

/// Filter order minimising the MSE of calibration-only PL acquired with
/// the same `(T_I, M, f_sample)` as `cfg`.
pub fn calibrate_beta(cfg: &BenchConfig, beta_grid: &[f64]) -> Result<f64> {
    Ok(sweep_beta(&cfg.calibration(), beta_grid)?.beta_opt)
}

/// SNR of raw and TMT-enhanced PL for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub repetitions: u64,
    pub t_f: f64,
    pub f_sample: f64,
    /// `M t_f`, seconds.
    pub integration_time: f64,
    pub n_sd: usize,
    pub delta_n: f64,
    pub beta: f64,
    pub mse_raw: f64,
    pub mse_raw_se: f64,
    pub mse_tmt: f64,
    pub mse_tmt_se: f64,
    pub snr_raw: f64,
    pub snr_tmt: f64,
}

/// Raw SNR and TMT SNR at the sweep optimum.
pub fn snr_at_optimum(cfg: &BenchConfig, beta_grid: &[f64]) -> Result<SnrPoint> {
    let sweep = sweep_beta(cfg, beta_grid)?;
    snr_point(cfg, &sweep.raw, sweep.optimum(), sweep.points.len())
}

fn snr_point(
    cfg: &BenchConfig,
    raw: &EnsembleStats,
    tmt: &EnsembleStats,
    n_sd: usize,
) -> Result<SnrPoint> {
    let delta_n = cfg.signal_amplitude()?;
    Ok(SnrPoint {
        repetitions: cfg.plan.repetitions,
        t_f: cfg.plan.t_f,
        f_sample: cfg.plan.f_sample,
        integration_time: cfg.plan.integration_time(),
        n_sd,
        delta_n,
        beta: tmt.beta.unwrap_or(f64::NEG_INFINITY),
        mse_raw: raw.fringe_averaged_mse,
        mse_raw_se: raw.fringe_averaged_mse_se,
        mse_tmt: tmt.fringe_averaged_mse,
        mse_tmt_se: tmt.fringe_averaged_mse_se,
        snr_raw: snr(raw, delta_n)?,
        snr_tmt: snr(tmt, delta_n)?,
    })
}

/// SNR at the optimum for each repetition count in `repetitions`.
pub fn snr_series(
    cfg: &BenchConfig,
    repetitions: &[u64],
    beta_grid: &[f64],
) -> Result<Vec<SnrPoint>> {
    repetitions
        .iter()
        .map(|&m| {
            let c = BenchConfig {
                plan: cfg.plan.with_repetitions(m),
                ..cfg.clone()
            };
            snr_at_optimum(&c, beta_grid)
        })
        .collect()
}

/// TMT gain at the calibration-derived filter order for one duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub n_sd: usize,
    pub t_i: f64,
    pub t_f: f64,
    pub f_sample: f64,
    pub beta_calib: f64,
    pub mse_raw: f64,
    pub mse_tmt: f64,
    /// `sqrt(MSE_raw / MSE_TMT)`.
    pub gain: f64,
}

/// Gain for one configuration at a fixed filter order.
pub fn gain_at(cfg: &BenchConfig, beta: f64) -> Result<(EnsembleRun, f64)> {
    let run = run_ensemble(cfg, &[beta])?;
    let mse_tmt = run.tmt[0].fringe_averaged_mse;
    if !(mse_tmt > 0.0) {
        return Err(Error::ZeroMse);
    }
    let gain = (run.raw.fringe_averaged_mse / mse_tmt).sqrt();
    Ok((run, gain))
}

/// Calibrates the filter order on each configuration's calibration twin,
/// applies it to the sensing PL and reports the MSE gain.
pub fn gain_profile(family: &[BenchConfig], beta_grid: &[f64]) -> Result<Vec<GainPoint>> {
    family
        .iter()
        .map(|cfg| {
            let beta_calib = calibrate_beta(cfg, beta_grid)?;
            let (run, gain) = gain_at(cfg, beta_calib)?;
            Ok(GainPoint {
                n_sd: run.points.len(),
                t_i: cfg.plan.t_i,
                t_f: cfg.plan.t_f,
                f_sample: cfg.plan.f_sample,
                beta_calib,
                mse_raw: run.raw.fringe_averaged_mse,
                mse_tmt: run.tmt[0].fringe_averaged_mse,
                gain,
            })
        })
        .collect()
}

/// Window end placing `n_sd` detection points in `[t_i, t_f]`: an eighth of
/// a period past the `n_sd`-th negative-slope crossing.
pub fn window_end_for(n_sd: usize, t_i: f64, omega: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let first = ((omega * t_i - FRAC_PI_2) / (2.0 * PI)).ceil();
    let cycle = first + (n_sd as f64 - 1.0);
    (FRAC_PI_2 + 2.0 * PI * cycle) / omega + 0.125 * 2.0 * PI / omega
}
