//! Mode dispatch and artifact writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use tmt_core::bench::{
    fit_scaling, gain_profile, snr_series, sweep_beta, window_end_for, BenchConfig,
};
use tmt_core::ramsey::{simulate_trace, template, PLTrace};
use tmt_core::rng::StreamId;
use tmt_core::tmt::{denoise_pipeline, TmtSettings};

use crate::config::{Format, Mode, RunConfig};
use crate::error::{Error, Result};
use crate::export::{stats_records, Table, STATS_COLUMNS};
use crate::manifest::{sha256_hex, Derived, RunManifest, WindowInfo};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Overrides `output.directory`.
    pub out: Option<PathBuf>,
    /// Overrides `output.formats`.
    pub formats: Option<Vec<Format>>,
}

/// Table, summary lines and window metadata of one mode.
#[derive(Debug, Clone)]
pub struct ModeResult {
    pub table: Table,
    pub summary: Vec<String>,
    pub windows: Vec<WindowInfo>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub directory: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: RunManifest,
}

fn window_info(cfg: &BenchConfig) -> Result<WindowInfo> {
    let points = cfg.detection_points()?;
    Ok(WindowInfo {
        t_i: cfg.plan.t_i,
        t_f: cfg.plan.t_f,
        f_sample: cfg.plan.f_sample,
        n_samples: cfg.plan.n_samples(),
        detection_times: points.times,
    })
}

fn with_t_f(base: &BenchConfig, t_f: f64) -> BenchConfig {
    BenchConfig {
        plan: base.plan.with_window(base.plan.t_i, t_f),
        ..base.clone()
    }
}

fn simulate_ensemble(bench: &BenchConfig) -> Result<Vec<PLTrace>> {
    (0..bench.plan.n_exp)
        .into_par_iter()
        .map(|e| {
            let stream = StreamId::new(bench.plan.seed, bench.stream_config(), e as u64);
            Ok(simulate_trace(
                &bench.params,
                &bench.plan,
                bench.omega_true,
                stream,
                bench.photon_model,
            )?)
        })
        .collect()
}

fn read_trace(path: &Path, bench: &BenchConfig) -> Result<PLTrace> {
    let mut reader = csv::Reader::from_path(path)?;
    let column = reader
        .headers()?
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Invalid(format!("{}: no `value` column", path.display())))?;
    let values = reader
        .records()
        .map(|r| {
            let r = r?;
            r[column]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != bench.plan.n_samples() {
        return Err(Error::Invalid(format!(
            "{}: {} samples, the plan's window holds {}",
            path.display(),
            values.len(),
            bench.plan.n_samples()
        )));
    }
    Ok(PLTrace::new(values, bench.params, bench.plan)?)
}

fn simulate(bench: &BenchConfig) -> Result<ModeResult> {
    let traces = simulate_ensemble(bench)?;
    let mut table = Table::new(&["experiment", "sample", "time", "value", "template"]);
    for (e, tr) in traces.iter().enumerate() {
        for (k, (&t, &v)) in tr.times.iter().zip(&tr.values).enumerate() {
            table.push(vec![
                e.into(),
                k.into(),
                t.into(),
                v.into(),
                template(t, bench.omega_true, &bench.params).into(),
            ]);
        }
    }
    Ok(ModeResult {
        summary: vec![format!(
            "{} traces of {} samples, M = {}",
            traces.len(),
            bench.plan.n_samples(),
            bench.plan.repetitions
        )],
        table,
        windows: vec![window_info(bench)?],
    })
}

fn denoise(cfg: &RunConfig, bench: &BenchConfig) -> Result<ModeResult> {
    let traces = match &cfg.experiment.input {
        Some(path) => vec![read_trace(path, bench)?],
        None => simulate_ensemble(bench)?,
    };
    let settings = TmtSettings {
        beta: cfg.filter.beta,
        margins: bench.margins,
        grid: bench.grid,
        norm: bench.norm,
    };
    let outputs = traces
        .par_iter()
        .map(|tr| {
            Ok(denoise_pipeline(
                tr,
                &bench.params,
                &bench.basis,
                &settings,
            )?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&[
        "experiment",
        "sample",
        "time",
        "raw",
        "denoised",
        "omega_temp",
    ]);
    for (e, (tr, (out, est))) in traces.iter().zip(&outputs).enumerate() {
        for k in 0..tr.len() {
            table.push(vec![
                e.into(),
                k.into(),
                tr.times[k].into(),
                tr.values[k].into(),
                out.values[k].into(),
                est.omega_temp.into(),
            ]);
        }
    }
    let mean_omega = outputs.iter().map(|(_, e)| e.omega_temp).sum::<f64>() / outputs.len() as f64;
    Ok(ModeResult {
        summary: vec![
            format!(
                "{} traces denoised at beta = {}",
                traces.len(),
                cfg.filter.beta
            ),
            format!("mean template frequency {:.9e} rad/s", mean_omega),
        ],
        table,
        windows: vec![window_info(bench)?],
    })
}

fn sweep(cfg: &RunConfig, bench: &BenchConfig, grid: &[f64]) -> Result<ModeResult> {
    let mut columns = vec!["t_f", "record", "beta"];
    columns.extend(STATS_COLUMNS);
    let mut table = Table::new(&columns);
    let mut summary = Vec::new();
    let mut windows = Vec::new();
    for t_f in cfg.durations() {
        let c = with_t_f(bench, t_f);
        let s = sweep_beta(&c, grid)?;
        let rows = |record: &str, beta: f64, stats| {
            stats_records(stats, &[t_f.into(), record.into(), beta.into()])
        };
        for r in rows("raw", f64::NAN, &s.raw) {
            table.push(r);
        }
        for (b, stats) in s.betas.iter().zip(&s.curve) {
            for r in rows("beta", *b, stats) {
                table.push(r);
            }
        }
        for r in rows("optimum", s.beta_opt, s.optimum()) {
            table.push(r);
        }
        summary.push(format!(
            "t_f = {:.4e} s, {} detection points: beta_opt = {:.2}{}, MSE raw {:.6e}, MSE tmt {:.6e}, gain {:.4}",
            t_f,
            s.points.len(),
            s.beta_opt,
            if s.opt_on_boundary { " (grid edge)" } else { "" },
            s.raw.fringe_averaged_mse,
            s.optimum().fringe_averaged_mse,
            (s.raw.fringe_averaged_mse / s.optimum().fringe_averaged_mse).sqrt()
        ));
        windows.push(window_info(&c)?);
    }
    Ok(ModeResult {
        table,
        summary,
        windows,
    })
}

const SNR_COLUMNS: [&str; 13] = [
    "t_f",
    "repetitions",
    "f_sample",
    "integration_time",
    "n_sd",
    "delta_n",
    "beta_opt",
    "mse_raw",
    "mse_raw_se",
    "mse_tmt",
    "mse_tmt_se",
    "snr_raw",
    "snr_tmt",
];

fn benchmark(cfg: &RunConfig, bench: &BenchConfig, grid: &[f64], fit: bool) -> Result<ModeResult> {
    let mut table = if fit {
        Table::new(&[
            "t_f",
            "series",
            "prefactor",
            "exponent",
            "r_squared",
            "n_points",
        ])
    } else {
        Table::new(&SNR_COLUMNS)
    };
    let mut summary = Vec::new();
    let mut windows = Vec::new();
    for t_f in cfg.durations() {
        let c = with_t_f(bench, t_f);
        let series = snr_series(&c, &cfg.experiment.repetitions_series, grid)?;
        windows.push(window_info(&c)?);
        if fit {
            let raw: Vec<(f64, f64)> = series
                .iter()
                .map(|p| (p.integration_time, p.snr_raw))
                .collect();
            let tmt: Vec<(f64, f64)> = series
                .iter()
                .map(|p| (p.integration_time, p.snr_tmt))
                .collect();
            for (name, pts) in [("raw", raw), ("tmt", tmt)] {
                let f = fit_scaling(&pts)?;
                summary.push(format!(
                    "t_f = {:.4e} s, {}: SNR = {:.6e} (M t_f)^{:.4}, r^2 = {:.5}",
                    t_f, name, f.prefactor, f.exponent, f.r_squared
                ));
                table.push(vec![
                    t_f.into(),
                    name.into(),
                    f.prefactor.into(),
                    f.exponent.into(),
                    f.r_squared.into(),
                    pts.len().into(),
                ]);
            }
        } else {
            for p in &series {
                summary.push(format!(
                    "t_f = {:.4e} s, M = {}: SNR raw {:.4}, TMT {:.4} at beta {:.2}",
                    t_f, p.repetitions, p.snr_raw, p.snr_tmt, p.beta
                ));
                table.push(vec![
                    p.t_f.into(),
                    p.repetitions.into(),
                    p.f_sample.into(),
                    p.integration_time.into(),
                    p.n_sd.into(),
                    p.delta_n.into(),
                    p.beta.into(),
                    p.mse_raw.into(),
                    p.mse_raw_se.into(),
                    p.mse_tmt.into(),
                    p.mse_tmt_se.into(),
                    p.snr_raw.into(),
                    p.snr_tmt.into(),
                ]);
            }
        }
    }
    Ok(ModeResult {
        table,
        summary,
        windows,
    })
}

fn gain(cfg: &RunConfig, bench: &BenchConfig, grid: &[f64]) -> Result<ModeResult> {
    let family: Vec<BenchConfig> = (1..=cfg.experiment.n_sd_max)
        .map(|n| BenchConfig {
            n_sd: None,
            ..with_t_f(
                bench,
                window_end_for(n, bench.plan.t_i, bench.omega_reference),
            )
        })
        .collect();
    let points = gain_profile(&family, grid)?;
    let mut table = Table::new(&[
        "n_sd",
        "t_i",
        "t_f",
        "f_sample",
        "beta_calib",
        "mse_raw",
        "mse_tmt",
        "gain",
    ]);
    let mut summary = Vec::new();
    for g in &points {
        summary.push(format!(
            "N_SD = {}, t_f = {:.4e} s: beta_calib = {:.2}, gain {:.4}",
            g.n_sd, g.t_f, g.beta_calib, g.gain
        ));
        table.push(vec![
            g.n_sd.into(),
            g.t_i.into(),
            g.t_f.into(),
            g.f_sample.into(),
            g.beta_calib.into(),
            g.mse_raw.into(),
            g.mse_tmt.into(),
            g.gain.into(),
        ]);
    }
    let windows = family.iter().map(window_info).collect::<Result<_>>()?;
    Ok(ModeResult {
        table,
        summary,
        windows,
    })
}

/// Runs `mode` without touching the file system.
pub fn compute(cfg: &RunConfig, mode: Mode, seed: u64) -> Result<ModeResult> {
    let bench = cfg.bench_config(seed)?;
    let grid = cfg.beta_grid()?;
    match mode {
        Mode::Simulate => simulate(&bench),
        Mode::Denoise => denoise(cfg, &bench),
        Mode::SweepBeta => sweep(cfg, &bench, &grid),
        Mode::Benchmark => benchmark(cfg, &bench, &grid, false),
        Mode::FitScaling => benchmark(cfg, &bench, &grid, true),
        Mode::GainProfile => gain(cfg, &bench, &grid),
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Runs `mode` and writes `<mode>.csv` / `<mode>.json`, `summary.txt` and
/// `manifest.json` into the output directory, creating it if needed.
pub fn run(cfg: &RunConfig, mode: Mode, opts: &RunOptions) -> Result<RunReport> {
    if let Some(m) = cfg.experiment.mode {
        if m != mode {
            return Err(Error::Invalid(format!(
                "config selects mode `{m}`, command is `{mode}`"
            )));
        }
    }
    let seed = match opts.seed {
        Some(s) => s,
        None if mode.requires_seed() => {
            return Err(Error::Invalid(format!("--seed is required for `{mode}`")));
        }
        None => 0,
    };
    let started = Instant::now();
    let result = compute(cfg, mode, seed)?;

    let dir = opts
        .out
        .clone()
        .unwrap_or_else(|| cfg.output.directory.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let formats = opts
        .formats
        .clone()
        .unwrap_or_else(|| cfg.output.formats.clone());

    let params = cfg.sensor_params()?;
    let mut manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode,
        seed,
        config: cfg.clone(),
        derived: Derived {
            n0: params.n0,
            n1: params.n1,
            omega_calib: params.omega_calib,
            omega_sense: cfg.omega_sense()?,
            beta_grid: cfg.beta_grid()?,
            windows: result.windows.clone(),
        },
        checksums: BTreeMap::new(),
        wall_clock_seconds: None,
    };

    let mut outputs: Vec<(String, Vec<u8>)> = Vec::new();
    for f in &formats {
        match f {
            Format::Csv => outputs.push((format!("{mode}.csv"), result.table.to_csv()?)),
            Format::Json => {
                outputs.push((format!("{mode}.json"), result.table.to_json(&manifest)?))
            }
        }
    }
    let mut summary = format!(
        "mode: {mode}\nseed: {seed}\nrecords: {}\n",
        result.table.len()
    );
    for line in &result.summary {
        summary.push_str(line);
        summary.push('\n');
    }
    outputs.push(("summary.txt".into(), summary.into_bytes()));

    let mut files = Vec::new();
    for (name, bytes) in &outputs {
        let path = dir.join(name);
        write(&path, bytes)?;
        manifest.checksums.insert(name.clone(), sha256_hex(bytes));
        files.push(path);
    }
    manifest.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write(&path, &bytes)?;
    files.push(path);
    Ok(RunReport {
        directory: dir,
        files,
        manifest,
    })
}
