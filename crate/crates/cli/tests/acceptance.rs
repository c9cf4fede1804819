//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::fs;
use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmt_core::bench::*;
use tmt_core::ramsey::*;
use tmt_core::rng::StreamId;
use tmt_core::tmt::*;
use tmt_core::wavelet::*;

const SEED: u64 = 2024;
const N_EXP: usize = 200;
const SERIES: [u64; 5] = [25_000, 50_000, 100_000, 200_000, 400_000];
const DURATION_T_F: [f64; 4] = [1.36e-6, 1.75e-6, 2.14e-6, 2.53e-6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(t_i: f64, t_f: f64, f_sample: f64, m: u64) -> BenchConfig {
    BenchConfig::new(AcquisitionPlan::new(t_i, t_f, f_sample, m, N_EXP, SEED).unwrap())
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn perfect_reconstruction() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bases = [WaveletBasis::haar(), WaveletBasis::bior6_8()];
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(16..=4096usize);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let basis = &bases[case % 2];
        let levels = rng.random_range(0..=8usize);
        let u = uwt_decompose(&x, basis, levels, Boundary::Periodic).unwrap();
        worst = worst.max(rel_err(&iuwt_reconstruct(&u, basis).unwrap(), &x));
        let d =
            dwt_decompose(&x, basis, levels.min(default_levels(n)), Boundary::Periodic).unwrap();
        worst = worst.max(rel_err(&dwt_reconstruct(&d, basis).unwrap(), &x));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-10 && secs < 60.0,
        format!("worst relative error {worst:.2e} over 1000 signals, {secs:.1} s"),
    )
}

// Explicit periodic convolution, one output at a time, straight from the taps.
fn oracle_stage(x: &[f64], f: &Filter, step: usize, stride: usize) -> Vec<f64> {
    let n = x.len() as i64;
    (0..x.len() / stride)
        .map(|k| {
            f.taps
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let idx = (stride * k) as i64 + step as i64 * (f.start + i as i64);
                    c * x[idx.rem_euclid(n) as usize]
                })
                .sum()
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bases = [WaveletBasis::haar(), WaveletBasis::bior6_8()];
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = [8usize, 16, 32, 64][rng.random_range(0..4)];
        let levels = rng.random_range(0..n.trailing_zeros() as usize);
        let basis = &bases[case % 2];
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for decimated in [true, false] {
            let d = if decimated {
                dwt_decompose(&x, basis, levels, Boundary::Periodic).unwrap()
            } else {
                uwt_decompose(&x, basis, levels, Boundary::Periodic).unwrap()
            };
            let mut approx = x.clone();
            for j in 0..=levels {
                let (step, stride) = if decimated { (1, 2) } else { (1 << j, 1) };
                let detail = oracle_stage(&approx, &basis.h1, step, stride);
                approx = oracle_stage(&approx, &basis.h0, step, stride);
                for (a, b) in d.details[j].iter().zip(&detail) {
                    worst = worst.max((a - b).abs());
                }
            }
            for (a, b) in d.approximation.iter().zip(&approx) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-12 && secs < 60.0,
        format!("worst absolute deviation {worst:.2e} over 100 cases, {secs:.1} s"),
    )
}

fn identity_holds(all: &[&EnsembleStats]) -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for s in all {
        for p in &s.per_point {
            worst = worst.max((p.mse - p.bias * p.bias - p.variance).abs() / p.mse);
            count += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{count} detection-point records, worst relative residual {worst:.2e}"),
    )
}

fn raw_limit() -> Outcome {
    let p = SensorParams::default();
    let plan = AcquisitionPlan::new(0.97e-6, 1.75e-6, 128e6, 25_000, 20, SEED).unwrap();
    let basis = WaveletBasis::bior6_8();
    let opts = MarginOptions::default();
    let mut worst_raw = 0.0f64;
    for e in 0..plan.n_exp {
        let tr = simulate_trace(
            &p,
            &plan,
            p.omega_calib,
            StreamId::new(SEED, 4, e as u64),
            PhotonModel::Compound,
        )
        .unwrap();
        let w = estimate_template_frequency(
            &tr,
            &p,
            &FrequencyGrid::default_for(&p),
            CorrelationNorm::default(),
        )
        .unwrap()
        .omega_temp;
        let m = build_margins(w, -16.0, &p, &plan, &basis, opts).unwrap();
        worst_raw = worst_raw.max(rel_err(
            &tmt_denoise(&tr, &m, &basis).unwrap().values,
            &tr.values,
        ));
    }
    let w = p.omega_calib * 1.004;
    let tpl = PLTrace::noiseless(&p, &plan, w).unwrap();
    let mut worst_tpl = 0.0f64;
    for beta in default_beta_grid().into_iter().chain([-16.0, 16.0]) {
        let m = build_margins(w, beta, &p, &plan, &basis, opts).unwrap();
        let out = tmt_denoise(&tpl, &m, &basis).unwrap();
        for (a, b) in out.values.iter().zip(&tpl.values) {
            worst_tpl = worst_tpl.max((a - b).abs());
        }
    }
    outcome(
        worst_raw <= 1e-10 && worst_tpl <= 1e-9,
        format!(
            "beta = -16 relative deviation {worst_raw:.2e}; template passthrough {worst_tpl:.2e}"
        ),
    )
}

struct Run {
    cfg: BenchConfig,
    sweep: BetaSweep,
    delta_n: f64,
}

impl Run {
    fn new(cfg: BenchConfig) -> Self {
        let sweep = sweep_beta(&cfg, &default_beta_grid()).unwrap();
        let delta_n = cfg.signal_amplitude().unwrap();
        Self {
            cfg,
            sweep,
            delta_n,
        }
    }

    fn snr_raw(&self) -> f64 {
        snr(&self.sweep.raw, self.delta_n).unwrap()
    }

    fn snr_tmt(&self) -> f64 {
        snr(self.sweep.optimum(), self.delta_n).unwrap()
    }

    fn snr_raw_se(&self) -> f64 {
        let r = &self.sweep.raw;
        0.5 * self.snr_raw() * r.fringe_averaged_mse_se / r.fringe_averaged_mse
    }

    fn x(&self) -> f64 {
        self.cfg.plan.integration_time()
    }
}

fn sql_recovery(yellow: &[Run]) -> Outcome {
    let pts: Vec<(f64, f64)> = yellow.iter().map(|r| (r.x(), r.snr_raw())).collect();
    let f = fit_scaling(&pts).unwrap();
    outcome(
        (0.45..=0.55).contains(&f.exponent) && f.r_squared > 0.99,
        format!("raw alpha = {:.4}, r^2 = {:.5}", f.exponent, f.r_squared),
    )
}

fn tradeoff(low: &Run, high: &Run) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for run in [low, high] {
        let c = &run.sweep.curve;
        let mut bias_ok = true;
        let mut var_ok = true;
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                let se_b = c[i]
                    .fringe_averaged_bias_sq_se
                    .hypot(c[j].fringe_averaged_bias_sq_se);
                let se_v = c[i]
                    .fringe_averaged_variance_se
                    .hypot(c[j].fringe_averaged_variance_se);
                bias_ok &=
                    c[j].fringe_averaged_bias_sq >= c[i].fringe_averaged_bias_sq - 3.0 * se_b;
                var_ok &=
                    c[j].fringe_averaged_variance <= c[i].fringe_averaged_variance + 3.0 * se_v;
            }
        }
        let interior = !run.sweep.opt_on_boundary
            && run.sweep.optimum().fringe_averaged_mse < run.sweep.raw.fringe_averaged_mse;
        pass &= bias_ok && var_ok && interior;
        notes.push(format!(
            "M={}: bias^2 monotone {bias_ok}, variance monotone {var_ok}, beta_opt {:.1} interior {interior}",
            run.cfg.plan.repetitions, run.sweep.beta_opt
        ));
    }
    let ordered = high.sweep.beta_opt <= low.sweep.beta_opt;
    notes.push(format!("beta_opt(400K) <= beta_opt(25K) {ordered}"));
    outcome(pass && ordered, notes.join("; "))
}

fn scaling_signature(family: &[Vec<Run>]) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (d, runs) in family.iter().enumerate() {
        let raw = fit_scaling(
            &runs
                .iter()
                .map(|r| (r.x(), r.snr_raw()))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let tmt = fit_scaling(
            &runs
                .iter()
                .map(|r| (r.x(), r.snr_tmt()))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let better = runs[0].snr_tmt() > runs[0].snr_raw();
        let signature = tmt.exponent < 0.5 && tmt.prefactor > raw.prefactor;
        pass &= better;
        if d + 2 >= family.len() {
            pass &= signature;
        }
        notes.push(format!(
            "t_f {:.2}us: alpha_tmt {:.3} c_tmt/c_raw {:.2} gain@25K {:.2}",
            runs[0].cfg.plan.t_f * 1e6,
            tmt.exponent,
            tmt.prefactor / raw.prefactor,
            runs[0].snr_tmt() / runs[0].snr_raw()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn sampling_frequency(runs: &[Run]) -> Outcome {
    let mut agree = true;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let se = runs[i].snr_raw_se().hypot(runs[j].snr_raw_se());
            agree &= (runs[i].snr_raw() - runs[j].snr_raw()).abs() <= 3.0 * se;
        }
    }
    let improves = runs[2].snr_tmt() >= runs[0].snr_tmt();
    let notes: Vec<String> = runs
        .iter()
        .map(|r| {
            format!(
                "{:.0} MHz raw {:.2} tmt {:.2}",
                r.cfg.plan.f_sample / 1e6,
                r.snr_raw(),
                r.snr_tmt()
            )
        })
        .collect();
    outcome(
        agree && improves,
        format!(
            "{}; raw agree {agree}, tmt 128 >= 32 {improves}",
            notes.join(", ")
        ),
    )
}

fn calibration_gain() -> Outcome {
    let omega = SensorParams::default().omega_calib;
    let family: Vec<BenchConfig> = (1..=9)
        .map(|n| config(0.2e-6, window_end_for(n, 0.2e-6, omega), 128e6, 25_000))
        .collect();
    let profile = gain_profile(&family, &default_beta_grid()).unwrap();
    let gains: Vec<f64> = profile.iter().map(|g| g.gain).collect();
    let above_one = profile.iter().filter(|g| g.n_sd >= 2).all(|g| g.gain > 1.0);
    let peak = gains.iter().cloned().fold(0.0, f64::max);
    let non_monotonic = gains.windows(2).any(|w| w[1] < w[0]);
    let shown: Vec<String> = gains.iter().map(|g| format!("{g:.2}")).collect();
    outcome(
        above_one && peak >= 5.0 && non_monotonic,
        format!(
            "gains [{}]; >1 for N_SD>=2 {above_one}, peak {peak:.2}, non-monotonic {non_monotonic}",
            shown.join(", ")
        ),
    )
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bench.toml");
    fs::write(
        &config,
        "[plan]\nt_i = 0.97e-6\nt_f = 1.75e-6\nn_exp = 40\n\n[filter]\nbeta_min = -3.0\nbeta_max = 1.0\nbeta_step = 0.5\n\n[experiment]\nrepetitions_series = [25000, 100000, 400000]\n",
    )
    .unwrap();
    let mut files = Vec::new();
    for threads in ["1", "4", "1"] {
        let out = tmp.path().join(format!("out{}", files.len()));
        let status = Command::new(env!("CARGO_BIN_EXE_tmt"))
            .args([
                "benchmark",
                "--seed",
                "77",
                "--format",
                "csv",
                "--format",
                "json",
                "--threads",
                threads,
            ])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .stdout(Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        let mut manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        manifest
            .as_object_mut()
            .unwrap()
            .remove("wall_clock_seconds");
        files.push((
            ["benchmark.csv", "benchmark.json", "summary.txt"]
                .map(|f| fs::read(out.join(f)).unwrap()),
            manifest,
        ));
    }
    let same = files.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same,
        "benchmark reruns at 1, 4, 1 threads: tables and summary byte-identical".into(),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "perfect reconstruction", perfect_reconstruction()));
    results.push((2, "oracle equivalence", oracle_equivalence()));
    results.push((4, "raw limit and template passthrough", raw_limit()));

    let family: Vec<Vec<Run>> = DURATION_T_F
        .iter()
        .map(|&t_f| {
            SERIES
                .iter()
                .map(|&m| Run::new(config(0.97e-6, t_f, 128e6, m)))
                .collect()
        })
        .collect();
    let sampling_runs: Vec<Run> = [32e6, 64e6, 128e6]
        .iter()
        .map(|&fs| Run::new(config(0.2e-6, 2.13e-6, fs, 25_000)))
        .collect();
    let yellow = &family[2];
    results.push((5, "standard quantum limit", sql_recovery(yellow)));
    results.push((
        6,
        "bias-variance trade-off",
        tradeoff(&yellow[0], &yellow[4]),
    ));
    results.push((7, "TMT scaling signature", scaling_signature(&family)));
    results.push((8, "sampling frequency", sampling_frequency(&sampling_runs)));
    results.push((9, "calibration transfer gain", calibration_gain()));
    results.push((10, "determinism", determinism()));

    let all: Vec<&EnsembleStats> = family
        .iter()
        .flatten()
        .chain(&sampling_runs)
        .flat_map(|r| std::iter::once(&r.sweep.raw).chain(&r.sweep.curve))
        .collect();
    results.push((3, "mse = bias^2 + variance", identity_holds(&all)));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (id, name, o) in &results {
        println!(
            "criterion {id:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria pass ({:.0} s)",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
