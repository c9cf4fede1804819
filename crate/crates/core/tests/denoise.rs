use tmt_core::bench::{run_ensemble, BenchConfig};
use tmt_core::ramsey::*;
use tmt_core::rng::StreamId;
use tmt_core::tmt::*;
use tmt_core::wavelet::*;

fn short_window() -> (SensorParams, AcquisitionPlan, WaveletBasis) {
    let plan = AcquisitionPlan::new(0.97e-6, 1.75e-6, 128e6, 25_000, 40, 17).unwrap();
    (SensorParams::default(), plan, WaveletBasis::bior6_8())
}

#[test]
fn shrunk_coefficients_stay_inside_margins() {
    let (p, plan, b) = short_window();
    let trace = simulate_trace(
        &p,
        &plan,
        p.omega_calib,
        StreamId::new(1, 2, 3),
        PhotonModel::Compound,
    )
    .unwrap();
    for beta in [-2.0, 0.0, 1.5] {
        let m =
            build_margins(p.omega_calib, beta, &p, &plan, &b, MarginOptions::default()).unwrap();
        let raw = uwt_decompose(&trace.values, &b, 8, Boundary::Periodic).unwrap();
        let shrunk = m.shrink_coefficients(&raw).unwrap();
        for (j, level) in shrunk.details.iter().enumerate() {
            for (k, v) in level.iter().enumerate() {
                assert!(m.lower_coeffs[j][k] <= *v && *v <= m.upper_coeffs[j][k]);
            }
        }
        assert_eq!(shrunk.approximation, raw.approximation);
        let out = tmt_denoise(&trace, &m, &b).unwrap();
        assert_eq!(out.values, iuwt_reconstruct(&shrunk, &b).unwrap());
    }
}

#[test]
fn signal_between_the_margins_is_untouched() {
    // K + s/2 * Delta N has coefficients halfway between d^K and d^U.
    let (p, plan, b) = short_window();
    let w = p.omega_calib * 1.01;
    for beta in [-1.0, 0.5, 3.0] {
        let s = margin_scale(beta, &plan);
        let values: Vec<f64> = plan
            .times()
            .iter()
            .map(|&t| template(t, w, &p) + 0.5 * s * shot_noise(t, w, &p, NoiseModel::Verbatim))
            .collect();
        let trace = PLTrace::new(values.clone(), p, plan).unwrap();
        let m = build_margins(w, beta, &p, &plan, &b, MarginOptions::default()).unwrap();
        let out = tmt_denoise(&trace, &m, &b).unwrap();
        for (a, x) in out.values.iter().zip(&values) {
            assert!((a - x).abs() <= 1e-10 * x.abs());
        }
    }
}

#[test]
fn short_window_pipeline_reduces_variance() {
    let (p, plan, b) = short_window();
    let settings = TmtSettings {
        beta: -1.0,
        margins: MarginOptions::default(),
        grid: FrequencyGrid::default_for(&p),
        norm: CorrelationNorm::default(),
    };
    let mut raw = Vec::new();
    let mut den = Vec::new();
    for e in 0..plan.n_exp {
        let tr = simulate_trace(
            &p,
            &plan,
            p.omega_calib,
            StreamId::new(5, 5, e as u64),
            PhotonModel::Compound,
        )
        .unwrap();
        let (out, est) = denoise_pipeline(&tr, &p, &b, &settings).unwrap();
        assert!((est.omega_temp / p.omega_calib - 1.0).abs() < 0.01);
        raw.push(tr.values);
        den.push(out.values);
    }
    let var = |xs: &[Vec<f64>], k: usize| {
        let m = xs.iter().map(|v| v[k]).sum::<f64>() / xs.len() as f64;
        xs.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / xs.len() as f64
    };
    let n = plan.n_samples();
    let total_raw: f64 = (0..n).map(|k| var(&raw, k)).sum();
    let total_den: f64 = (0..n).map(|k| var(&den, k)).sum();
    assert!(total_den < 0.25 * total_raw, "{total_den} vs {total_raw}");
}

#[test]
fn variance_does_not_grow_with_filter_order() {
    let plan = AcquisitionPlan::new(0.97e-6, 2.14e-6, 128e6, 25_000, 60, 2).unwrap();
    let betas: Vec<f64> = (0..=12).map(|i| -4.0 + 0.5 * i as f64).collect();
    let run = run_ensemble(&BenchConfig::new(plan), &betas).unwrap();
    for i in 0..betas.len() {
        for j in i + 1..betas.len() {
            let (a, b) = (&run.tmt[i], &run.tmt[j]);
            let se = a
                .fringe_averaged_variance_se
                .hypot(b.fringe_averaged_variance_se);
            assert!(b.fringe_averaged_variance <= a.fringe_averaged_variance + 3.0 * se);
        }
    }
}

#[test]
fn same_seed_same_output() {
    let (p, plan, b) = short_window();
    let run = || {
        let tr = simulate_trace(
            &p,
            &plan,
            p.omega_calib,
            StreamId::new(8, 8, 8),
            PhotonModel::Compound,
        )
        .unwrap();
        let m = build_margins(p.omega_calib, 0.0, &p, &plan, &b, MarginOptions::default()).unwrap();
        tmt_denoise(&tr, &m, &b).unwrap().values
    };
    assert_eq!(run(), run());
}
