use std::f64::consts::PI;

use tmt_core::ramsey::*;
use tmt_core::rng::StreamId;

// Bisection on n_ave for fixed contrast: n1 = n0 (1 - C), (n0 + n1)/2 = n_ave.
fn bisect_levels(contrast: f64, n_ave: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0, 10.0 * n_ave);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * (mid + mid * (1.0 - contrast)) < n_ave {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, lo * (1.0 - contrast))
}

#[test]
fn photon_levels_match_root_finder() {
    for &(c, n) in &[(0.2143, 0.196), (0.05, 1.0), (0.9, 0.01)] {
        let (n0, n1) = derive_photon_levels(c, n).unwrap();
        let (b0, b1) = bisect_levels(c, n);
        assert!((n0 - b0).abs() < 1e-14 && (n1 - b1).abs() < 1e-14);
    }
    let (n0, n1) = derive_photon_levels(0.2143, 0.196).unwrap();
    assert!((n0 - 0.21953).abs() < 1e-5 && (n1 - 0.17248).abs() < 1e-5);
}

#[test]
fn template_reference_values() {
    let p = SensorParams::default();
    let w = p.omega_calib;
    assert!((w - 2.0 * PI * 2.8024e6).abs() < 1e-3);
    // Half a period: cos = -1, envelope exp(-(t/T2)^2).
    let t = PI / w;
    let e = (-(t / 3.9e-6f64).powi(2)).exp();
    let want = p.n1 + 0.5 * (1.0 - e) * (p.n0 - p.n1);
    assert!((template(t, w, &p) - want).abs() < 1e-15);
    assert!((template(1e-3, w, &p) - 0.5 * (p.n0 + p.n1)).abs() < 1e-15);
}

fn ensemble_at(plan: &AcquisitionPlan, model: PhotonModel, n: usize) -> Vec<Vec<f64>> {
    let p = SensorParams::default();
    (0..n)
        .map(|e| {
            simulate_trace(
                &p,
                plan,
                p.omega_calib,
                StreamId::new(plan.seed, 9, e as u64),
                model,
            )
            .unwrap()
            .values
        })
        .collect()
}

#[test]
fn sample_mean_and_variance_follow_the_model() {
    let p = SensorParams::default();
    let plan = AcquisitionPlan::new(0.2e-6, 0.6e-6, 32e6, 400, 2, 21).unwrap();
    let traces = ensemble_at(&plan, PhotonModel::Compound, 2000);
    let n = traces.len() as f64;
    for k in 0..plan.n_samples() {
        let t = plan.time(k);
        let xs: Vec<f64> = traces.iter().map(|v| v[k]).collect();
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let model_var = compound_variance(t, p.omega_calib, &p) / plan.repetitions as f64;
        assert!((mean - template(t, p.omega_calib, &p)).abs() < 5.0 * (model_var / n).sqrt());
        // sd of a sample variance is about var * sqrt(2 / n) for near-Gaussian data
        assert!(
            (var - model_var).abs() < 5.0 * model_var * (2.0 / n).sqrt(),
            "k={k}"
        );
    }
}

#[test]
fn pure_poisson_mean_and_variance() {
    let p = SensorParams::default();
    let plan = AcquisitionPlan::new(1.0e-6, 1.2e-6, 32e6, 1000, 2, 4).unwrap();
    let traces = ensemble_at(&plan, PhotonModel::PurePoisson, 1500);
    let n = traces.len() as f64;
    for k in 0..plan.n_samples() {
        let t = plan.time(k);
        let k_t = template(t, p.omega_calib, &p);
        let xs: Vec<f64> = traces.iter().map(|v| v[k]).collect();
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let model_var = k_t / plan.repetitions as f64;
        assert!((mean - k_t).abs() < 5.0 * (model_var / n).sqrt());
        assert!((var - model_var).abs() < 5.0 * model_var * (2.0 / n).sqrt());
    }
}

#[test]
fn streams_reproduce_and_differ() {
    let p = SensorParams::default();
    let plan = AcquisitionPlan::new(0.97e-6, 1.36e-6, 128e6, 25_000, 2, 1).unwrap();
    let run = |e| {
        simulate_trace(
            &p,
            &plan,
            p.omega_calib,
            StreamId::new(1, 2, e),
            PhotonModel::Compound,
        )
        .unwrap()
    };
    assert_eq!(run(0).values, run(0).values);
    assert_ne!(run(0).values, run(1).values);
}
