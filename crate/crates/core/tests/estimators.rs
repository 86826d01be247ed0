use smallball_core::estimators::*;
use smallball_core::testfuncs::FunctionSpec;
use smallball_core::{Parallelism, ProcessSpec};

#[test]
fn ou_estimator_consistent_at_moderate_horizon() {
    let cfg = OUModelConfig::new(1.0, Diffusion::constant(1.0), 200.0);
    let s = ou_consistency_experiment(&cfg, 40, 3, Parallelism::Parallel).unwrap();
    assert!(s.median_abs_error < 0.15, "{}", s.median_abs_error);
}

#[test]
fn euler_stationary_variance() {
    let cfg = OUModelConfig::new(1.0, Diffusion::constant(1.0), 2000.0);
    let p = simulate_ou_model(&cfg, 8, 0).unwrap();
    let tail = &p.values[10_000..];
    let v = smallball_core::stats::variance(tail);
    assert!((v - 0.5).abs() < 0.05, "{v}");
}

#[test]
fn half_step_bias_is_small() {
    let cfg = OUModelConfig::new(1.0, Diffusion::oscillating(), 200.0);
    let (coarse, fine) = ou_half_step_check(&cfg, 2).unwrap();
    assert!((coarse - fine).abs() < 0.02, "{coarse} vs {fine}");
}

#[test]
fn frac_null_drift_error_is_noise_over_integral() {
    let cfg = FracModelConfig {
        theta: 0.0,
        hurst: 0.7,
        f: FunctionSpec::identity(),
        driver: ProcessSpec::StationaryOu { theta: 1.0 },
        x0: 0.0,
        horizon: 100.0,
        dt: 0.01,
        epsilon: 0.1,
    };
    let e = frac_drift_estimator(&cfg, 4, 0).unwrap();
    assert_eq!(e.theta_hat, e.noise_term);
    assert!(e.integral > 0.0);
}

#[test]
fn frac_parallel_matches_single_calls() {
    let cfg = FracModelConfig {
        theta: 2.0,
        hurst: 0.7,
        f: FunctionSpec::identity(),
        driver: ProcessSpec::StationaryOu { theta: 1.0 },
        x0: 5.0,
        horizon: 50.0,
        dt: 0.01,
        epsilon: 0.1,
    };
    let (_, all) = frac_consistency_experiment(&cfg, 3, 21, Parallelism::Parallel).unwrap();
    for (r, e) in all.iter().enumerate() {
        assert_eq!(*e, frac_drift_estimator(&cfg, 21, r as u64).unwrap());
    }
}
