use proptest::prelude::*;
use smallball_core::exec::map_indexed;
use smallball_core::kernels::{covariance, covariance_matrix, variogram};
use smallball_core::smallball::SmallBallParams;
use smallball_core::stats::wilson;
use smallball_core::testfuncs::{k_of_eta, FunctionSpec, GridConfig};
use smallball_core::{Parallelism, ProcessSpec};

fn gaussian_spec() -> impl Strategy<Value = ProcessSpec> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|hurst| ProcessSpec::Fbm { hurst }),
        Just(ProcessSpec::PeriodicBridge),
        (0.2f64..3.0).prop_map(|theta| ProcessSpec::StationaryOu { theta }),
        (0.55f64..0.9, 0.5f64..2.0)
            .prop_map(|(hurst, theta)| ProcessSpec::FractionalOu { hurst, theta }),
        (0.5f64..2.0, 0.1f64..1.0)
            .prop_map(|(theta, alpha)| ProcessSpec::TemperedStationary { theta, alpha }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn covariance_is_symmetric(spec in gaussian_spec(), s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let a = covariance(&spec, s, t).unwrap().value;
        let b = covariance(&spec, t, s).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn variogram_is_nonnegative(spec in gaussian_spec(), s in 0.0f64..3.0, t in 0.0f64..3.0) {
        prop_assert!(variogram(&spec, s, t).unwrap() >= -1e-10);
    }

    #[test]
    fn covariance_matrix_is_psd(spec in gaussian_spec(), start in 0.0f64..2.0, step in 0.05f64..0.5) {
        let times: Vec<f64> = (0..8).map(|i| start + i as f64 * step).collect();
        let c = covariance_matrix(&spec, &times).unwrap();
        let eig = c.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-9 * c.trace().max(1.0), "min eigenvalue {min}");
    }

    #[test]
    fn bound_monotone_in_eta(k2 in 0.01f64..1.0, lambda in 0.5f64..3.0, delta in 0.05f64..1.0, e1 in 0.01f64..0.5, e2 in 0.01f64..0.5) {
        let p = SmallBallParams { delta_star: 1.0, eta_star: Some(1.0), gamma: None, lambda, mu: 1.0, k1: 1.0, k2, k3: None };
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(p.bound(lo, delta) <= p.bound(hi, delta));
    }

    #[test]
    fn wilson_contains_the_point_estimate(k in 0usize..500, extra in 1usize..500) {
        let n = k + extra;
        let w = wilson(k, n, 1.96);
        let p = k as f64 / n as f64;
        prop_assert!(w.lower() <= p + 1e-12 && p <= w.upper() + 1e-12);
        prop_assert!(w.lower() >= 0.0 && w.upper() <= 1.0);
    }

    #[test]
    fn execution_modes_agree(n in 1usize..200) {
        let f = |i: usize| (i as f64).sin() * 3.0;
        prop_assert_eq!(map_indexed(n, Parallelism::Sequential, f), map_indexed(n, Parallelism::Parallel, f));
    }

    #[test]
    fn scaled_function_scales_window_infimum(c in 0.1f64..5.0, eta in 0.02f64..0.4) {
        let g = GridConfig { ny: 64, max_ny: 64, ..Default::default() };
        let f = FunctionSpec::identity();
        let base = k_of_eta(&f, eta, (-1.0, 1.0), &g).unwrap().value;
        let scaled = k_of_eta(&f.scaled(c), eta, (-1.0, 1.0), &g).unwrap().value;
        prop_assert!((scaled - c * base).abs() <= 1e-12 * c.max(1.0));
    }
}
