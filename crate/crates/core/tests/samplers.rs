use smallball_core::kernels::covariance;
use smallball_core::simulate::PathSampler;
use smallball_core::smallball::*;
use smallball_core::{Parallelism, ProcessSpec};

fn processes() -> Vec<ProcessSpec> {
    vec![
        ProcessSpec::Fbm { hurst: 0.7 },
        ProcessSpec::PeriodicBridge,
        ProcessSpec::StationaryOu { theta: 1.0 },
        ProcessSpec::FractionalOu {
            hurst: 0.7,
            theta: 1.0,
        },
        ProcessSpec::TemperedStationary {
            theta: 1.0,
            alpha: 0.3,
        },
        ProcessSpec::RandomSawtooth {
            xi: Default::default(),
        },
    ]
}

#[test]
fn empirical_covariance_matches_kernel() {
    let n = 6;
    let dt = 0.3;
    let reps = 40_000;
    for spec in processes() {
        let sampler = PathSampler::new(spec, dt, dt, n - 1, None).unwrap();
        let paths = sampler.map_replicates(17, reps, Parallelism::Parallel, |_, v| v.to_vec());
        for i in 0..n {
            for j in i..n {
                let prods: Vec<f64> = paths.iter().map(|p| p[i] * p[j]).collect();
                let m = smallball_core::stats::mean(&prods);
                let se = smallball_core::stats::std_error(&prods);
                let want = covariance(
                    &spec,
                    sampler.t0 + i as f64 * dt,
                    sampler.t0 + j as f64 * dt,
                )
                .unwrap()
                .value;
                assert!(
                    (m - want).abs() <= 4.5 * se + 1e-12,
                    "{spec} ({i},{j}): {m} vs {want} (se {se})"
                );
            }
        }
    }
}

#[test]
fn fou_cross_terms_match_kernel_second_difference() {
    let hurst = 0.7;
    let spec = ProcessSpec::FractionalOu { hurst, theta: 1.0 };
    let c = |t: f64| covariance(&spec, 0.0, t).unwrap().value;
    for (a, delta, i, j) in [(0.25, 1.0, 2, 3), (0.125, 0.5, 2, 6), (0.25, 2.0, 2, 4)] {
        let r = fou_cross_terms(hurst, a, delta, i, j).unwrap();
        let x = a * delta;
        let k = (j - i) as f64;
        let want = 2.0 * c(k * x) - c((k - 1.0) * x) - c((k + 1.0) * x);
        assert!(
            (r.total - want).abs() < 1e-6 + 10.0 * r.abs_error_estimate,
            "{a} {delta} {i} {j}: {} vs {want}",
            r.total
        );
    }
}

#[test]
fn bridge_sum_matches_closed_form_and_bound() {
    for a in [0.25, 0.125] {
        for delta in [0.25, 0.5] {
            let s = increment_cov_sum(&ProcessSpec::PeriodicBridge, a, delta).unwrap();
            let closed = bridge_sum_closed_form(a, delta);
            assert!((s.xi_cov_sq_sum - closed).abs() < 1e-12, "{a} {delta}");
            assert!(closed <= a * delta * delta + a * a * delta.powi(4));
        }
    }
}

#[test]
fn ou_sum_bound() {
    let e = std::f64::consts::E;
    for a in [0.25, 0.125] {
        for delta in [0.25, 0.5, 1.0] {
            let s = increment_cov_sum(&ProcessSpec::StationaryOu { theta: 1.0 }, a, delta).unwrap();
            assert!(
                s.xi_cov_sq_sum <= (1.0 + e / 2.0) * a * delta * delta,
                "{a} {delta}"
            );
        }
    }
}

#[test]
fn ou_small_ball_dominated_on_small_grid() {
    let spec = ProcessSpec::StationaryOu { theta: 1.0 };
    let params = default_params(&spec).unwrap().unwrap();
    let run = SmallBallRun {
        replicates: 2000,
        dt: 1.0 / 256.0,
        seed: 3,
        parallelism: Parallelism::Parallel,
    };
    for (delta, eta) in admissible_grid(&params, 2, 3) {
        let r = small_ball_curve(&spec, Some(&params), 0.3, delta, &[eta], &run).unwrap()[0];
        assert!(r.admissible && r.dominated(), "{r:?}");
    }
}

#[test]
fn sawtooth_probability_matches_law() {
    let xi = Default::default();
    let spec = ProcessSpec::RandomSawtooth { xi };
    let (s, delta, eta) = (0.3, 0.5, 0.4);
    let exact = sawtooth_exact_probability(&xi, s, delta, eta).unwrap();
    let r = empirical_small_ball(&spec, s, delta, eta, 20_000, 1.0 / 512.0, 5).unwrap();
    assert!(
        (r.p_hat - exact).abs() <= 2.0 * r.half_width + 0.01,
        "{} vs {exact}",
        r.p_hat
    );
}
