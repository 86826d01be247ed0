use smallball_core::testfuncs::*;

fn grid() -> GridConfig {
    GridConfig::default()
}

#[test]
fn builtins_satisfy_declared_window_growth() {
    for (name, f) in FunctionSpec::builtins() {
        let r = check_a1i_declared(&f, &grid()).unwrap();
        assert!(r.passes, "{name}: {:?}", r);
    }
}

#[test]
fn exp_fails_window_growth() {
    let f = FunctionSpec::exp();
    let r = check_a1i(&f, 2.0, 0.5, (-20.0, 0.0), &grid()).unwrap();
    assert!(!r.passes);
    assert!(r.witness_x < -19.0);
}

#[test]
fn identity_k2_dominates_half_window() {
    let r =
        check_lemma1_equivalences(&FunctionSpec::identity(), 0.2, (-1.0, 1.0), &grid()).unwrap();
    assert!((r.k2 - 0.1).abs() < 2e-3, "{r:?}");
    assert!((r.k_half - 0.05).abs() < 1e-3, "{r:?}");
    assert!(r.holds);
}

#[test]
fn lemma1_on_all_builtins() {
    for (name, f) in FunctionSpec::builtins() {
        let p = f.a1_params.unwrap();
        let range = f.x_range.unwrap();
        for eta in [p.eta_star / 2.0, p.eta_star / 8.0] {
            let r = check_lemma1_equivalences(&f, eta, range, &grid()).unwrap();
            assert!(r.holds, "{name} η={eta}: {r:?}");
        }
    }
}

#[test]
fn window_infimum_is_monotone_in_eta() {
    let fixed = GridConfig {
        ny: 512,
        max_ny: 512,
        ..grid()
    };
    for (name, f) in FunctionSpec::builtins() {
        let range = f.x_range.unwrap();
        let p = f.a1_params.unwrap();
        let etas = default_eta_grid(p.eta_star, 5);
        let ks: Vec<f64> = etas
            .iter()
            .map(|&e| k_of_eta(&f, e, range, &fixed).unwrap().value)
            .collect();
        // etas decrease
        for w in ks.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "{name}: {ks:?}");
        }
    }
}

#[test]
fn constant_absorption_for_identity() {
    // K(η) = η/2 = Cη with C = 1/2, so K(η) >= η² on η <= min(η*, C)
    let f = FunctionSpec::identity();
    for eta in default_eta_grid(0.5, 6) {
        let k = k_of_eta(&f, eta, (-2.0, 2.0), &grid()).unwrap().value;
        assert!(k >= eta * eta, "η={eta} K={k}");
    }
}

#[test]
fn ineq5_shifted_square_holds() {
    let f: FunctionSpec = "poly:1,0,1".parse().unwrap();
    let r = check_ineq5(&f, 2, 1.0, 0.5, (-4.0, 4.0), &grid()).unwrap();
    assert!(r.holds);
    assert!(r.a1.unwrap().passes);
}

#[test]
fn ineq5_exp_fails() {
    let r = check_ineq5(&FunctionSpec::exp(), 2, 1.0, 0.01, (-20.0, 0.0), &grid()).unwrap();
    assert!(!r.holds);
    assert!(r.a1.is_none());
}

#[test]
fn ineq5_sine_threshold() {
    let f = FunctionSpec::sine();
    let range = (0.0, 2.0 * std::f64::consts::PI);
    let ok = check_ineq5(&f, 1, 1.0, 0.25, range, &grid()).unwrap();
    assert!(ok.holds);
    assert!(ok.a1.as_ref().unwrap().passes);
    // the exact value is sin(π/4 - 1/2) ≈ 0.2815, so 0.4 is out of reach
    let exact = (std::f64::consts::FRAC_PI_4 - 0.5).sin();
    assert!((ok.value - exact).abs() < 1e-3, "{}", ok.value);
    assert!(!check_ineq5(&f, 1, 1.0, 0.4, range, &grid()).unwrap().holds);
}

#[test]
fn derivative_bound_on_builtins() {
    for (name, f) in FunctionSpec::builtins() {
        let c0 = f.a1_params.unwrap().c0;
        let r = check_a1ii(&f, c0, (-1e3, 1e3), 400_001).unwrap();
        assert!(r.holds, "{name}: {r:?}");
    }
}

#[test]
fn polynomial_growth_at_infinity() {
    let sq = FunctionSpec::square();
    let p = sq.a1iii_params.unwrap();
    assert!(check_a1iii(&sq, p.q, p.p, p.c, (-1e3, 1e3)).unwrap().holds);
    let ap = FunctionSpec::abs_pow();
    let p = ap.a1iii_params.unwrap();
    assert!(check_a1iii(&ap, p.q, p.p, p.c, (-1e3, 1e3)).unwrap().holds);
    assert!(
        !check_a1iii(&FunctionSpec::sine(), 1.0, 1.0, 1.0, (-1e3, 1e3))
            .unwrap()
            .holds
    );
}

#[test]
fn too_coarse_grid_is_rejected() {
    let f = FunctionSpec::x3_sin_inv();
    let g = GridConfig {
        ny: 8,
        max_ny: 8,
        ..grid()
    };
    let r = k_of_eta(&f, 0.9, (-2.0, 2.0), &g);
    assert!(
        matches!(r, Err(smallball_core::Error::GridTooCoarse(_))),
        "{r:?}"
    );
}
