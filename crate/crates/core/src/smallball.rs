//! Small-ball probabilities: empirical estimates, the adapted Li–Shao bound
//! and the parameter sets of the relaxed and stronger small-ball estimates.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::exec::Parallelism;
use crate::kernels::{
    covariance_matrix, sawtooth_profile, variogram, ProcessKind, ProcessSpec, XiLaw,
};
use crate::oracles::{gamma_function, lemma_a2_i5};
use crate::quad::{integrate_nested, integrate_singular_at, QuadratureResult, Tolerance};
use crate::simulate::PathSampler;
use crate::stats::{wilson, Z95};

/// Phases at which the supremum over `s` is spot-checked.
pub const PHASES: [f64; 4] = [0.0, 0.3, 1.7, 10.0];

/// Minimum replicate count for an empirical small-ball estimate.
pub const MIN_REPLICATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    Positive,
    BridgeNegative,
    OuNegative,
}

/// Constants of `P[sup_{[s,s+Δ]}|X_t - X_s| <= η] <= K₁ exp(-K₂ η^{-λ} Δ^μ)`.
///
/// With `gamma` and `k3` present the bound holds for `η < K₃Δ^γ` (relaxed
/// form); without them it holds on the rectangle `η < η*` (stronger form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallParams {
    pub delta_star: f64,
    pub eta_star: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: Option<f64>,
}

impl SmallBallParams {
    pub fn bound(&self, eta: f64, delta: f64) -> f64 {
        self.k1 * (-self.k2 * eta.powf(-self.lambda) * delta.powf(self.mu)).exp()
    }

    /// Largest admissible `η` at this `Δ` (exclusive).
    pub fn eta_ceiling(&self, delta: f64) -> f64 {
        match (self.k3, self.gamma) {
            (Some(k3), Some(g)) => {
                let curve = k3 * delta.powf(g);
                self.eta_star.map_or(curve, |e| curve.min(e))
            }
            _ => self.eta_star.unwrap_or(f64::INFINITY),
        }
    }

    /// `Ok` when `(η, Δ)` lies in the region where the bound is claimed,
    /// otherwise the violated condition.
    pub fn check_admissible(&self, eta: f64, delta: f64) -> Result<()> {
        if !(delta > 0.0 && delta < self.delta_star) {
            return Err(Error::Inadmissible(format!(
                "Δ={delta} lies outside (0, Δ*={}); small-ball window admissibility",
                self.delta_star
            )));
        }
        if let (Some(k3), Some(g)) = (self.k3, self.gamma) {
            let curve = k3 * delta.powf(g);
            if !(eta > 0.0 && eta < curve) {
                return Err(Error::Inadmissible(format!(
                    "η={eta} exceeds K₃Δ^γ={curve}; (A2)(iii) admissibility"
                )));
            }
        }
        if let Some(es) = self.eta_star {
            if !(eta > 0.0 && eta < es) {
                return Err(Error::Inadmissible(format!(
                    "η={eta} exceeds η*={es}; (A2)(iv) admissibility"
                )));
            }
        }
        Ok(())
    }

    pub fn is_admissible(&self, eta: f64, delta: f64) -> bool {
        self.check_admissible(eta, delta).is_ok()
    }

    /// Stronger-form constants for `ξ φ(t)`: `λ = μ = λ₀`, `K₁ = K₃(ξ)`,
    /// `K₂ = K₄(ξ)/2^{λ₀}`.
    pub fn sawtooth(xi: &XiLaw) -> Result<Self> {
        let (k3, k4) = xi.tail_constants()?;
        Ok(SmallBallParams {
            // the lower bound sup|φ(t)-φ(s)| >= Δ/2 only holds for Δ <= 1
            delta_star: 1.0,
            eta_star: Some(1.0),
            gamma: None,
            lambda: xi.lambda0,
            mu: xi.lambda0,
            k1: k3,
            k2: k4 / 2f64.powf(xi.lambda0),
            k3: None,
        })
    }
}

/// `C₄ = √C₁ / (2^{2+H} √2)`
pub fn c4(c1: f64, hurst: f64) -> f64 {
    c1.sqrt() / (2f64.powf(2.0 + hurst) * std::f64::consts::SQRT_2)
}

/// `C₅ = (4√2 / √C₁)^{1/H}`
pub fn c5(c1: f64, hurst: f64) -> f64 {
    (4.0 * std::f64::consts::SQRT_2 / c1.sqrt()).powf(1.0 / hurst)
}

/// Relaxed small-ball constants from the two-sided variogram bounds
/// `C₁|t-s|^{2H} <= E(X_t-X_s)^2 <= C₂|t-s|^{2H}` on `|t-s| <= C₃`.
pub fn derive_params(
    c1: f64,
    c2: f64,
    c3: f64,
    hurst: f64,
    correlation: Correlation,
) -> Result<SmallBallParams> {
    precondition(c1 > 0.0 && c2 > 0.0 && c3 > 0.0, || {
        "C₁, C₂, C₃ must be positive".into()
    })?;
    precondition(c1 <= c2, || format!("need C₁ <= C₂, got C₁={c1}, C₂={c2}"))?;
    precondition(hurst > 0.0 && hurst <= 1.0, || {
        format!("hurst must lie in (0, 1], got {hurst}")
    })?;
    let k3 = c4(c1, hurst);
    let c5 = c5(c1, hurst);
    match correlation {
        Correlation::Positive => {
            precondition(hurst > 0.5, || {
                format!("positively correlated increments need H > 1/2, got {hurst}")
            })?;
            Ok(SmallBallParams {
                delta_star: c3,
                eta_star: Some(1.0),
                gamma: Some(hurst),
                lambda: 2.0 / hurst - 2.0,
                mu: 2.0 - 2.0 * hurst,
                k1: 1.0,
                k2: 1.0 / (16.0 * c2 * c2 * c5.powf(2.0 + 2.0 * hurst)),
                k3: Some(k3),
            })
        }
        Correlation::BridgeNegative | Correlation::OuNegative => {
            precondition((hurst - 0.5).abs() < 1e-12, || {
                format!(
                    "negatively correlated cases are Brownian-scaled and need H = 1/2, got {hurst}"
                )
            })?;
            let (delta_star, k2) = if correlation == Correlation::BridgeNegative {
                (1.0, 1.0 / (32.0 * c5.powi(3)))
            } else {
                // S <= (1+e/2) a Δ² instead of 2 a Δ²
                (
                    c3,
                    1.0 / (16.0 * (1.0 + std::f64::consts::E / 2.0) * c5.powi(3)),
                )
            };
            Ok(SmallBallParams {
                delta_star,
                eta_star: None,
                gamma: Some(0.5),
                lambda: 2.0,
                mu: 1.0,
                k1: 1.0,
                k2,
                k3: Some(k3),
            })
        }
    }
}

/// Parameter set for a process, where one is known.
pub fn default_params(spec: &ProcessSpec) -> Result<Option<SmallBallParams>> {
    spec.validate()?;
    Ok(match *spec {
        ProcessSpec::Fbm { hurst } if hurst > 0.5 => {
            Some(derive_params(1.0, 1.0, 1.0, hurst, Correlation::Positive)?)
        }
        ProcessSpec::Fbm { .. } => None,
        ProcessSpec::PeriodicBridge => Some(derive_params(
            0.5,
            1.0,
            0.5,
            0.5,
            Correlation::BridgeNegative,
        )?),
        ProcessSpec::StationaryOu { theta } => {
            // e^{-1}τ <= (1 - e^{-θτ})/θ <= τ for τ <= 1/θ
            Some(derive_params(
                (-1.0f64).exp(),
                1.0,
                1.0 / theta,
                0.5,
                Correlation::OuNegative,
            )?)
        }
        ProcessSpec::FractionalOu { .. } | ProcessSpec::TemperedStationary { .. } => None,
        ProcessSpec::RandomSawtooth { xi } => Some(SmallBallParams::sawtooth(&xi)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LiShao {
    Bound {
        value: f64,
    },
    /// `a Σ Eξ_i² < 32 η²`
    Inadmissible {
        lhs: f64,
        rhs: f64,
    },
}

impl LiShao {
    pub fn value(&self) -> Option<f64> {
        match self {
            LiShao::Bound { value } => Some(*value),
            LiShao::Inadmissible { .. } => None,
        }
    }
}

/// `exp(-η⁴ / (16 a² S))` when `a Σ Eξ_i² >= 32 η²`.
pub fn li_shao_bound(a: f64, eta: f64, xi_cov_sq_sum: f64, xi_var_sum: f64) -> Result<LiShao> {
    precondition(a > 0.0 && a <= 0.5, || {
        format!("a must lie in (0, 1/2], got {a}")
    })?;
    precondition(eta > 0.0 && xi_cov_sq_sum > 0.0 && xi_var_sum > 0.0, || {
        "η and the increment sums must be positive".into()
    })?;
    let lhs = a * xi_var_sum;
    let rhs = 32.0 * eta * eta;
    if lhs >= rhs {
        Ok(LiShao::Bound {
            value: (-eta.powi(4) / (16.0 * a * a * xi_cov_sq_sum)).exp(),
        })
    } else {
        Ok(LiShao::Inadmissible { lhs, rhs })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementSums {
    /// `Σ_{2<=i<=1/a} Eξ_i²`
    pub xi_var_sum: f64,
    /// `Σ_{2<=i,j<=1/a} (Eξ_iξ_j)²`
    pub xi_cov_sq_sum: f64,
    pub count: usize,
}

fn index_limit(a: f64) -> usize {
    (1.0 / a + 1e-9).floor() as usize
}

/// Sums over `ξ_i = X_{s+iaΔ} - X_{s+(i-1)aΔ}`, `2 <= i <= 1/a`, from the
/// exact covariance.
pub fn increment_cov_sum_at(
    spec: &ProcessSpec,
    s: f64,
    a: f64,
    delta: f64,
) -> Result<IncrementSums> {
    precondition(a > 0.0 && a <= 0.5, || {
        format!("a must lie in (0, 1/2], got {a}")
    })?;
    precondition(delta > 0.0 && s >= 0.0, || {
        "Δ must be positive and s non-negative".into()
    })?;
    let m = index_limit(a);
    let times: Vec<f64> = (1..=m).map(|i| s + i as f64 * a * delta).collect();
    let c = covariance_matrix(spec, &times)?;
    // times[k] is t_{k+1}; ξ_i uses t_{i-1}, t_i
    let cov = |i: usize, j: usize| {
        c[(i - 1, j - 1)] - c[(i - 1, j - 2)] - c[(i - 2, j - 1)] + c[(i - 2, j - 2)]
    };
    let mut var_sum = 0.0;
    let mut sq_sum = 0.0;
    for i in 2..=m {
        var_sum += cov(i, i);
        for j in 2..=m {
            sq_sum += cov(i, j).powi(2);
        }
    }
    Ok(IncrementSums {
        xi_var_sum: var_sum,
        xi_cov_sq_sum: sq_sum,
        count: m - 1,
    })
}

pub fn increment_cov_sum(spec: &ProcessSpec, a: f64, delta: f64) -> Result<IncrementSums> {
    increment_cov_sum_at(spec, 0.0, a, delta)
}

/// Closed form of `S` for the periodic bridge on one unit interval:
/// `(1/a - 1)(aΔ(1-aΔ))² + ((1/a-1)² - (1/a-1)) a⁴Δ⁴`.
pub fn bridge_sum_closed_form(a: f64, delta: f64) -> f64 {
    let n = index_limit(a) as f64 - 1.0;
    let x = a * delta;
    n * (x * (1.0 - x)).powi(2) + (n * n - n) * x.powi(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FouCrossTerms {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// `I1 + 2 I2 + I3 = Eξ_iξ_j`
    pub total: f64,
    pub sign: bool,
    pub abs_error_estimate: f64,
}

fn cross_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-20,
        rel: 1e-10,
        max_subdivisions: 4000,
    }
}

/// `∫_{z>=0} ∫_{w∈[0,x]} e^{-z-w} |w - z + c|^{2H-2} dw dz` with the outer
/// variable mapped by `t = e^{-z}` and split at the kinks of the inner
/// singular point `w = z - c`.
fn half_infinite_piece(a: f64, x: f64, c: f64) -> Result<QuadratureResult> {
    let tol = cross_tolerance();
    let inner = |t: f64| {
        let z = -t.ln();
        integrate_singular_at(|w: f64| (-w).exp(), 0.0, x, z - c, a, tol)
    };
    // the singular point enters [0, x] at z = c and leaves it at z = c + x
    let mut cuts: Vec<f64> = [c, c + x]
        .iter()
        .filter(|&&z| z > 0.0)
        .map(|&z| (-z).exp())
        .collect();
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    let mut lo = 0.0;
    let mut acc = QuadratureResult::exact(0.0);
    for hi in cuts {
        if hi > lo {
            acc = acc + integrate_nested(inner, lo, hi, tol)?;
        }
        lo = hi;
    }
    Ok(acc)
}

/// Decomposition of `Eξ_iξ_j` for the fractional OU process (`θ = 1`) with
/// `ξ_i = X_{iaΔ} - X_{(i-1)aΔ}`, `i < j`, evaluated by quadrature of the
/// Wiener-integral representation. With `x = aΔ`, `k = j - i`:
/// `I1 = C_H (e^{-x}-1)² I_5(kx)`, `I2 = C_H (e^{-x}-1)(A+B)/2`,
/// `I3 = C_H ∫∫_{[0,x]²} e^{-z-w}|z-w+kx|^{2H-2}`.
pub fn fou_cross_terms(
    hurst: f64,
    a: f64,
    delta: f64,
    i: usize,
    j: usize,
) -> Result<FouCrossTerms> {
    precondition(hurst > 0.5 && hurst < 1.0, || {
        format!("hurst must lie in (1/2, 1), got {hurst}")
    })?;
    precondition(a > 0.0 && delta > 0.0, || "a and Δ must be positive".into())?;
    precondition(2 <= i && i < j && j <= index_limit(a), || {
        format!("need 2 <= i < j <= 1/a, got i={i}, j={j}, a={a}")
    })?;
    let ae = 2.0 * hurst - 1.0;
    let ch = hurst * ae;
    let x = a * delta;
    let k = (j - i) as f64;
    let em1 = (-x).exp_m1();
    let tol = cross_tolerance();

    let i5 = lemma_a2_i5(hurst, k * x)?;
    // A: first piece of ξ_i against second piece of ξ_j; B: the reverse
    let pa = half_infinite_piece(ae, x, -(k + 1.0) * x)?;
    let pb = half_infinite_piece(ae, x, (k - 1.0) * x)?;
    let pd = integrate_nested(
        |z| integrate_singular_at(|w: f64| (-z - w).exp(), 0.0, x, z + k * x, ae, tol),
        0.0,
        x,
        tol,
    )?;
    // the inner integrand of pd already carries e^{-z}
    let i1 = ch * em1 * em1 * i5.value;
    let i2 = ch * em1 * (pa.value + pb.value) / 2.0;
    let i3 = ch * pd.value;
    let total = i1 + 2.0 * i2 + i3;
    let err = ch
        * (em1 * em1 * i5.abs_error_estimate
            + em1.abs() * (pa.abs_error_estimate + pb.abs_error_estimate)
            + pd.abs_error_estimate);
    Ok(FouCrossTerms {
        i1,
        i2,
        i3,
        total,
        sign: total > 0.0,
        abs_error_estimate: err,
    })
}

/// `Σ_{2<=i<=1/a} (Eξ_i²)² / ((I₀+1)² a^{4H-1} Δ^{4H})` for the fractional
/// OU process with `θ = 1`.
pub fn fou_first_term_ratio(hurst: f64, a: f64, delta: f64) -> Result<f64> {
    precondition(hurst > 0.5 && hurst < 1.0, || {
        format!("hurst must lie in (1/2, 1), got {hurst}")
    })?;
    let spec = ProcessSpec::FractionalOu { hurst, theta: 1.0 };
    let v = variogram(&spec, 0.0, a * delta)?;
    let count = index_limit(a) as f64 - 1.0;
    let i0 = gamma_function(2.0 * hurst - 1.0)?;
    Ok(count * v * v / ((i0 + 1.0).powi(2) * a.powf(4.0 * hurst - 1.0) * delta.powf(4.0 * hurst)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallResult {
    pub s: f64,
    pub delta: f64,
    pub eta: f64,
    pub p_hat: f64,
    pub half_width: f64,
    pub analytic_bound: Option<f64>,
    pub admissible: bool,
}

impl SmallBallResult {
    /// `p_hat - 2·half_width <= bound`, vacuously true without a bound.
    pub fn dominated(&self) -> bool {
        self.analytic_bound
            .is_none_or(|b| self.p_hat - 2.0 * self.half_width <= b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallRun {
    pub replicates: usize,
    pub dt: f64,
    pub seed: u64,
    pub parallelism: Parallelism,
}

/// Per-replicate maxima of `|X_t - X_s|` over the grid on `[s, s+Δ]`.
///
/// Processes with stationary increments (fBm) are simulated on `[0, Δ]`,
/// which has the same law as the window at `s`.
pub fn window_maxima(
    spec: &ProcessSpec,
    s: f64,
    delta: f64,
    run: &SmallBallRun,
) -> Result<Vec<f64>> {
    precondition(delta > 0.0 && s >= 0.0, || {
        "Δ must be positive and s non-negative".into()
    })?;
    precondition(
        run.dt > 0.0 && run.dt <= delta / 32.0 * (1.0 + 1e-12),
        || format!("dt={} must not exceed Δ/32={}", run.dt, delta / 32.0),
    )?;
    let n = (delta / run.dt - 1e-9).ceil() as usize;
    let dt = delta / n as f64;
    let t0 = if spec.kind() == ProcessKind::Fbm {
        0.0
    } else {
        s
    };
    let sampler = PathSampler::new(*spec, t0, dt, n, None)?;
    Ok(
        sampler.map_replicates(run.seed, run.replicates, run.parallelism, |_, v| {
            v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max)
        }),
    )
}

fn tally(
    maxima: &[f64],
    s: f64,
    delta: f64,
    eta: f64,
    params: Option<&SmallBallParams>,
) -> SmallBallResult {
    let hits = maxima.iter().filter(|&&m| m <= eta).count();
    let ci = wilson(hits, maxima.len(), Z95);
    let admissible = params.is_some_and(|p| p.is_admissible(eta, delta));
    SmallBallResult {
        s,
        delta,
        eta,
        p_hat: hits as f64 / maxima.len() as f64,
        half_width: ci.half_width,
        analytic_bound: if admissible {
            params.map(|p| p.bound(eta, delta))
        } else {
            None
        },
        admissible,
    }
}

/// Estimates for several radii from one set of paths (common random
/// numbers, so the estimates are exactly monotone in `η`).
pub fn small_ball_curve(
    spec: &ProcessSpec,
    params: Option<&SmallBallParams>,
    s: f64,
    delta: f64,
    etas: &[f64],
    run: &SmallBallRun,
) -> Result<Vec<SmallBallResult>> {
    precondition(run.replicates >= MIN_REPLICATES, || {
        format!(
            "need at least {MIN_REPLICATES} replicates, got {}",
            run.replicates
        )
    })?;
    precondition(etas.iter().all(|&e| e > 0.0), || {
        "η must be positive".into()
    })?;
    let maxima = window_maxima(spec, s, delta, run)?;
    Ok(etas
        .iter()
        .map(|&eta| tally(&maxima, s, delta, eta, params))
        .collect())
}

pub fn empirical_small_ball(
    spec: &ProcessSpec,
    s: f64,
    delta: f64,
    eta: f64,
    replicates: usize,
    dt: f64,
    seed: u64,
) -> Result<SmallBallResult> {
    let params = default_params(spec)?;
    let run = SmallBallRun {
        replicates,
        dt,
        seed,
        parallelism: Parallelism::default(),
    };
    Ok(small_ball_curve(spec, params.as_ref(), s, delta, &[eta], &run)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedResult {
    pub coarse: SmallBallResult,
    pub fine: SmallBallResult,
    /// The two estimates differ by more than three standard errors of their
    /// difference under `dt/2`.
    pub unstable: bool,
}

/// Runs the curve at `dt` and `dt/2` and flags discretization drift.
pub fn refined_curve(
    spec: &ProcessSpec,
    params: Option<&SmallBallParams>,
    s: f64,
    delta: f64,
    etas: &[f64],
    run: &SmallBallRun,
) -> Result<Vec<RefinedResult>> {
    let coarse = small_ball_curve(spec, params, s, delta, etas, run)?;
    let fine_run = SmallBallRun {
        dt: run.dt / 2.0,
        ..*run
    };
    let fine = small_ball_curve(spec, params, s, delta, etas, &fine_run)?;
    Ok(coarse
        .into_iter()
        .zip(fine)
        .map(|(c, f)| RefinedResult {
            coarse: c,
            fine: f,
            unstable: (c.p_hat - f.p_hat).abs() > 3.0 * c.half_width.hypot(f.half_width) / Z95,
        })
        .collect())
}

/// `(Δ, η)` pairs strictly inside the admissible region: `n_delta` windows
/// spread over `(0, Δ*)` and `n_eta` radii as fractions of `η`'s ceiling.
pub fn admissible_grid(params: &SmallBallParams, n_delta: usize, n_eta: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n_delta * n_eta);
    for i in 0..n_delta {
        let delta = params.delta_star.min(1.0) * (i + 1) as f64 / (n_delta + 1) as f64;
        let ceiling = params.eta_ceiling(delta).min(1.0);
        for j in 0..n_eta {
            let eta = ceiling * (j + 1) as f64 / (n_eta + 1) as f64;
            out.push((delta, eta));
        }
    }
    out
}

/// `sup_{t∈[s,s+Δ]} |φ(t) - φ(s)|` for the period-2 triangle wave.
pub fn sawtooth_window_range(s: f64, delta: f64) -> f64 {
    let base = sawtooth_profile(s);
    let mut best = (sawtooth_profile(s + delta) - base).abs();
    let mut k = s.floor() + 1.0;
    while k <= s + delta {
        best = best.max((sawtooth_profile(k) - base).abs());
        k += 1.0;
    }
    best
}

/// Exact small-ball probability of `ξ φ(t)`: `P[|ξ| m(s,Δ) <= η]`.
pub fn sawtooth_exact_probability(xi: &XiLaw, s: f64, delta: f64, eta: f64) -> Result<f64> {
    let m = sawtooth_window_range(s, delta);
    if m == 0.0 {
        return Ok(1.0);
    }
    xi.abs_cdf(eta / m)
}

/// `M = ∫_0^1∫_0^1 |t₂ - t₁|^q dt₁ dt₂ = 2 / ((q+1)(q+2))` with
/// `q = rρ - rβ - 2`; infinite for `q <= -1`.
pub fn grr_m(r: f64, rho: f64, beta: f64) -> Result<f64> {
    let q = r * rho - r * beta - 2.0;
    precondition(q > -1.0, || {
        format!("exponent rρ - rβ - 2 = {q} must exceed -1; M is infinite")
    })?;
    Ok(2.0 / ((q + 1.0) * (q + 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderTail {
    pub p_hat: f64,
    pub half_width: f64,
    /// `C·M/h^r` with the supplied `C`.
    pub reference: Option<f64>,
    pub m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderTailConfig {
    pub beta: f64,
    pub h: f64,
    pub window: f64,
    pub s: f64,
    /// Moment order and Hölder exponent used for the reference value.
    pub r: f64,
    pub rho: f64,
    pub constant: f64,
}

/// Estimates `P[sup_{t₁≠t₂∈[s,s+w]} |X_{t₂}-X_{t₁}| / |t₂-t₁|^β >= h]` over the grid.
pub fn empirical_holder_tail(
    spec: &ProcessSpec,
    cfg: &HolderTailConfig,
    run: &SmallBallRun,
) -> Result<HolderTail> {
    precondition(cfg.beta > 0.0 && cfg.h > 0.0 && cfg.window > 0.0, || {
        "β, h and the window must be positive".into()
    })?;
    precondition(run.replicates >= 1, || "replicates must be positive".into())?;
    let n = (cfg.window / run.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = cfg.window / n as f64;
    let t0 = if spec.kind() == ProcessKind::Fbm {
        0.0
    } else {
        cfg.s
    };
    let sampler = PathSampler::new(*spec, t0, dt, n, None)?;
    let weights: Vec<f64> = (0..=n)
        .map(|l| {
            if l == 0 {
                0.0
            } else {
                (l as f64 * dt).powf(-cfg.beta)
            }
        })
        .collect();
    let exceed = sampler.map_replicates(run.seed, run.replicates, run.parallelism, |_, v| {
        let mut best = 0.0f64;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                best = best.max((v[j] - v[i]).abs() * weights[j - i]);
            }
        }
        best >= cfg.h
    });
    let hits = exceed.iter().filter(|&&e| e).count();
    let ci = wilson(hits, run.replicates, Z95);
    let m = grr_m(cfg.r, cfg.rho, cfg.beta).ok();
    Ok(HolderTail {
        p_hat: hits as f64 / run.replicates as f64,
        half_width: ci.half_width,
        reference: m.map(|m| cfg.constant * m / cfg.h.powf(cfg.r)),
        m,
    })
}

/// Writes `s,delta,eta,p_hat,half_width,bound,admissible` rows.
pub fn write_csv<W: Write>(results: &[SmallBallResult], mut w: W) -> Result<()> {
    writeln!(w, "s,delta,eta,p_hat,half_width,bound,admissible")?;
    for r in results {
        let bound = r.analytic_bound.map(|b| b.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.s, r.delta, r.eta, r.p_hat, r.half_width, bound, r.admissible
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn positive_exponents() {
        let p = derive_params(1.0, 1.0, 1.0, 0.75, Correlation::Positive).unwrap();
        assert_relative_eq!(p.gamma.unwrap(), 0.75);
        assert_relative_eq!(p.mu, 0.5);
        assert_relative_eq!(p.lambda, 2.0 / 3.0, epsilon = 1e-15);
        assert!(derive_params(1.0, 1.0, 1.0, 0.5, Correlation::Positive).is_err());
        assert!(derive_params(2.0, 1.0, 1.0, 0.75, Correlation::Positive).is_err());
    }

    #[test]
    fn bridge_constants() {
        let p = derive_params(0.5, 1.0, 0.5, 0.5, Correlation::BridgeNegative).unwrap();
        assert_relative_eq!(c5(0.5, 0.5), 64.0, epsilon = 1e-12);
        assert_relative_eq!(p.k2, 1.0 / (32.0 * 64f64.powi(3)), max_relative = 1e-12);
        assert_relative_eq!(
            p.k3.unwrap(),
            1.0 / (8.0 * 2f64.sqrt()),
            max_relative = 1e-12
        );
        assert_eq!(
            (p.gamma, p.mu, p.lambda, p.delta_star),
            (Some(0.5), 1.0, 2.0, 1.0)
        );
    }

    #[test]
    fn admissibility_message_names_condition() {
        let p = derive_params(0.5, 1.0, 0.5, 0.5, Correlation::BridgeNegative).unwrap();
        let err = p.check_admissible(0.5, 0.25).unwrap_err().to_string();
        assert!(err.contains("K₃Δ^γ") && err.contains("(A2)(iii)"), "{err}");
        assert!(p.is_admissible(0.01, 0.25));
        assert!(!p.is_admissible(0.01, 1.5));
    }

    #[test]
    fn li_shao_cases() {
        let (a, eta) = (0.25, 0.1f64);
        let s = eta.powi(4) / (16.0 * a * a);
        let r = li_shao_bound(a, eta, s, 32.0 * eta * eta / a).unwrap();
        assert_relative_eq!(r.value().unwrap(), (-1.0f64).exp(), max_relative = 1e-12);
        let r = li_shao_bound(a, eta, s, 31.0 * eta * eta / a).unwrap();
        assert!(matches!(r, LiShao::Inadmissible { .. }));
    }

    #[test]
    fn bridge_sum_matches_closed_form() {
        for &a in &[0.25, 0.125] {
            for &d in &[0.25f64, 0.5] {
                let s = increment_cov_sum(&ProcessSpec::PeriodicBridge, a, d).unwrap();
                assert_relative_eq!(
                    s.xi_cov_sq_sum,
                    bridge_sum_closed_form(a, d),
                    max_relative = 1e-10
                );
                assert!(s.xi_cov_sq_sum <= a * d * d + a * a * d.powi(4));
            }
        }
    }

    #[test]
    fn var_sum_is_consecutive_variograms() {
        let spec = ProcessSpec::Fbm { hurst: 0.7 };
        let s = increment_cov_sum(&spec, 0.125, 0.5).unwrap();
        let x: f64 = 0.125 * 0.5;
        assert_relative_eq!(s.xi_var_sum, 7.0 * x.powf(1.4), max_relative = 1e-10);
    }

    #[test]
    fn sawtooth_range() {
        assert_relative_eq!(sawtooth_window_range(0.0, 1.0), 1.0);
        assert_relative_eq!(sawtooth_window_range(0.5, 1.0), 0.5);
        assert_relative_eq!(sawtooth_window_range(0.6, 0.8), 0.4, epsilon = 1e-12);
        // beyond Δ = 1 the range can fall below Δ/2
        assert_relative_eq!(sawtooth_window_range(0.5, 1.5), 0.5);
    }

    #[test]
    fn grr_closed_form() {
        assert_relative_eq!(grr_m(4.0, 1.0, 0.25).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert!(grr_m(2.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn csv_blank_bound() {
        let r = SmallBallResult {
            s: 0.0,
            delta: 0.5,
            eta: 0.1,
            p_hat: 0.0,
            half_width: 0.1,
            analytic_bound: None,
            admissible: false,
        };
        let mut buf = Vec::new();
        write_csv(&[r], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "s,delta,eta,p_hat,half_width,bound,admissible\n0,0.5,0.1,0,0.1,,false\n"
        );
    }
}
