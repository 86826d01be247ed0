//! Covariance kernels and variograms for the supported process families.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::quad::{integrate, QuadratureResult, Tolerance};

/// Truncation horizon for stationary integrals, in units of `1/θ`.
pub const STATIONARY_TAIL: f64 = 40.0;

/// Times within this distance of an integer are treated as the integer.
const INTEGER_SNAP: f64 = 1e-9;

fn kernel_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-14,
        rel: 1e-12,
        max_subdivisions: 4000,
    }
}

/// Law of the amplitude of the random sawtooth: symmetric, with density on
/// `0 < |x| <= 1` proportional to `exp(-|x|^{-λ₀})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiLaw {
    pub lambda0: f64,
}

impl Default for XiLaw {
    fn default() -> Self {
        XiLaw { lambda0: 2.0 }
    }
}

impl XiLaw {
    fn weight(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            (-y.powf(-self.lambda0)).exp()
        }
    }

    fn partial_moment(&self, upper: f64, power: i32) -> Result<f64> {
        let upper = upper.clamp(0.0, 1.0);
        Ok(integrate(
            |y| y.powi(power) * self.weight(y),
            0.0,
            upper,
            kernel_tolerance(),
        )?
        .value)
    }

    /// `Z = ∫_0^1 exp(-y^{-λ₀}) dy`
    pub fn normalizer(&self) -> Result<f64> {
        self.partial_moment(1.0, 0)
    }

    pub fn second_moment(&self) -> Result<f64> {
        Ok(self.partial_moment(1.0, 2)? / self.normalizer()?)
    }

    /// `P(|ξ| <= x)`
    pub fn abs_cdf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        if x >= 1.0 {
            return Ok(1.0);
        }
        Ok(self.partial_moment(x, 0)? / self.normalizer()?)
    }

    /// `(K₃, K₄)` with `P(|ξ| <= x) <= K₃ exp(-K₄ x^{-λ₀})` on `(0, 1]`.
    pub fn tail_constants(&self) -> Result<(f64, f64)> {
        let z = self.normalizer()?;
        Ok(((1.0 / z).max(std::f64::consts::E), 1.0))
    }

    /// Rejection sampler: propose `U ~ Unif(0,1)` and accept with probability
    /// `exp(1 - U^{-λ₀})`; attach an independent sign.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.random();
            if u <= 0.0 {
                continue;
            }
            let accept: f64 = rng.random();
            if accept < (1.0 - u.powf(-self.lambda0)).exp() {
                return if rng.random::<bool>() { u } else { -u };
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    Fbm { hurst: f64 },
    PeriodicBridge,
    StationaryOu { theta: f64 },
    FractionalOu { hurst: f64, theta: f64 },
    TemperedStationary { theta: f64, alpha: f64 },
    RandomSawtooth { xi: XiLaw },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Fbm,
    PeriodicBridge,
    StationaryOu,
    FractionalOu,
    TemperedStationary,
    RandomSawtooth,
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::Fbm { hurst } => write!(f, "fbm(hurst={hurst})"),
            ProcessSpec::PeriodicBridge => write!(f, "bridge"),
            ProcessSpec::StationaryOu { theta } => write!(f, "ou(theta={theta})"),
            ProcessSpec::FractionalOu { hurst, theta } => {
                write!(f, "fou(hurst={hurst},theta={theta})")
            }
            ProcessSpec::TemperedStationary { theta, alpha } => {
                write!(f, "tempered(theta={theta},alpha={alpha})")
            }
            ProcessSpec::RandomSawtooth { xi } => write!(f, "sawtooth(lambda0={})", xi.lambda0),
        }
    }
}

impl ProcessSpec {
    pub fn kind(&self) -> ProcessKind {
        match self {
            ProcessSpec::Fbm { .. } => ProcessKind::Fbm,
            ProcessSpec::PeriodicBridge => ProcessKind::PeriodicBridge,
            ProcessSpec::StationaryOu { .. } => ProcessKind::StationaryOu,
            ProcessSpec::FractionalOu { .. } => ProcessKind::FractionalOu,
            ProcessSpec::TemperedStationary { .. } => ProcessKind::TemperedStationary,
            ProcessSpec::RandomSawtooth { .. } => ProcessKind::RandomSawtooth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match *self {
            ProcessSpec::Fbm { hurst } if !(hurst > 0.0 && hurst < 1.0) => {
                bad(format!("fbm hurst must lie in (0, 1), got {hurst}"))
            }
            ProcessSpec::StationaryOu { theta } if !(theta > 0.0 && theta.is_finite()) => {
                bad(format!("ou theta must be positive, got {theta}"))
            }
            ProcessSpec::FractionalOu { hurst, theta } => {
                if !(hurst > 0.5 && hurst < 1.0) {
                    bad(format!("fou hurst must lie in (1/2, 1), got {hurst}"))
                } else if !(theta > 0.0 && theta.is_finite()) {
                    bad(format!("fou theta must be positive, got {theta}"))
                } else {
                    Ok(())
                }
            }
            ProcessSpec::TemperedStationary { theta, alpha } => {
                if !(theta > 0.0 && theta.is_finite()) {
                    bad(format!("tempered theta must be positive, got {theta}"))
                } else if !(alpha > 0.0 && alpha.is_finite()) {
                    bad(format!("tempered alpha must be positive, got {alpha}"))
                } else {
                    Ok(())
                }
            }
            ProcessSpec::RandomSawtooth { xi } if !(xi.lambda0 > 0.0 && xi.lambda0.is_finite()) => {
                bad(format!(
                    "sawtooth lambda0 must be positive, got {}",
                    xi.lambda0
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(
            self.kind(),
            ProcessKind::StationaryOu | ProcessKind::FractionalOu | ProcessKind::TemperedStationary
        )
    }

    pub fn is_gaussian(&self) -> bool {
        self.kind() != ProcessKind::RandomSawtooth
    }

    /// Covariance at lag `τ >= 0` for stationary kinds.
    pub fn stationary_covariance(&self, lag: f64) -> Result<QuadratureResult> {
        let lag = lag.abs();
        match *self {
            ProcessSpec::StationaryOu { theta } => Ok(QuadratureResult::exact(
                (-theta * lag).exp() / (2.0 * theta),
            )),
            ProcessSpec::FractionalOu { hurst, theta } => {
                let unit = fou_unit_covariance(hurst, theta * lag)?;
                Ok(unit.scale(theta.powf(-2.0 * hurst)))
            }
            ProcessSpec::TemperedStationary { theta, alpha } => {
                tempered_covariance(theta, alpha, lag)
            }
            _ => Err(Error::Precondition(format!("{self} is not stationary"))),
        }
    }
}

/// Triangle wave of period 2 with `φ(0) = 0`, `φ(1) = 1`.
pub fn sawtooth_profile(t: f64) -> f64 {
    let u = t.rem_euclid(2.0);
    if u <= 1.0 {
        u
    } else {
        2.0 - u
    }
}

/// Splits `t` into its unit interval index and the position inside it.
fn unit_position(t: f64) -> (f64, f64) {
    let r = t.round();
    if (t - r).abs() <= INTEGER_SNAP * t.abs().max(1.0) {
        return (r, 0.0);
    }
    let k = t.floor();
    (k, t - k)
}

fn bridge_cov(s: f64, t: f64) -> f64 {
    let (ks, us) = unit_position(s);
    let (kt, ut) = unit_position(t);
    if ks != kt {
        0.0
    } else {
        us.min(ut) - us * ut
    }
}

fn bridge_variogram(s: f64, t: f64) -> f64 {
    let (ks, us) = unit_position(s);
    let (kt, ut) = unit_position(t);
    if ks == kt {
        let d = (ut - us).abs();
        d * (1.0 - d)
    } else {
        us * (1.0 - us) + ut * (1.0 - ut)
    }
}

/// Covariance of the fractional OU process with `θ = 1` at lag `τ >= 0`:
/// `(H/2)[e^{-τ}Γ(2H) + ∫_τ^∞ e^{τ-x} x^{2H-1} dx - ∫_0^τ e^{x-τ} x^{2H-1} dx]`.
fn fou_unit_covariance(hurst: f64, tau: f64) -> Result<QuadratureResult> {
    let b = 2.0 * hurst - 1.0;
    let tol = kernel_tolerance();
    let g = statrs::function::gamma::gamma(2.0 * hurst);
    let upper = integrate(
        |y| (-y).exp() * (tau + y).powf(b),
        0.0,
        STATIONARY_TAIL,
        tol,
    )?;
    // ∫_{40}^∞ e^{-y}(τ+y)^b dy <= e^{-40}(τ + 41) since b < 1
    let tail = (-STATIONARY_TAIL).exp() * (tau + STATIONARY_TAIL + 1.0);
    let lower = if tau > 0.0 {
        integrate(|x| (x - tau).exp() * x.powf(b), 0.0, tau, tol)?
    } else {
        QuadratureResult::exact(0.0)
    };
    let value = 0.5 * hurst * ((-tau).exp() * g + upper.value - lower.value);
    Ok(QuadratureResult {
        value,
        abs_error_estimate: 0.5
            * hurst
            * (upper.abs_error_estimate + lower.abs_error_estimate + tail),
        subdivisions: upper.subdivisions + lower.subdivisions,
    })
}

/// `e^{-θτ} ∫_0^∞ e^{-2θz} z^α (z+τ)^α dz`
fn tempered_covariance(theta: f64, alpha: f64, tau: f64) -> Result<QuadratureResult> {
    let len = STATIONARY_TAIL / theta;
    let r = integrate(
        |z| (-2.0 * theta * z).exp() * z.powf(alpha) * (z + tau).powf(alpha),
        0.0,
        len,
        kernel_tolerance(),
    )?;
    let tail =
        (-2.0 * STATIONARY_TAIL).exp() * (len + tau + 1.0).powf(2.0 * alpha + 1.0) / (2.0 * theta);
    let damp = (-theta * tau).exp();
    Ok(QuadratureResult {
        value: damp * r.value,
        abs_error_estimate: damp * (r.abs_error_estimate + tail),
        subdivisions: r.subdivisions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    /// Covariance `E[X_s X_t]`.
    pub value: f64,
    /// `E[(X_t - X_s)^2]`
    pub variogram: f64,
    pub quadrature_error: Option<f64>,
}

pub fn covariance(spec: &ProcessSpec, s: f64, t: f64) -> Result<KernelEval> {
    spec.validate()?;
    precondition(
        s >= 0.0 && t >= 0.0 && s.is_finite() && t.is_finite(),
        || format!("times must be finite and non-negative, got s={s}, t={t}"),
    )?;
    match *spec {
        ProcessSpec::Fbm { hurst } => {
            let h2 = 2.0 * hurst;
            let vario = (t - s).abs().powf(h2);
            Ok(KernelEval {
                value: 0.5 * (s.powf(h2) + t.powf(h2) - vario),
                variogram: vario,
                quadrature_error: None,
            })
        }
        ProcessSpec::PeriodicBridge => Ok(KernelEval {
            value: bridge_cov(s, t),
            variogram: bridge_variogram(s, t),
            quadrature_error: None,
        }),
        ProcessSpec::RandomSawtooth { xi } => {
            let m2 = xi.second_moment()?;
            let (ps, pt) = (sawtooth_profile(s), sawtooth_profile(t));
            Ok(KernelEval {
                value: m2 * ps * pt,
                variogram: m2 * (pt - ps).powi(2),
                quadrature_error: Some(0.0),
            })
        }
        ProcessSpec::StationaryOu { theta } => {
            let tau = (t - s).abs();
            Ok(KernelEval {
                value: (-theta * tau).exp() / (2.0 * theta),
                variogram: -(-theta * tau).exp_m1() / theta,
                quadrature_error: None,
            })
        }
        ProcessSpec::FractionalOu { .. } | ProcessSpec::TemperedStationary { .. } => {
            let zero = spec.stationary_covariance(0.0)?;
            let lagged = spec.stationary_covariance(t - s)?;
            Ok(KernelEval {
                value: lagged.value,
                variogram: (2.0 * (zero.value - lagged.value)).max(0.0),
                quadrature_error: Some(lagged.abs_error_estimate + zero.abs_error_estimate),
            })
        }
    }
}

pub fn variogram(spec: &ProcessSpec, s: f64, t: f64) -> Result<f64> {
    Ok(covariance(spec, s, t)?.variogram)
}

/// Variance of the stationary fractional OU process with `θ = 1`, computed
/// as the 2-D integral `2H ∫_0^∞ e^{-z} (z^a - ∫_0^z e^{-y}(z-y)^a dy) dz`,
/// `a = 2H-1`. It tends to `1/2` as `H → 1/2`.
pub fn fou_variance_quadrature(hurst: f64) -> Result<QuadratureResult> {
    precondition((0.5..1.0).contains(&hurst), || {
        format!("hurst must lie in [1/2, 1), got {hurst}")
    })?;
    let a = 2.0 * hurst - 1.0;
    let tol = kernel_tolerance();
    let r = crate::quad::integrate_nested(
        |z| {
            let inner = integrate(|y| (-y).exp() * (z - y).powf(a), 0.0, z, tol)?;
            Ok(QuadratureResult {
                value: (-z).exp() * (z.powf(a) - inner.value),
                abs_error_estimate: (-z).exp() * inner.abs_error_estimate,
                subdivisions: inner.subdivisions,
            })
        },
        0.0,
        STATIONARY_TAIL,
        tol,
    )?;
    Ok(r.scale(2.0 * hurst))
}

pub fn fou_variance(hurst: f64) -> Result<f64> {
    Ok(fou_variance_quadrature(hurst)?.value)
}

/// Covariance matrix on the given times. Stationary kinds on a uniform grid
/// reuse one evaluation per lag.
pub fn covariance_matrix(spec: &ProcessSpec, times: &[f64]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = times.len();
    if spec.is_stationary() && n > 2 {
        let dt = times[1] - times[0];
        let uniform = times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * dt.abs().max(1.0));
        if uniform {
            let lags = (0..n)
                .map(|k| Ok(spec.stationary_covariance(k as f64 * dt)?.value))
                .collect::<Result<Vec<f64>>>()?;
            return Ok(DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]));
        }
    }
    if let ProcessSpec::RandomSawtooth { xi } = spec {
        let m2 = xi.second_moment()?;
        let phi: Vec<f64> = times.iter().map(|&t| sawtooth_profile(t)).collect();
        return Ok(DMatrix::from_fn(n, n, |i, j| m2 * phi[i] * phi[j]));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = covariance(spec, times[i], times[j])?.value;
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    Ok(m)
}
