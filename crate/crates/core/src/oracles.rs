//! Independent closed-form and quadrature references for the fractional
//! kernel integrals. Every quadrature here is a genuine nested 2-D
//! integration over the original variables; none of it reuses the 1-D
//! reductions in [`crate::kernels`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
pub use crate::quad::QuadratureResult;
use crate::quad::{integrate, integrate_nested, integrate_singular_at, Tolerance};

/// Truncation length for `∫_0^∞ e^{-w} (...) dw` inner integrals; the
/// neglected tail is below `e^{-40}` times a polynomial factor.
const TAIL: f64 = 40.0;

fn check_fractional_hurst(hurst: f64) -> Result<f64> {
    precondition(hurst > 0.5 && hurst < 1.0, || {
        format!("hurst must lie in (1/2, 1), got {hurst}")
    })?;
    Ok(2.0 * hurst - 1.0)
}

fn tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-12,
        rel: 1e-11,
        max_subdivisions: 4000,
    }
}

/// Gamma function for positive real arguments.
pub fn gamma_function(z: f64) -> Result<f64> {
    precondition(z > 0.0 && z.is_finite(), || {
        format!("gamma_function needs z > 0, got {z}")
    })?;
    Ok(statrs::function::gamma::gamma(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaA1 {
    pub quadrature: QuadratureResult,
    pub closed_form: f64,
    /// `2 (2H-1)^{-1} x^{2H-1}`
    pub bound: f64,
}

/// `∫_0^x |w - y|^{2H-2} dw`, by case-split closed form and by quadrature.
pub fn lemma_a1_integral(hurst: f64, x: f64, y: f64) -> Result<LemmaA1> {
    let a = check_fractional_hurst(hurst)?;
    precondition(x >= 0.0 && y >= 0.0, || {
        format!("x and y must be non-negative, got x={x}, y={y}")
    })?;
    let closed_form = if x == 0.0 {
        0.0
    } else if y == 0.0 {
        x.powf(a) / a
    } else if y <= x {
        (y.powf(a) + (x - y).powf(a)) / a
    } else {
        (y.powf(a) - (y - x).powf(a)) / a
    };
    let quadrature = integrate_singular_at(|_| 1.0, 0.0, x, y, a, tolerance())?;
    Ok(LemmaA1 {
        quadrature,
        closed_form,
        bound: 2.0 * x.powf(a) / a,
    })
}

/// `∫∫_{R_+^2} e^{-z-w} |z - w + p|^{2H-2} dz dw` for `p >= 0`.
///
/// The outer variable is mapped to `(0, 1)` by `t = e^{-z}`, which absorbs
/// the `e^{-z}` weight; the inner integral is split at `w = z + p`.
pub fn lemma_a2_i5(hurst: f64, p: f64) -> Result<QuadratureResult> {
    let a = check_fractional_hurst(hurst)?;
    precondition(p >= 0.0, || format!("p must be non-negative, got {p}"))?;
    integrate_nested(
        |t| {
            let z = -t.ln();
            let at = z + p;
            integrate_singular_at(|w| (-w).exp(), 0.0, at + TAIL, at, a, tolerance())
        },
        0.0,
        1.0,
        tolerance(),
    )
}

/// `I_0 = I_5(0) = ∫∫ e^{-z-w}|z-w|^{2H-2}`, which equals `Γ(2H-1)`.
pub fn i0_quadrature(hurst: f64) -> Result<QuadratureResult> {
    lemma_a2_i5(hurst, 0.0)
}

/// Evaluates `I_5` over a sweep of shifts.
pub fn lemma_a2_sweep(hurst: f64, shifts: &[f64]) -> Result<Vec<(f64, QuadratureResult)>> {
    shifts
        .iter()
        .map(|&p| Ok((p, lemma_a2_i5(hurst, p)?)))
        .collect()
}

/// `x^{-1} ∫_0^∞ ∫_0^x e^{-u+v} |u-v|^{2H-2} dv du`.
pub fn lemma_a3_ratio(hurst: f64, x: f64) -> Result<QuadratureResult> {
    let a = check_fractional_hurst(hurst)?;
    precondition(x > 0.0, || format!("x must be positive, got {x}"))?;
    // u = -ln t; the outer integrand has a kink at u = x, i.e. t = e^{-x}.
    let inner = |t: f64| {
        let u = -t.ln();
        integrate_singular_at(|v: f64| v.exp(), 0.0, x, u, a, tolerance())
    };
    let kink = (-x).exp();
    let r = integrate_nested(inner, 0.0, kink, tolerance())?
        + integrate_nested(inner, kink, 1.0, tolerance())?;
    Ok(r.scale(1.0 / x))
}

/// Richardson extrapolation to `x → 0` of samples `F(x_k)` under the model
/// `F(x) = L + Σ_j c_j x^{e_j}`, given the exponents `e_j`.
pub fn richardson_limit(xs: &[f64], values: &[f64], exponents: &[f64]) -> Result<f64> {
    let m = exponents.len() + 1;
    precondition(xs.len() == values.len() && xs.len() >= m, || {
        format!(
            "need at least {m} samples for {} correction terms",
            exponents.len()
        )
    })?;
    // use the m smallest abscissae
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let idx = &idx[..m];
    let a = DMatrix::from_fn(m, m, |r, c| {
        if c == 0 {
            1.0
        } else {
            xs[idx[r]].powf(exponents[c - 1])
        }
    });
    let b = DVector::from_iterator(m, idx.iter().map(|&i| values[i]));
    let sol = a.lu().solve(&b).ok_or_else(|| {
        Error::Precondition("richardson system is singular; abscissae must be distinct".into())
    })?;
    Ok(sol[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaA3 {
    pub samples: Vec<(f64, QuadratureResult)>,
    pub extrapolated: f64,
    /// `Γ(2H-1)`
    pub gamma: f64,
}

impl LemmaA3 {
    pub fn abs_error(&self) -> f64 {
        (self.extrapolated - self.gamma).abs()
    }
}

/// Evaluates the ratio along a decreasing sequence and extrapolates the
/// limit. The ratio expands as `Γ(2H-1) + Σ_k c_k x^{2H-1+k}`, so the
/// correction exponents are known exactly.
pub fn lemma_a3_limit(hurst: f64, x_sequence: &[f64]) -> Result<LemmaA3> {
    let a = check_fractional_hurst(hurst)?;
    precondition(x_sequence.len() >= 2, || {
        "x_sequence needs at least two points".into()
    })?;
    precondition(
        x_sequence.windows(2).all(|w| w[1] < w[0]) && x_sequence.iter().all(|&x| x > 0.0),
        || "x_sequence must be positive and strictly decreasing".into(),
    )?;
    let samples = x_sequence
        .iter()
        .map(|&x| Ok((x, lemma_a3_ratio(hurst, x)?)))
        .collect::<Result<Vec<_>>>()?;
    let exponents: Vec<f64> = (0..x_sequence.len() - 1).map(|k| a + k as f64).collect();
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let vs: Vec<f64> = samples.iter().map(|s| s.1.value).collect();
    let extrapolated = richardson_limit(&xs, &vs, &exponents)?;
    Ok(LemmaA3 {
        samples,
        extrapolated,
        gamma: gamma_function(a)?,
    })
}

/// Default decreasing sequence used by the CLI and acceptance suite.
pub fn default_a3_sequence() -> Vec<f64> {
    (0..5).map(|k| 0.1 / 2f64.powi(k)).collect()
}

/// `∫_0^1 ∫_0^1 ½(s^{2H} + u^{2H} - |s-u|^{2H}) ds du`, the variance of the
/// time average of fBm over the unit interval.
pub fn fbm_unit_square_covariance(hurst: f64) -> Result<QuadratureResult> {
    precondition(hurst > 0.0 && hurst < 1.0, || {
        format!("hurst must lie in (0, 1), got {hurst}")
    })?;
    let h2 = 2.0 * hurst;
    let tol = tolerance();
    // split the inner integral at the kink u = s
    integrate_nested(
        |s| {
            let f = |u: f64| 0.5 * (s.powf(h2) + u.powf(h2) - (s - u).abs().powf(h2));
            Ok(integrate(f, 0.0, s, tol)? + integrate(f, s, 1.0, tol)?)
        },
        0.0,
        1.0,
        tol,
    )
}
