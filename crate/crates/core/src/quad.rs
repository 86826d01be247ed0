//! Globally adaptive Gauss–Kronrod (7/15) quadrature with explicit error
//! reporting, plus the variable substitutions used to tame the integrable
//! `|x|^{a-1}` singularities that appear in fractional kernels.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value of an integral with its absolute error estimate and the number of
/// interval bisections performed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub subdivisions: usize,
}

impl QuadratureResult {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            abs_error_estimate: 0.0,
            subdivisions: 0,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            value: self.value * c,
            abs_error_estimate: self.abs_error_estimate * c.abs(),
            subdivisions: self.subdivisions,
        }
    }
}

impl std::ops::Add for QuadratureResult {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            value: self.value + rhs.value,
            abs_error_estimate: self.abs_error_estimate + rhs.abs_error_estimate,
            subdivisions: self.subdivisions + rhs.subdivisions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-11,
            max_subdivisions: 2000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }

    /// One refinement level tighter, used to validate error estimates.
    pub fn refined(self) -> Self {
        Self {
            abs: self.abs * 1e-2,
            rel: self.rel * 1e-2,
            max_subdivisions: self.max_subdivisions * 4,
        }
    }
}

// Kronrod abscissae on [-1, 1] (non-negative half) and weights.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the 7-point rule (nodes are XGK[1], XGK[3], XGK[5], XGK[7]).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let mut err = ((kronrod - gauss) * half).abs();
    let floor = 50.0 * f64::EPSILON * abs_sum * half.abs();
    if err < floor {
        err = floor;
    }
    (value, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<QuadratureResult> {
    if a == b {
        return Ok(QuadratureResult::exact(0.0));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Precondition(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    let (value, err) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    let mut subdivisions = 0;

    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if subdivisions >= tol.max_subdivisions {
            return Err(Error::Quadrature {
                value: total,
                error_estimate: total_err,
                subdivisions,
            });
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // interval exhausted at machine precision
            return Err(Error::Quadrature {
                value: total,
                error_estimate: total_err,
                subdivisions,
            });
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
        });
        subdivisions += 1;
        if !total.is_finite() {
            return Err(Error::Quadrature {
                value: total,
                error_estimate: f64::INFINITY,
                subdivisions,
            });
        }
    }

    // Re-sum to shed the drift of incremental updates.
    let (value, err) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.err));
    Ok(QuadratureResult {
        value,
        abs_error_estimate: err,
        subdivisions,
    })
}

/// `∫_0^len g(x) x^{a-1} dx` for `a ∈ (0, 1]`.
///
/// Substituting `x = (a y)^{1/a}` turns `x^{a-1} dx` into `dy`, so the
/// integrand handed to the adaptive rule is `g` evaluated along a smooth map.
pub fn integrate_power_weighted<G: Fn(f64) -> f64>(
    g: G,
    len: f64,
    a: f64,
    tol: Tolerance,
) -> Result<QuadratureResult> {
    integrate_power_weighted_range(g, 0.0, len, a, tol)
}

/// `∫_lo^hi g(u) u^{a-1} du` for `0 <= lo <= hi`, same substitution.
pub fn integrate_power_weighted_range<G: Fn(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    a: f64,
    tol: Tolerance,
) -> Result<QuadratureResult> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Precondition(format!(
            "power-weight exponent must lie in (0, 1], got {a}"
        )));
    }
    if lo < 0.0 {
        return Err(Error::Precondition(format!(
            "power-weighted range must start at or above 0, got {lo}"
        )));
    }
    if hi <= lo {
        return Ok(QuadratureResult::exact(0.0));
    }
    let inv = 1.0 / a;
    let y_lo = lo.powf(a) / a;
    let y_hi = hi.powf(a) / a;
    integrate(|y| g((a * y).powf(inv).clamp(lo, hi)), y_lo, y_hi, tol)
}

/// `∫_lo^hi g(x) |x - at|^{a-1} dx`, splitting at the singular point and
/// removing the power singularity on each side.
pub fn integrate_singular_at<G: Fn(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    at: f64,
    a: f64,
    tol: Tolerance,
) -> Result<QuadratureResult> {
    if hi <= lo {
        return Ok(QuadratureResult::exact(0.0));
    }
    let half = Tolerance {
        abs: tol.abs * 0.5,
        ..tol
    };
    // x = at - u for x below the singular point, x = at + u above it.
    let left = if at > lo {
        integrate_power_weighted_range(|u| g(at - u), (at - hi).max(0.0), at - lo, a, half)?
    } else {
        QuadratureResult::exact(0.0)
    };
    let right = if at < hi {
        integrate_power_weighted_range(|u| g(at + u), (lo - at).max(0.0), hi - at, a, half)?
    } else {
        QuadratureResult::exact(0.0)
    };
    Ok(left + right)
}

/// Nested 2-D integration: `∫_a^b inner(x) dx` where `inner` is itself a
/// quadrature. The reported error adds the outer estimate and the largest
/// inner error times the outer interval length.
pub fn integrate_nested<I>(inner: I, a: f64, b: f64, tol: Tolerance) -> Result<QuadratureResult>
where
    I: Fn(f64) -> Result<QuadratureResult>,
{
    let failure: Cell<Option<Error>> = Cell::new(None);
    let max_inner_err = Cell::new(0.0f64);
    let inner_subdivisions = Cell::new(0usize);
    let outer = integrate(
        |x| match inner(x) {
            Ok(r) => {
                max_inner_err.set(max_inner_err.get().max(r.abs_error_estimate));
                inner_subdivisions.set(inner_subdivisions.get() + r.subdivisions);
                r.value
            }
            Err(e) => {
                let prev = failure.take();
                failure.set(prev.or(Some(e)));
                0.0
            }
        },
        a,
        b,
        tol,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let outer = outer?;
    Ok(QuadratureResult {
        value: outer.value,
        abs_error_estimate: outer.abs_error_estimate + max_inner_err.get() * (b - a).abs(),
        subdivisions: outer.subdivisions + inner_subdivisions.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert_relative_eq!(r.value, 4.0, epsilon = 1e-14);
        assert_eq!(r.subdivisions, 0);
    }

    #[test]
    fn oscillatory_and_reversed_bounds() {
        let r = integrate(
            |x| (10.0 * x).sin(),
            0.0,
            std::f64::consts::PI,
            Tolerance::default(),
        )
        .unwrap();
        assert!(r.value.abs() < 1e-12);
        let r = integrate(|x| x.exp(), 1.0, 0.0, Tolerance::default()).unwrap();
        assert_relative_eq!(r.value, 1.0 - std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn endpoint_power_singularity_is_removed() {
        // ∫_0^1 x^{-0.8} dx = 5
        let r = integrate_power_weighted(|_| 1.0, 1.0, 0.2, Tolerance::default()).unwrap();
        assert_relative_eq!(r.value, 5.0, epsilon = 1e-11);
        // ∫_0^2 e^{-x} x^{-1/2} dx = sqrt(pi) * erf(sqrt 2)
        let r = integrate_power_weighted(|x| (-x).exp(), 2.0, 0.5, Tolerance::default()).unwrap();
        assert_relative_eq!(r.value, 1.691_806_732_945_198_2, epsilon = 1e-11);
    }

    #[test]
    fn interior_singularity_split() {
        // ∫_0^1 |x - 0.3|^{-1/2} dx = 2(sqrt(0.3) + sqrt(0.7))
        let r = integrate_singular_at(|_| 1.0, 0.0, 1.0, 0.3, 0.5, Tolerance::default()).unwrap();
        assert_relative_eq!(
            r.value,
            2.0 * (0.3f64.sqrt() + 0.7f64.sqrt()),
            epsilon = 1e-11
        );
        // singular point outside the interval
        let r = integrate_singular_at(|_| 1.0, 0.0, 1.0, 2.0, 0.5, Tolerance::default()).unwrap();
        assert_relative_eq!(r.value, 2.0 * (2f64.sqrt() - 1.0), epsilon = 1e-11);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let tol = Tolerance {
            abs: 1e-300,
            rel: 0.0,
            max_subdivisions: 5,
        };
        match integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, tol) {
            Err(Error::Quadrature { subdivisions, .. }) => assert_eq!(subdivisions, 5),
            other => panic!("expected quadrature failure, got {other:?}"),
        }
    }

    #[test]
    fn nested_matches_closed_form() {
        // ∫_0^1 ∫_0^1 (x + y) dy dx = 1
        let r = integrate_nested(
            |x| integrate(|y| x + y, 0.0, 1.0, Tolerance::default()),
            0.0,
            1.0,
            Tolerance::default(),
        )
        .unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-13);
    }
}
