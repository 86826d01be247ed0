//! Test functions `f` and grid checkers for the growth conditions on them.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::exec::{map_indexed, Parallelism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Poly,
    TrigCombo,
    Rational,
    X3SinInv,
    PeriodicSinCluster,
    AbsPow,
    Custom,
}

/// `a sin(α x) + b cos(β x)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub a: f64,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Custom {
    /// `exp(rate·x)`
    Exp {
        rate: f64,
    },
    Scaled {
        factor: f64,
        inner: Box<FunctionForm>,
    },
    Sum(Vec<FunctionForm>),
    Product(Vec<FunctionForm>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionForm {
    /// Coefficients in increasing degree.
    Poly(Vec<f64>),
    TrigCombo(Vec<TrigTerm>),
    Rational {
        num: Vec<f64>,
        den: Vec<f64>,
    },
    /// `x³ sin(1/x)`, zero at the origin.
    X3SinInv,
    /// `sin³x · sin(1/sin x)`, zero on `πℤ`.
    PeriodicSinCluster,
    /// `|x|^p`
    AbsPow {
        p: f64,
    },
    Custom(Custom),
}

/// `K`, `η*`, `C₀` of the window-growth and derivative conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A1Params {
    pub k: f64,
    pub eta_star: f64,
    pub c0: f64,
}

/// `|f(x)| >= Q|x|^p` for `|x| >= C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A1iiiParams {
    pub q: f64,
    pub p: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub form: FunctionForm,
    pub a1_params: Option<A1Params>,
    pub a1iii_params: Option<A1iiiParams>,
    /// Interval over which infima over `ℝ` are approximated.
    pub x_range: Option<(f64, f64)>,
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// Taylor coefficients `P^{(j)}(x)/j!` for `j = 0..=order`.
fn poly_taylor(c: &[f64], x: f64, order: usize) -> Vec<f64> {
    let mut work = c.to_vec();
    let mut out = Vec::with_capacity(order + 1);
    for _ in 0..=order {
        if work.is_empty() {
            out.push(0.0);
            continue;
        }
        // synthetic division by (y - x): remainder is the value
        let n = work.len();
        let mut q = vec![0.0; n.saturating_sub(1)];
        let mut acc = 0.0;
        for i in (0..n).rev() {
            acc = acc * x + work[i];
            if i > 0 {
                q[i - 1] = acc;
            }
        }
        out.push(acc);
        work = q;
    }
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl FunctionForm {
    pub fn kind(&self) -> FunctionKind {
        match self {
            FunctionForm::Poly(_) => FunctionKind::Poly,
            FunctionForm::TrigCombo(_) => FunctionKind::TrigCombo,
            FunctionForm::Rational { .. } => FunctionKind::Rational,
            FunctionForm::X3SinInv => FunctionKind::X3SinInv,
            FunctionForm::PeriodicSinCluster => FunctionKind::PeriodicSinCluster,
            FunctionForm::AbsPow { .. } => FunctionKind::AbsPow,
            FunctionForm::Custom(_) => FunctionKind::Custom,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            FunctionForm::Poly(c) => poly_eval(c, x),
            FunctionForm::TrigCombo(terms) => terms
                .iter()
                .map(|t| t.a * (t.alpha * x).sin() + t.b * (t.beta * x).cos())
                .sum(),
            FunctionForm::Rational { num, den } => poly_eval(num, x) / poly_eval(den, x),
            FunctionForm::X3SinInv => {
                if x == 0.0 {
                    0.0
                } else {
                    x.powi(3) * (1.0 / x).sin()
                }
            }
            FunctionForm::PeriodicSinCluster => {
                let s = x.sin();
                if s == 0.0 {
                    0.0
                } else {
                    s.powi(3) * (1.0 / s).sin()
                }
            }
            FunctionForm::AbsPow { p } => x.abs().powf(*p),
            FunctionForm::Custom(c) => match c {
                Custom::Exp { rate } => (rate * x).exp(),
                Custom::Scaled { factor, inner } => factor * inner.value(x),
                Custom::Sum(parts) => parts.iter().map(|p| p.value(x)).sum(),
                Custom::Product(parts) => parts.iter().map(|p| p.value(x)).product(),
            },
        }
    }

    /// `f^{(order)}(x)`; order 0 is the value.
    pub fn derivative(&self, order: usize, x: f64) -> Result<f64> {
        if order == 0 {
            return Ok(self.value(x));
        }
        match self {
            FunctionForm::Poly(c) => Ok(poly_taylor(c, x, order)[order] * factorial(order)),
            FunctionForm::TrigCombo(terms) => {
                let shift = order as f64 * FRAC_PI_2;
                Ok(terms
                    .iter()
                    .map(|t| {
                        t.a * t.alpha.powi(order as i32) * (t.alpha * x + shift).sin()
                            + t.b * t.beta.powi(order as i32) * (t.beta * x + shift).cos()
                    })
                    .sum())
            }
            FunctionForm::Rational { num, den } => {
                let n = poly_taylor(num, x, order);
                let d = poly_taylor(den, x, order);
                if d[0] == 0.0 {
                    return Err(Error::Precondition(format!(
                        "rational function has a pole at {x}"
                    )));
                }
                let mut q = vec![0.0; order + 1];
                for m in 0..=order {
                    let s: f64 = (1..=m).map(|i| d[i] * q[m - i]).sum();
                    q[m] = (n[m] - s) / d[0];
                }
                Ok(q[order] * factorial(order))
            }
            FunctionForm::X3SinInv if order == 1 => Ok(if x == 0.0 {
                0.0
            } else {
                3.0 * x * x * (1.0 / x).sin() - x * (1.0 / x).cos()
            }),
            FunctionForm::PeriodicSinCluster if order == 1 => {
                let s = x.sin();
                Ok(if s == 0.0 {
                    0.0
                } else {
                    x.cos() * (3.0 * s * s * (1.0 / s).sin() - s * (1.0 / s).cos())
                })
            }
            FunctionForm::AbsPow { p } if order == 1 => Ok(if x == 0.0 {
                if *p > 1.0 {
                    0.0
                } else {
                    return Err(Error::Derivative {
                        kind: "abs_pow",
                        order,
                    });
                }
            } else {
                p * x.abs().powf(p - 1.0) * x.signum()
            }),
            FunctionForm::X3SinInv => Err(Error::Derivative {
                kind: "x3_sin_inv",
                order,
            }),
            FunctionForm::PeriodicSinCluster => Err(Error::Derivative {
                kind: "periodic_sin_cluster",
                order,
            }),
            FunctionForm::AbsPow { .. } => Err(Error::Derivative {
                kind: "abs_pow",
                order,
            }),
            FunctionForm::Custom(c) => match c {
                Custom::Exp { rate } => Ok(rate.powi(order as i32) * (rate * x).exp()),
                Custom::Scaled { factor, inner } => Ok(factor * inner.derivative(order, x)?),
                Custom::Sum(parts) => parts.iter().map(|p| p.derivative(order, x)).sum(),
                Custom::Product(parts) => product_derivative(parts, order, x),
            },
        }
    }
}

fn product_derivative(parts: &[FunctionForm], order: usize, x: f64) -> Result<f64> {
    match parts {
        [] => Ok(if order == 0 { 1.0 } else { 0.0 }),
        [only] => only.derivative(order, x),
        [first, rest @ ..] => {
            let mut acc = 0.0;
            for i in 0..=order {
                acc += binomial(order, i)
                    * first.derivative(i, x)?
                    * product_derivative(rest, order - i, x)?;
            }
            Ok(acc)
        }
    }
}

impl FunctionSpec {
    pub fn new(form: FunctionForm) -> Self {
        FunctionSpec {
            form,
            a1_params: None,
            a1iii_params: None,
            x_range: None,
        }
    }

    pub fn kind(&self) -> FunctionKind {
        self.form.kind()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.form.value(x)
    }

    pub fn derivative(&self, order: usize, x: f64) -> Result<f64> {
        self.form.derivative(order, x)
    }

    /// `f(x) = x`
    pub fn identity() -> Self {
        FunctionSpec {
            a1_params: Some(A1Params {
                k: 2.0,
                eta_star: 0.5,
                c0: 1.0,
            }),
            x_range: Some((-4.0, 4.0)),
            ..Self::new(FunctionForm::Poly(vec![0.0, 1.0]))
        }
    }

    /// `f(x) = x²`
    pub fn square() -> Self {
        FunctionSpec {
            a1_params: Some(A1Params {
                k: 3.0,
                eta_star: 0.25,
                c0: 2.0,
            }),
            a1iii_params: Some(A1iiiParams {
                q: 1.0,
                p: 2.0,
                c: 1.0,
            }),
            x_range: Some((-4.0, 4.0)),
            ..Self::new(FunctionForm::Poly(vec![0.0, 0.0, 1.0]))
        }
    }

    /// `f(x) = sin x`, checked over one period.
    pub fn sine() -> Self {
        FunctionSpec {
            a1_params: Some(A1Params {
                k: 2.0,
                eta_star: 0.4,
                c0: 1.0,
            }),
            x_range: Some((0.0, 2.0 * PI)),
            ..Self::new(FunctionForm::TrigCombo(vec![TrigTerm {
                a: 1.0,
                alpha: 1.0,
                b: 0.0,
                beta: 0.0,
            }]))
        }
    }

    pub fn x3_sin_inv() -> Self {
        FunctionSpec {
            a1_params: Some(A1Params {
                k: 4.0,
                eta_star: 1.0 / 64.0,
                c0: 4.0,
            }),
            x_range: Some((-2.0, 2.0)),
            ..Self::new(FunctionForm::X3SinInv)
        }
    }

    /// Period `π`; checked over one period.
    pub fn periodic_sin_cluster() -> Self {
        FunctionSpec {
            a1_params: Some(A1Params {
                k: 4.0,
                eta_star: 1.0 / 64.0,
                c0: 4.0,
            }),
            x_range: Some((0.0, PI)),
            ..Self::new(FunctionForm::PeriodicSinCluster)
        }
    }

    /// `(x³ + 1)/(x² + 1)`
    pub fn rational() -> Self {
        FunctionSpec {
            a1_params: Some(A1Params {
                k: 2.0,
                eta_star: 0.5,
                c0: 3.0,
            }),
            x_range: Some((-3.0, 3.0)),
            ..Self::new(FunctionForm::Rational {
                num: vec![1.0, 0.0, 0.0, 1.0],
                den: vec![1.0, 0.0, 1.0],
            })
        }
    }

    /// `|x|^{3/2}`
    pub fn abs_pow() -> Self {
        FunctionSpec {
            a1_params: Some(A1Params {
                k: 2.0,
                eta_star: 0.125,
                c0: 1.5,
            }),
            a1iii_params: Some(A1iiiParams {
                q: 0.9,
                p: 1.5,
                c: 2.0,
            }),
            x_range: Some((-4.0, 4.0)),
            ..Self::new(FunctionForm::AbsPow { p: 1.5 })
        }
    }

    /// `e^x`
    pub fn exp() -> Self {
        FunctionSpec {
            x_range: Some((-20.0, 0.0)),
            ..Self::new(FunctionForm::Custom(Custom::Exp { rate: 1.0 }))
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(FunctionForm::Poly(vec![c]))
    }

    pub fn builtins() -> Vec<(&'static str, FunctionSpec)> {
        vec![
            ("identity", Self::identity()),
            ("square", Self::square()),
            ("sine", Self::sine()),
            ("x3_sin_inv", Self::x3_sin_inv()),
            ("periodic_sin_cluster", Self::periodic_sin_cluster()),
            ("rational", Self::rational()),
            ("abs_pow", Self::abs_pow()),
        ]
    }

    /// `c·f`
    pub fn scaled(&self, factor: f64) -> Self {
        FunctionSpec {
            form: FunctionForm::Custom(Custom::Scaled {
                factor,
                inner: Box::new(self.form.clone()),
            }),
            a1_params: None,
            a1iii_params: None,
            x_range: self.x_range,
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for FunctionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionForm::Poly(c) => write!(f, "poly:{}", join(c)),
            FunctionForm::TrigCombo(terms) => {
                let flat: Vec<f64> = terms
                    .iter()
                    .flat_map(|t| [t.a, t.alpha, t.b, t.beta])
                    .collect();
                write!(f, "trig:{}", join(&flat))
            }
            FunctionForm::Rational { num, den } => {
                write!(f, "rational:{}/{}", join(num), join(den))
            }
            FunctionForm::X3SinInv => write!(f, "x3sininv"),
            FunctionForm::PeriodicSinCluster => write!(f, "sincluster"),
            FunctionForm::AbsPow { p } => write!(f, "abspow:{p}"),
            FunctionForm::Custom(Custom::Exp { rate }) => write!(f, "exp:{rate}"),
            FunctionForm::Custom(Custom::Scaled { factor, inner }) => {
                write!(f, "scaled:{factor}*{inner}")
            }
            FunctionForm::Custom(Custom::Sum(parts)) => {
                write!(
                    f,
                    "sum({})",
                    parts
                        .iter()
                        .map(|p| p.to_string())
                        .collect::<Vec<_>>()
                        .join(";")
                )
            }
            FunctionForm::Custom(Custom::Product(parts)) => {
                write!(
                    f,
                    "product({})",
                    parts
                        .iter()
                        .map(|p| p.to_string())
                        .collect::<Vec<_>>()
                        .join(";")
                )
            }
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.form.fmt(f)
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Precondition(format!("cannot parse coefficient '{t}'")))
        })
        .collect()
}

impl FromStr for FunctionSpec {
    type Err = Error;

    /// Accepts `poly:c0,c1,..`, `trig:a,α,b,β[,..]`, `rational:num/den`,
    /// `x3sininv`, `sincluster`, `abspow:p`, `exp:rate` and the built-in
    /// names. Built-ins carry their declared constants.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((_, spec)) = FunctionSpec::builtins().into_iter().find(|(n, _)| *n == s) {
            return Ok(spec);
        }
        let (head, body) = s.split_once(':').unwrap_or((s, ""));
        let form = match head {
            "poly" => FunctionForm::Poly(parse_list(body)?),
            "trig" => {
                let v = parse_list(body)?;
                if v.is_empty() || v.len() % 4 != 0 {
                    return Err(Error::Precondition(
                        "trig needs groups of four numbers a,α,b,β".into(),
                    ));
                }
                FunctionForm::TrigCombo(
                    v.chunks(4)
                        .map(|c| TrigTerm {
                            a: c[0],
                            alpha: c[1],
                            b: c[2],
                            beta: c[3],
                        })
                        .collect(),
                )
            }
            "rational" => {
                let (n, d) = body.split_once('/').ok_or_else(|| {
                    Error::Precondition("rational needs num/den coefficient lists".into())
                })?;
                FunctionForm::Rational {
                    num: parse_list(n)?,
                    den: parse_list(d)?,
                }
            }
            "x3sininv" => return Ok(FunctionSpec::x3_sin_inv()),
            "sincluster" => return Ok(FunctionSpec::periodic_sin_cluster()),
            "abspow" => FunctionForm::AbsPow {
                p: parse_list(body)?.first().copied().unwrap_or(1.0),
            },
            "exp" => FunctionForm::Custom(Custom::Exp {
                rate: parse_list(body)?.first().copied().unwrap_or(1.0),
            }),
            _ => {
                return Err(Error::Precondition(format!(
                    "unknown function kind '{head}'"
                )))
            }
        };
        // attach declared constants when the form matches a built-in
        for (_, b) in FunctionSpec::builtins() {
            if b.form == form {
                return Ok(b);
            }
        }
        Ok(FunctionSpec::new(form))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Initial number of sub-steps per window.
    pub ny: usize,
    /// Refinement stops at this many sub-steps per window.
    pub max_ny: usize,
    /// Cap on grid points per evaluation; windows get fewer sub-steps beyond it.
    pub max_points: usize,
    /// Relative change below which refinement stops.
    pub rel_change: f64,
    pub parallelism: Parallelism,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            ny: 512,
            max_ny: 8192,
            max_points: 1 << 22,
            rel_change: 0.01,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowInf {
    pub value: f64,
    /// Centre of the minimizing window.
    pub witness: f64,
    pub ny: usize,
}

#[derive(Clone, Copy)]
enum Extreme {
    Max,
    Min,
}

/// For each window of `w + 1` consecutive samples starting at an index in
/// `starts`, the window max (or min); returns the smallest (or, for
/// `Min`, the per-start values). Processed in parallel chunks.
fn sliding(
    values: &[f64],
    w: usize,
    starts: std::ops::Range<usize>,
    ext: Extreme,
    mode: Parallelism,
) -> Vec<f64> {
    const CHUNK: usize = 1 << 16;
    let total = starts.len();
    let chunks = total.div_ceil(CHUNK);
    let parts = map_indexed(chunks, mode, |c| {
        let lo = starts.start + c * CHUNK;
        let hi = (lo + CHUNK).min(starts.end);
        let better = |a: f64, b: f64| match ext {
            Extreme::Max => a >= b,
            Extreme::Min => a <= b,
        };
        let mut dq: VecDeque<usize> = VecDeque::new();
        let mut out = Vec::with_capacity(hi - lo);
        for k in lo..hi + w {
            while let Some(&back) = dq.back() {
                if better(values[k], values[back]) {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(k);
            if k >= lo + w {
                let start = k - w;
                while dq.front().is_some_and(|&f| f < start) {
                    dq.pop_front();
                }
                out.push(values[*dq.front().unwrap()]);
            }
        }
        out
    });
    parts.into_iter().flatten().collect()
}

fn abs_samples(
    f: &FunctionSpec,
    order: usize,
    lo: f64,
    h: f64,
    n: usize,
    mode: Parallelism,
) -> Result<Vec<f64>> {
    const CHUNK: usize = 1 << 16;
    let parts = map_indexed(n.div_ceil(CHUNK), mode, |c| {
        let a = c * CHUNK;
        let b = (a + CHUNK).min(n);
        (a..b)
            .map(|k| f.derivative(order, lo + k as f64 * h).map(f64::abs))
            .collect::<Result<Vec<f64>>>()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn check_range(x_range: (f64, f64)) -> Result<()> {
    precondition(
        x_range.0 < x_range.1 && x_range.0.is_finite() && x_range.1.is_finite(),
        || format!("x_range must be a finite non-empty interval, got {x_range:?}"),
    )
}

/// Resolution check: variation of `f` between adjacent samples stays below
/// 10% of `max|f|`, through the declared `C₀` when present.
fn resolution_check(f: &FunctionSpec, values: &[f64], h: f64, reach: f64) -> Result<()> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(());
    }
    let step = match f.a1_params {
        Some(p) => h * p.c0 * (1.0 + reach).powf(p.c0),
        None => values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max),
    };
    if step > 0.1 * max {
        return Err(Error::GridTooCoarse(format!(
            "adjacent samples may differ by {step:e}, above 10% of max|f| = {max:e}"
        )));
    }
    Ok(())
}

/// Infimum over windows of length `η` of `sup|f|`, one resolution.
/// `margin` windows start in `[lo - margin, hi]`.
fn window_inf_once(
    f: &FunctionSpec,
    eta: f64,
    x_range: (f64, f64),
    margin: f64,
    ny: usize,
    grid: &GridConfig,
) -> Result<WindowInf> {
    let (lo, hi) = x_range;
    let span = hi - lo + margin + eta;
    let ny = ny.min(((grid.max_points as f64) * eta / span).floor().max(8.0) as usize);
    let h = eta / ny as f64;
    let start = lo - margin;
    let n_starts = ((hi - start) / h).floor() as usize + 1;
    let n = n_starts + ny;
    let values = abs_samples(f, 0, start, h, n, grid.parallelism)?;
    resolution_check(f, &values, h, lo.abs().max(hi.abs()) + eta)?;
    let maxima = sliding(&values, ny, 0..n_starts, Extreme::Max, grid.parallelism);
    let (idx, value) =
        maxima.iter().enumerate().fold(
            (0, f64::INFINITY),
            |best, (i, &v)| if v < best.1 { (i, v) } else { best },
        );
    Ok(WindowInf {
        value,
        witness: start + idx as f64 * h + eta / 2.0,
        ny,
    })
}

fn window_inf(
    f: &FunctionSpec,
    eta: f64,
    x_range: (f64, f64),
    margin: f64,
    grid: &GridConfig,
) -> Result<WindowInf> {
    check_range(x_range)?;
    precondition(eta > 0.0, || format!("η must be positive, got {eta}"))?;
    let mut ny = grid.ny.max(8);
    let mut current = window_inf_once(f, eta, x_range, margin, ny, grid)?;
    while ny < grid.max_ny {
        ny *= 2;
        let next = window_inf_once(f, eta, x_range, margin, ny, grid)?;
        if next.ny == current.ny {
            break;
        }
        let change = (next.value - current.value).abs();
        current = next;
        if change <= grid.rel_change * current.value.abs() {
            break;
        }
    }
    Ok(current)
}

/// `K(η) = inf_x min_{H±} sup_{y∈H±(x,η)} |f(y)|` for `x ∈ x_range`.
pub fn k_of_eta(
    f: &FunctionSpec,
    eta: f64,
    x_range: (f64, f64),
    grid: &GridConfig,
) -> Result<WindowInf> {
    window_inf(f, eta, x_range, eta, grid)
}

/// `K₂(η) = inf_x sup_{y∈(x,x+η)} |f(y)|` for `x ∈ x_range`.
pub fn k2_of_eta(
    f: &FunctionSpec,
    eta: f64,
    x_range: (f64, f64),
    grid: &GridConfig,
) -> Result<WindowInf> {
    window_inf(f, eta, x_range, 0.0, grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1Report {
    pub k: f64,
    pub eta_star: f64,
    pub eta_grid: Vec<f64>,
    pub k_of_eta: Vec<f64>,
    pub passes: bool,
    /// Centre of the window attaining the smallest `K(η)/η^K`.
    pub witness_x: f64,
}

/// `η*·2^{-i}` scaled just inside the open interval.
pub fn default_eta_grid(eta_star: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| 0.99 * eta_star / 2f64.powi(i as i32))
        .collect()
}

/// Checks `K(η) >= η^K` on `η ∈ (0, η*)`.
pub fn check_a1i(
    f: &FunctionSpec,
    k: f64,
    eta_star: f64,
    x_range: (f64, f64),
    grid: &GridConfig,
) -> Result<A1Report> {
    precondition(k > 0.0 && eta_star > 0.0, || {
        "K and η* must be positive".into()
    })?;
    let eta_grid = default_eta_grid(eta_star, 6);
    let mut values = Vec::with_capacity(eta_grid.len());
    let mut worst = (f64::INFINITY, 0.0);
    for &eta in &eta_grid {
        let r = k_of_eta(f, eta, x_range, grid)?;
        let ratio = r.value / eta.powf(k);
        if ratio < worst.0 {
            worst = (ratio, r.witness);
        }
        values.push(r.value);
    }
    let passes = eta_grid.iter().zip(&values).all(|(&e, &v)| v >= e.powf(k));
    Ok(A1Report {
        k,
        eta_star,
        eta_grid,
        k_of_eta: values,
        passes,
        witness_x: worst.1,
    })
}

/// Uses the declared constants and range of a built-in.
pub fn check_a1i_declared(f: &FunctionSpec, grid: &GridConfig) -> Result<A1Report> {
    let p = f
        .a1_params
        .ok_or_else(|| Error::Precondition(format!("{f} has no declared K, η*")))?;
    let range = f
        .x_range
        .ok_or_else(|| Error::Precondition(format!("{f} has no declared x_range")))?;
    check_a1i(f, p.k, p.eta_star, range, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub eta: f64,
    pub k2: f64,
    pub k_half: f64,
    pub k: f64,
    /// `K₂(η) >= K(η/2)`
    pub holds: bool,
}

pub fn check_lemma1_equivalences(
    f: &FunctionSpec,
    eta: f64,
    x_range: (f64, f64),
    grid: &GridConfig,
) -> Result<Lemma1Report> {
    let k2 = k2_of_eta(f, eta, x_range, grid)?.value;
    let k_half = k_of_eta(f, eta / 2.0, x_range, grid)?.value;
    let k = k_of_eta(f, eta, x_range, grid)?.value;
    // grid sup is a lower estimate; allow one part in 10⁹ of rounding
    Ok(Lemma1Report {
        eta,
        k2,
        k_half,
        k,
        holds: k2 >= k_half * (1.0 - 1e-9),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ineq5Report {
    /// `inf_x max_{i<=d} inf_{y∈[x,x+η₀]} |f^{(i)}(y)|`
    pub value: f64,
    pub witness_x: f64,
    pub holds: bool,
    pub k_prime: f64,
    pub eta_star_prime: f64,
    pub a1: Option<A1Report>,
}

/// Sufficient condition through derivatives; when it holds, the window
/// condition is checked with the constants it implies:
/// `K' = d + 1`, `η*' = min(η₀/4^d, δ/2^d, 1)`.
pub fn check_ineq5(
    f: &FunctionSpec,
    d: usize,
    eta0: f64,
    delta: f64,
    x_range: (f64, f64),
    grid: &GridConfig,
) -> Result<Ineq5Report> {
    check_range(x_range)?;
    precondition(eta0 > 0.0 && delta > 0.0, || {
        "η₀ and δ must be positive".into()
    })?;
    let (lo, hi) = x_range;
    let ny = grid.ny.max(8);
    let h = eta0 / ny as f64;
    let n_starts = ((hi - lo) / h).floor() as usize + 1;
    let n = n_starts + ny;
    let mut best = vec![0.0f64; n_starts];
    for order in 0..=d {
        let values = abs_samples(f, order, lo, h, n, grid.parallelism)?;
        let minima = sliding(&values, ny, 0..n_starts, Extreme::Min, grid.parallelism);
        for (b, m) in best.iter_mut().zip(minima) {
            *b = b.max(m);
        }
    }
    let (idx, value) =
        best.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
        );
    let holds = value >= delta;
    let k_prime = d as f64 + 1.0;
    let eta_star_prime = (eta0 / 4f64.powi(d as i32))
        .min(delta / 2f64.powi(d as i32))
        .min(1.0);
    let a1 = if holds {
        Some(check_a1i(f, k_prime, eta_star_prime, x_range, grid)?)
    } else {
        None
    };
    Ok(Ineq5Report {
        value,
        witness_x: lo + idx as f64 * h,
        holds,
        k_prime,
        eta_star_prime,
        a1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub holds: bool,
    /// Worst ratio of the two sides and where it occurs.
    pub worst_ratio: f64,
    pub worst_x: f64,
}

fn grid_points(x_range: (f64, f64), points: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = x_range;
    let h = (hi - lo) / (points - 1) as f64;
    (0..points).map(move |k| lo + k as f64 * h)
}

/// `|f(x)| >= Q|x|^p` at grid points with `|x| >= C`.
pub fn check_a1iii(
    f: &FunctionSpec,
    q: f64,
    p: f64,
    c: f64,
    x_range: (f64, f64),
) -> Result<PointwiseReport> {
    check_range(x_range)?;
    precondition(x_range.0 < -c && x_range.1 > c, || {
        format!("x_range must extend beyond ±{c}")
    })?;
    let mut worst = (f64::INFINITY, 0.0);
    for x in grid_points(x_range, 200_001).filter(|x| x.abs() >= c) {
        let ratio = f.value(x).abs() / (q * x.abs().powf(p));
        if ratio < worst.0 {
            worst = (ratio, x);
        }
    }
    Ok(PointwiseReport {
        holds: worst.0 >= 1.0 - 1e-12,
        worst_ratio: worst.0,
        worst_x: worst.1,
    })
}

/// `|f'(x)| <= C₀(1+|x|)^{C₀}` on a grid.
pub fn check_a1ii(
    f: &FunctionSpec,
    c0: f64,
    x_range: (f64, f64),
    points: usize,
) -> Result<PointwiseReport> {
    check_range(x_range)?;
    precondition(points >= 2, || "need at least two grid points".into())?;
    let mut worst = (0.0f64, 0.0);
    for x in grid_points(x_range, points) {
        let ratio = f.derivative(1, x)?.abs() / (c0 * (1.0 + x.abs()).powf(c0));
        if ratio > worst.0 {
            worst = (ratio, x);
        }
    }
    Ok(PointwiseReport {
        holds: worst.0 <= 1.0 + 1e-12,
        worst_ratio: worst.0,
        worst_x: worst.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coarse() -> GridConfig {
        GridConfig {
            ny: 256,
            max_ny: 1024,
            ..Default::default()
        }
    }

    #[test]
    fn poly_derivatives() {
        let f = FunctionForm::Poly(vec![1.0, -2.0, 0.0, 3.0]);
        assert_relative_eq!(f.derivative(1, 2.0).unwrap(), -2.0 + 9.0 * 4.0);
        assert_relative_eq!(f.derivative(2, 2.0).unwrap(), 18.0 * 2.0);
        assert_relative_eq!(f.derivative(3, 2.0).unwrap(), 18.0);
        assert_eq!(f.derivative(4, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn rational_derivative_matches_quotient_rule() {
        let f = FunctionSpec::rational();
        let x = 0.7f64;
        let num = x.powi(3) + 1.0;
        let den = x * x + 1.0;
        let d1 = (3.0 * x * x * den - num * 2.0 * x) / (den * den);
        assert_relative_eq!(f.derivative(1, x).unwrap(), d1, max_relative = 1e-13);
        // second derivative by central difference of the first
        let h = 1e-5;
        let fd = (f.derivative(1, x + h).unwrap() - f.derivative(1, x - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(f.derivative(2, x).unwrap(), fd, max_relative = 1e-7);
    }

    #[test]
    fn trig_and_product_derivatives() {
        let s = FunctionSpec::sine();
        assert_relative_eq!(
            s.derivative(3, 0.3).unwrap(),
            -(0.3f64).cos(),
            max_relative = 1e-14
        );
        let p = FunctionForm::Custom(Custom::Product(vec![
            FunctionForm::Poly(vec![0.0, 1.0]),
            FunctionForm::Custom(Custom::Exp { rate: 2.0 }),
        ]));
        // (x e^{2x})'' = (4 + 4x) e^{2x}
        assert_relative_eq!(
            p.derivative(2, 0.5).unwrap(),
            6.0 * 1f64.exp(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn limited_derivatives_report_errors() {
        assert!(matches!(
            FunctionSpec::x3_sin_inv().derivative(2, 0.1),
            Err(Error::Derivative { .. })
        ));
        assert!(FunctionSpec::abs_pow().derivative(1, -1.0).is_ok());
        assert_eq!(FunctionSpec::x3_sin_inv().value(0.0), 0.0);
        assert_eq!(FunctionSpec::periodic_sin_cluster().value(0.0), 0.0);
    }

    #[test]
    fn parse_round_trip() {
        let f: FunctionSpec = "poly:0,0,1".parse().unwrap();
        assert_eq!(f, FunctionSpec::square());
        let r: FunctionSpec = "rational:1,0,0,1/1,0,1".parse().unwrap();
        assert_eq!(r, FunctionSpec::rational());
        let t: FunctionSpec = "trig:1,1,2,1".parse().unwrap();
        assert_eq!(t.to_string(), "trig:1,1,2,1");
        assert!("nope:1".parse::<FunctionSpec>().is_err());
        assert!("trig:1,2".parse::<FunctionSpec>().is_err());
    }

    #[test]
    fn identity_window_infimum() {
        let r = k_of_eta(&FunctionSpec::identity(), 0.1, (-1.0, 1.0), &coarse()).unwrap();
        assert_relative_eq!(r.value, 0.05, max_relative = 1e-2);
        assert!(r.witness.abs() < 1e-2);
    }

    #[test]
    fn constant_is_flat() {
        let f = FunctionSpec::constant(1.0);
        for &eta in &[0.01, 0.3] {
            assert_eq!(
                k_of_eta(&f, eta, (-1.0, 1.0), &coarse()).unwrap().value,
                1.0
            );
        }
    }

    #[test]
    fn sliding_matches_brute_force() {
        let v: Vec<f64> = (0..500).map(|i| ((i * 7919) % 101) as f64).collect();
        let got = sliding(&v, 9, 0..491, Extreme::Max, Parallelism::Sequential);
        for (s, g) in got.iter().enumerate() {
            let want = v[s..=s + 9].iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(*g, want);
        }
    }
}
