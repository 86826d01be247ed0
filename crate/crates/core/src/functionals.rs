//! Integral functionals `I_T = ∫₀ᵀ f(X_t)² dt` along sampled paths and the
//! divergence-rate experiments built on them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::exec::Parallelism;
use crate::kernels::ProcessSpec;
use crate::simulate::{PathSampler, SamplePath};
use crate::stats::{self, LinearFit};
use crate::testfuncs::FunctionSpec;

/// `T₀·2^k` for `k = 0..count`.
pub fn dyadic_horizons(t0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t0 * 2f64.powi(k as i32)).collect()
}

/// Step used for a spec when the caller does not choose one: dense-matrix
/// samplers get a coarser grid to stay inside the memory guard.
pub fn default_dt(spec: &ProcessSpec) -> f64 {
    match spec {
        ProcessSpec::FractionalOu { .. } | ProcessSpec::TemperedStationary { .. } => 1.0 / 16.0,
        _ => 1.0 / 64.0,
    }
}

fn horizon_index(t: f64, dt: f64) -> Result<usize> {
    let k = (t / dt).round();
    precondition(t > 0.0 && (k * dt - t).abs() <= 1e-9 * t, || {
        format!("horizon {t} is not a positive multiple of dt={dt}")
    })?;
    Ok(k as usize)
}

/// Cumulative trapezoid integral of `f(x)²` over a path starting at `t = 0`,
/// read off at the grid indices `at` (increasing).
fn cumulative_at(values: &[f64], dt: f64, f: &FunctionSpec, at: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(at.len());
    let mut acc = 0.0;
    let mut prev = f.value(values[0]).powi(2);
    let mut next = at.iter().peekable();
    while next.peek() == Some(&&0) {
        out.push(0.0);
        next.next();
    }
    for (i, &x) in values.iter().enumerate().skip(1) {
        let cur = f.value(x).powi(2);
        acc += 0.5 * (prev + cur) * dt;
        prev = cur;
        while next.peek() == Some(&&i) {
            out.push(acc);
            next.next();
        }
        if next.peek().is_none() {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralSeries {
    pub horizons: Vec<f64>,
    pub values: Vec<f64>,
    pub f: FunctionSpec,
    pub spec: ProcessSpec,
    pub seed: u64,
    pub replicate: u64,
}

/// `I_T` at each horizon by the trapezoid rule on the path grid.
pub fn integral_functional(
    path: &SamplePath,
    f: &FunctionSpec,
    horizons: &[f64],
) -> Result<IntegralSeries> {
    precondition(path.t0 == 0.0, || {
        format!(
            "integral functionals start at t=0, path starts at {}",
            path.t0
        )
    })?;
    let idx = horizon_indices(horizons, path.dt)?;
    let last = *idx.last().unwrap();
    precondition(last < path.values.len(), || {
        format!(
            "path covers T={} but horizon {} was requested",
            path.time(path.values.len() - 1),
            horizons.last().unwrap()
        )
    })?;
    Ok(IntegralSeries {
        horizons: horizons.to_vec(),
        values: cumulative_at(&path.values, path.dt, f, &idx),
        f: f.clone(),
        spec: path.spec,
        seed: path.seed,
        replicate: path.replicate,
    })
}

fn horizon_indices(horizons: &[f64], dt: f64) -> Result<Vec<usize>> {
    precondition(!horizons.is_empty(), || "no horizons given".into())?;
    precondition(horizons.windows(2).all(|w| w[0] < w[1]), || {
        "horizons must be increasing".into()
    })?;
    horizons.iter().map(|&t| horizon_index(t, dt)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_range: (f64, f64),
}

/// OLS of `log I_T` on `log T`.
pub fn fit_rate(horizons: &[f64], values: &[f64]) -> Result<RateFit> {
    precondition(horizons.len() == values.len(), || {
        "horizons and values differ in length".into()
    })?;
    precondition(horizons.len() >= 5, || {
        format!(
            "a rate fit needs at least 5 horizons, got {}",
            horizons.len()
        )
    })?;
    if values.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::Degenerate(
            "log-log fit needs positive finite values".into(),
        ));
    }
    let x: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let LinearFit {
        slope,
        intercept,
        r_squared,
        ..
    } = stats::ols(&x, &y)?;
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        t_range: (horizons[0], *horizons.last().unwrap()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRun {
    pub replicates: usize,
    pub seed: u64,
    pub dt: f64,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub epsilon: f64,
    pub horizons: Vec<f64>,
    /// `I_T` per replicate and horizon.
    pub series: Vec<Vec<f64>>,
    /// Per replicate, `min_T T^{-1+ε} I_T`.
    pub min_scaled: Vec<f64>,
    /// Fit on the replicate-mean `I_T`.
    pub fit: RateFit,
    /// Median of the per-replicate slopes.
    pub median_replicate_slope: f64,
    /// Replicates whose scaled value at the last horizon beats the median horizon.
    pub final_exceeds_median: usize,
    /// Replicates with the scaled value increasing at every horizon past the median one.
    pub monotone_beyond_median: usize,
}

impl DivergenceReport {
    pub fn final_exceeds_fraction(&self) -> f64 {
        self.final_exceeds_median as f64 / self.series.len() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "T,I_T,replicate")?;
        for (r, s) in self.series.iter().enumerate() {
            for (t, v) in self.horizons.iter().zip(s) {
                writeln!(w, "{t},{v},{r}")?;
            }
        }
        Ok(())
    }
}

/// Finite surrogate for `T^{-1+ε} I_T → ∞`: replicate paths on `[0, T_max]`,
/// `I_T` at the horizons, per-replicate scaled growth and a log-log fit.
pub fn divergence_experiment(
    spec: &ProcessSpec,
    f: &FunctionSpec,
    epsilon: f64,
    horizons: &[f64],
    run: &DivergenceRun,
) -> Result<DivergenceReport> {
    precondition(epsilon > 0.0 && epsilon < 1.0, || {
        format!("ε must lie in (0,1), got {epsilon}")
    })?;
    precondition(run.replicates >= 1, || "need at least one replicate".into())?;
    let idx = horizon_indices(horizons, run.dt)?;
    precondition(horizons.len() >= 5, || {
        "a rate fit needs at least 5 horizons".into()
    })?;
    let sampler = PathSampler::new(*spec, 0.0, run.dt, *idx.last().unwrap(), None)?;
    let series = sampler.map_replicates(run.seed, run.replicates, run.parallelism, |_, values| {
        cumulative_at(values, run.dt, f, &idx)
    });

    let scale = |t: f64, v: f64| t.powf(epsilon - 1.0) * v;
    let mid = horizons.len() / 2;
    let last = horizons.len() - 1;
    let mut min_scaled = Vec::with_capacity(series.len());
    let mut final_exceeds_median = 0;
    let mut monotone_beyond_median = 0;
    let mut slopes = Vec::with_capacity(series.len());
    for s in &series {
        let scaled: Vec<f64> = horizons.iter().zip(s).map(|(&t, &v)| scale(t, v)).collect();
        min_scaled.push(scaled.iter().cloned().fold(f64::INFINITY, f64::min));
        if scaled[last] > scaled[mid] {
            final_exceeds_median += 1;
        }
        if scaled[mid..].windows(2).all(|w| w[1] > w[0]) {
            monotone_beyond_median += 1;
        }
        if let Ok(fit) = fit_rate(horizons, s) {
            slopes.push(fit.slope);
        }
    }
    let mean: Vec<f64> = (0..horizons.len())
        .map(|h| series.iter().map(|s| s[h]).sum::<f64>() / series.len() as f64)
        .collect();
    let fit = fit_rate(horizons, &mean)?;
    Ok(DivergenceReport {
        epsilon,
        horizons: horizons.to_vec(),
        series,
        min_scaled,
        fit,
        median_replicate_slope: if slopes.is_empty() {
            f64::NAN
        } else {
            stats::median(&slopes)
        },
        final_exceeds_median,
        monotone_beyond_median,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarReport {
    pub hurst: f64,
    pub p: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub ks: Vec<usize>,
    /// Per replicate, `k^{-β(1+ε)} ∫₀^{k^β} |X_t|^p dt` for each `k`.
    pub scaled: Vec<Vec<f64>>,
    pub minima: Vec<f64>,
    pub all_positive: bool,
    /// Replicates whose scaled values increase along `k`.
    pub growing: usize,
}

/// Lower-bound proxy for an `H`-self-similar FBM: the minimum over
/// `k ∈ [k_max/2, k_max]` of `k^{-β(1+ε)} ∫₀^{k^β} |X_t|^p dt`.
pub fn selfsimilar_lowerbound_experiment(
    hurst: f64,
    p: f64,
    epsilon: f64,
    beta: f64,
    k_max: usize,
    run: &DivergenceRun,
) -> Result<SelfSimilarReport> {
    let spec = ProcessSpec::Fbm { hurst };
    spec.validate()?;
    precondition(p > 0.0, || format!("p must be positive, got {p}"))?;
    precondition(epsilon > 0.0 && epsilon < p * hurst, || {
        format!("need 0 < ε < pH = {}, got ε = {epsilon}", p * hurst)
    })?;
    let beta_min = 1.0 / (hurst - epsilon / p);
    precondition(beta > beta_min, || {
        format!("need β > (H - ε/p)^(-1) = {beta_min}, got {beta}")
    })?;
    precondition(k_max >= 2, || "k_max must be at least 2".into())?;
    let ks: Vec<usize> = (k_max.div_ceil(2).max(1)..=k_max).collect();
    let t_max = (k_max as f64).powf(beta);
    let n = (t_max / run.dt).ceil() as usize;
    let sampler = PathSampler::new(spec, 0.0, run.dt, n, None)?;
    let scaled = sampler.map_replicates(run.seed, run.replicates, run.parallelism, |_, values| {
        // cumulative trapezoid, then linear interpolation at k^β
        let mut cum = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * (w[0].abs().powf(p) + w[1].abs().powf(p)) * run.dt;
            cum.push(acc);
        }
        ks.iter()
            .map(|&k| {
                let t = (k as f64).powf(beta);
                let pos = t / run.dt;
                let i = (pos.floor() as usize).min(cum.len() - 2);
                let frac = pos - i as f64;
                let integral = cum[i] + frac * (cum[i + 1] - cum[i]);
                (k as f64).powf(-beta * (1.0 + epsilon)) * integral
            })
            .collect::<Vec<f64>>()
    });
    let minima: Vec<f64> = scaled
        .iter()
        .map(|s| s.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect();
    let growing = scaled
        .iter()
        .filter(|s| s.windows(2).all(|w| w[1] > w[0]))
        .count();
    Ok(SelfSimilarReport {
        hurst,
        p,
        epsilon,
        beta,
        ks,
        all_positive: minima.iter().all(|&m| m > 0.0),
        scaled,
        minima,
        growing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicSummary {
    pub horizon: f64,
    /// `T⁻¹ I_T` per replicate.
    pub values: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
}

/// Distribution of `T⁻¹ I_T` across replicates for a stationary process.
pub fn ergodic_limit(
    spec: &ProcessSpec,
    f: &FunctionSpec,
    horizon: f64,
    run: &DivergenceRun,
) -> Result<ErgodicSummary> {
    precondition(spec.is_stationary() && spec.is_gaussian(), || {
        format!("ergodic limits need a stationary Gaussian process, got {spec}")
    })?;
    let n = horizon_index(horizon, run.dt)?;
    let sampler = PathSampler::new(*spec, 0.0, run.dt, n, None)?;
    let values = sampler.map_replicates(run.seed, run.replicates, run.parallelism, |_, path| {
        cumulative_at(path, run.dt, f, &[n])[0] / horizon
    });
    Ok(ErgodicSummary {
        horizon,
        mean: stats::mean(&values),
        variance: if values.len() > 1 {
            stats::variance(&values)
        } else {
            0.0
        },
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::sample_path;
    use approx::assert_relative_eq;

    #[test]
    fn constant_integrand_gives_horizon() {
        let path = sample_path(
            &ProcessSpec::StationaryOu { theta: 1.0 },
            0.0,
            1.0 / 64.0,
            64 * 16,
            3,
        )
        .unwrap();
        let s = integral_functional(
            &path,
            &FunctionSpec::constant(1.0),
            &dyadic_horizons(1.0, 5),
        )
        .unwrap();
        for (t, v) in s.horizons.iter().zip(&s.values) {
            assert_relative_eq!(*t, *v, max_relative = 1e-12);
        }
    }

    #[test]
    fn trapezoid_on_linear_path() {
        // x(t) = t, f(x) = x: ∫₀ᵀ t² dt = T³/3, trapezoid error T·dt²/6
        let dt = 1.0 / 64.0;
        let values: Vec<f64> = (0..=128).map(|i| i as f64 * dt).collect();
        let got = cumulative_at(&values, dt, &FunctionSpec::identity(), &[64, 128]);
        assert_relative_eq!(got[0], 1.0 / 3.0 + dt * dt / 6.0, max_relative = 1e-12);
        assert_relative_eq!(
            got[1],
            8.0 / 3.0 + 2.0 * dt * dt / 6.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn exact_power_law_slope() {
        let h = dyadic_horizons(1.0, 8);
        let v: Vec<f64> = h.iter().map(|t| t.powf(0.8)).collect();
        let fit = fit_rate(&h, &v).unwrap();
        assert_relative_eq!(fit.slope, 0.8, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scaling_f_shifts_intercept() {
        let h = dyadic_horizons(1.0, 6);
        let v: Vec<f64> = h.iter().map(|t| 0.3 * t.powf(1.2)).collect();
        let c = 3.0f64;
        let vc: Vec<f64> = v.iter().map(|x| c * c * x).collect();
        let a = fit_rate(&h, &v).unwrap();
        let b = fit_rate(&h, &vc).unwrap();
        assert_relative_eq!(b.slope, a.slope, epsilon = 1e-12);
        assert_relative_eq!(b.intercept - a.intercept, 2.0 * c.ln(), epsilon = 1e-12);
    }

    #[test]
    fn too_few_horizons_rejected() {
        assert!(fit_rate(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn selfsimilar_region_enforced() {
        let run = DivergenceRun {
            replicates: 1,
            seed: 0,
            dt: 1.0 / 64.0,
            parallelism: Parallelism::Sequential,
        };
        assert!(selfsimilar_lowerbound_experiment(0.5, 2.0, 1.0, 10.0, 4, &run).is_err());
        assert!(selfsimilar_lowerbound_experiment(0.5, 2.0, 0.5, 3.9, 4, &run).is_err());
    }

    #[test]
    fn ergodic_rejects_nonstationary() {
        let run = DivergenceRun {
            replicates: 1,
            seed: 0,
            dt: 1.0 / 64.0,
            parallelism: Parallelism::Sequential,
        };
        assert!(ergodic_limit(
            &ProcessSpec::Fbm { hurst: 0.5 },
            &FunctionSpec::square(),
            4.0,
            &run
        )
        .is_err());
        let one = ergodic_limit(
            &ProcessSpec::StationaryOu { theta: 1.0 },
            &FunctionSpec::constant(1.0),
            4.0,
            &run,
        )
        .unwrap();
        assert_relative_eq!(one.values[0], 1.0, max_relative = 1e-12);
    }
}
