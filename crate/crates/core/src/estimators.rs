//! Drift estimators for an OU-type equation with time-varying diffusion and
//! for a model driven by fractional noise, with their simulation harnesses.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::exec::{map_indexed, Parallelism};
use crate::kernels::ProcessSpec;
use crate::rng::{derive_seed, replicate_rng};
use crate::simulate::{PathSampler, SamplePath};
use crate::stats;
use crate::testfuncs::{check_a1i_declared, FunctionSpec, GridConfig};

/// Diffusion coefficient `g(s)` with declared bounds `lower <= |g| <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diffusion {
    pub g: FunctionSpec,
    pub lower: f64,
    pub upper: f64,
}

impl Diffusion {
    pub fn constant(c: f64) -> Self {
        Diffusion {
            g: FunctionSpec::constant(c),
            lower: c.abs(),
            upper: c.abs(),
        }
    }

    /// `1 + ½ sin s`, within `[1/2, 3/2]`.
    pub fn oscillating() -> Self {
        Diffusion {
            g: "trig:0.5,1,1,0".parse().expect("static function"),
            lower: 0.5,
            upper: 1.5,
        }
    }

    /// Grid check of the declared bounds on `[0, horizon]`. A zero lower
    /// bound is accepted only for the noise-free `g ≡ 0`.
    pub fn check(&self, horizon: f64, dt: f64) -> Result<()> {
        precondition(self.lower >= 0.0 && self.lower <= self.upper, || {
            format!(
                "diffusion bounds must satisfy 0 <= c <= C, got c={} C={}",
                self.lower, self.upper
            )
        })?;
        precondition(self.lower > 0.0 || self.upper == 0.0, || {
            "diffusion lower bound must be positive".into()
        })?;
        let n = (horizon / dt).ceil() as usize;
        for i in 0..=n {
            let s = i as f64 * dt;
            let g = self.g.value(s).abs();
            if g < self.lower * (1.0 - 1e-12) || g > self.upper * (1.0 + 1e-12) {
                return Err(Error::Precondition(format!(
                    "|g({s})| = {g} violates declared bounds [{}, {}]",
                    self.lower, self.upper
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OUModelConfig {
    pub theta: f64,
    pub g: Diffusion,
    pub y0: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl OUModelConfig {
    pub fn new(theta: f64, g: Diffusion, horizon: f64) -> Self {
        OUModelConfig {
            theta,
            g,
            y0: 0.0,
            horizon,
            dt: 0.01,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        precondition(self.theta > 0.0 && self.theta.is_finite(), || {
            format!("θ must be positive, got {}", self.theta)
        })?;
        precondition(self.horizon > 0.0 && self.dt > 0.0, || {
            "horizon and dt must be positive".into()
        })?;
        precondition(self.theta * self.dt < 0.1, || {
            format!("θ·dt = {} must stay below 0.1", self.theta * self.dt)
        })?;
        self.g.check(self.horizon, self.dt)
    }
}

fn euler_maruyama(
    cfg: &OUModelConfig,
    dt: f64,
    n: usize,
    mut noise: impl FnMut() -> f64,
) -> Vec<f64> {
    let mut y = cfg.y0;
    let mut out = Vec::with_capacity(n + 1);
    out.push(y);
    let sq = dt.sqrt();
    for k in 0..n {
        let s = k as f64 * dt;
        y += -cfg.theta * y * dt + cfg.g.g.value(s) * sq * noise();
        out.push(y);
    }
    out
}

/// Euler–Maruyama path of `dY = -θY dt + g(t) dW`. The drift is
/// state-dependent and the diffusion time-varying, so there is no exact
/// sampler for this model.
pub fn simulate_ou_model(cfg: &OUModelConfig, seed: u64, replicate: u64) -> Result<SamplePath> {
    cfg.validate()?;
    let mut rng = replicate_rng(seed, replicate);
    let values = euler_maruyama(cfg, cfg.dt, cfg.steps(), || rng.sample(StandardNormal));
    Ok(SamplePath {
        spec: ProcessSpec::StationaryOu { theta: cfg.theta },
        t0: 0.0,
        dt: cfg.dt,
        values,
        seed,
        replicate,
    })
}

/// `θ̂ = -Σ Y_k (Y_{k+1} - Y_k) / Σ Y_k² dt`, left-point sums.
pub fn ou_drift_estimate(values: &[f64], dt: f64) -> Result<f64> {
    precondition(values.len() >= 2, || {
        "the estimator needs at least two points".into()
    })?;
    let mut num = 0.0;
    let mut den = 0.0;
    for w in values.windows(2) {
        num += w[0] * (w[1] - w[0]);
        den += w[0] * w[0] * dt;
    }
    if den == 0.0 {
        return Err(Error::Degenerate("Σ Y² dt vanishes".into()));
    }
    Ok(-num / den)
}

pub fn ou_drift_estimator(path: &SamplePath) -> Result<f64> {
    ou_drift_estimate(&path.values, path.dt)
}

/// Estimates at `dt` and `dt/2` driven by the same Brownian path; their gap
/// measures the discretization bias.
pub fn ou_half_step_check(cfg: &OUModelConfig, seed: u64) -> Result<(f64, f64)> {
    cfg.validate()?;
    let n = cfg.steps();
    let half = cfg.dt / 2.0;
    let mut rng = replicate_rng(seed, 0);
    let fine_noise: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
    let mut it = fine_noise.iter();
    let fine = euler_maruyama(cfg, half, 2 * n, || *it.next().unwrap());
    let mut pairs = fine_noise.chunks(2);
    let coarse = euler_maruyama(cfg, cfg.dt, n, || {
        let p = pairs.next().unwrap();
        (p[0] + p[1]) / std::f64::consts::SQRT_2
    });
    Ok((
        ou_drift_estimate(&coarse, cfg.dt)?,
        ou_drift_estimate(&fine, half)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub replicate: u64,
    pub theta_hat: f64,
    /// For the fractional model: `X₀/I`; zero otherwise.
    pub x0_term: f64,
    /// For the fractional model: `B_T^H/I`; otherwise `θ̂ - θ`.
    pub noise_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub theta: f64,
    pub seed: u64,
    pub records: Vec<EstimateRecord>,
    pub median_abs_error: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl EstimatorSummary {
    fn new(theta: f64, seed: u64, records: Vec<EstimateRecord>) -> Self {
        let est: Vec<f64> = records.iter().map(|r| r.theta_hat).collect();
        let err: Vec<f64> = est.iter().map(|e| (e - theta).abs()).collect();
        EstimatorSummary {
            theta,
            seed,
            median_abs_error: stats::median(&err),
            q25: stats::quantile(&est, 0.25),
            median: stats::median(&est),
            q75: stats::quantile(&est, 0.75),
            records,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "seed,replicate,theta_hat,x0_term,noise_term")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.seed, r.replicate, r.theta_hat, r.x0_term, r.noise_term
            )?;
        }
        Ok(())
    }
}

/// Replicates `0..replicates` of the OU estimator; replicate `r` of a given
/// seed is the same path for every horizon, so horizons can be paired.
pub fn ou_consistency_experiment(
    cfg: &OUModelConfig,
    replicates: usize,
    seed: u64,
    mode: Parallelism,
) -> Result<EstimatorSummary> {
    cfg.validate()?;
    let records = map_indexed(replicates, mode, |r| -> Result<EstimateRecord> {
        let path = simulate_ou_model(cfg, seed, r as u64)?;
        let theta_hat = ou_drift_estimator(&path)?;
        Ok(EstimateRecord {
            replicate: r as u64,
            theta_hat,
            x0_term: 0.0,
            noise_term: theta_hat - cfg.theta,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(EstimatorSummary::new(cfg.theta, seed, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FracModelConfig {
    pub theta: f64,
    pub hurst: f64,
    /// `g = f²`.
    pub f: FunctionSpec,
    pub driver: ProcessSpec,
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    /// Exponent in the diagnostics `B_T^H/T^{H+ε}` and `I/T^{H+ε}`.
    pub epsilon: f64,
}

impl FracModelConfig {
    pub fn validate(&self) -> Result<()> {
        precondition(self.theta.is_finite(), || "θ must be finite".into())?;
        precondition(self.hurst > 0.0 && self.hurst < 1.0, || {
            format!("H must lie in (0,1), got {}", self.hurst)
        })?;
        precondition(self.horizon > 0.0 && self.dt > 0.0, || {
            "horizon and dt must be positive".into()
        })?;
        precondition(
            matches!(
                self.driver,
                ProcessSpec::StationaryOu { .. }
                    | ProcessSpec::PeriodicBridge
                    | ProcessSpec::FractionalOu { .. }
            ),
            || format!("driver must be ou, bridge or fou, got {}", self.driver),
        )?;
        self.driver.validate()
    }

    /// Validation plus the window-growth check on `f` with its declared constants.
    pub fn validate_function(&self) -> Result<()> {
        let report = check_a1i_declared(&self.f, &GridConfig::default())?;
        if !report.passes {
            return Err(Error::Inadmissible(format!(
                "{} fails the window-growth condition",
                self.f
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracEstimate {
    pub theta_hat: f64,
    pub x_t: f64,
    pub b_t: f64,
    /// `∫₀ᵀ g(Y_s) ds` by the trapezoid rule.
    pub integral: f64,
    pub x0_term: f64,
    pub noise_term: f64,
    pub b_over_t_pow: f64,
    pub integral_over_t_pow: f64,
}

/// `Y` and `B^H` are drawn from unrelated streams, so they are independent.
fn frac_one(cfg: &FracModelConfig, y: &[f64], b_t: f64) -> Result<FracEstimate> {
    let mut integral = 0.0;
    let mut prev = cfg.f.value(y[0]).powi(2);
    for &v in &y[1..] {
        let cur = cfg.f.value(v).powi(2);
        integral += 0.5 * (prev + cur) * cfg.dt;
        prev = cur;
    }
    if integral == 0.0 {
        return Err(Error::Degenerate("∫ g(Y) ds vanishes".into()));
    }
    let x_t = cfg.x0 + cfg.theta * integral + b_t;
    let scale = cfg.horizon.powf(cfg.hurst + cfg.epsilon);
    Ok(FracEstimate {
        theta_hat: x_t / integral,
        x_t,
        b_t,
        integral,
        x0_term: cfg.x0 / integral,
        noise_term: b_t / integral,
        b_over_t_pow: b_t / scale,
        integral_over_t_pow: integral / scale,
    })
}

fn frac_sampler(cfg: &FracModelConfig) -> Result<PathSampler> {
    cfg.validate()?;
    let n = (cfg.horizon / cfg.dt).round() as usize;
    PathSampler::new(cfg.driver, 0.0, cfg.dt, n, None)
}

fn frac_noise(cfg: &FracModelConfig, seed: u64, replicate: u64) -> f64 {
    let mut rng = replicate_rng(derive_seed(seed, 2), replicate);
    cfg.horizon.powf(cfg.hurst) * rng.sample::<f64, _>(StandardNormal)
}

/// `θ̂ = X_T / ∫₀ᵀ g(Y_s) ds` for one replicate.
pub fn frac_drift_estimator(
    cfg: &FracModelConfig,
    seed: u64,
    replicate: u64,
) -> Result<FracEstimate> {
    let sampler = frac_sampler(cfg)?;
    let y = sampler.path(derive_seed(seed, 1), replicate);
    frac_one(cfg, &y.values, frac_noise(cfg, seed, replicate))
}

pub fn frac_consistency_experiment(
    cfg: &FracModelConfig,
    replicates: usize,
    seed: u64,
    mode: Parallelism,
) -> Result<(EstimatorSummary, Vec<FracEstimate>)> {
    let sampler = frac_sampler(cfg)?;
    let estimates = sampler
        .map_replicates(derive_seed(seed, 1), replicates, mode, |r, y| {
            frac_one(cfg, y, frac_noise(cfg, seed, r))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let records = estimates
        .iter()
        .enumerate()
        .map(|(r, e)| EstimateRecord {
            replicate: r as u64,
            theta_hat: e.theta_hat,
            x0_term: e.x0_term,
            noise_term: e.noise_term,
        })
        .collect();
    Ok((EstimatorSummary::new(cfg.theta, seed, records), estimates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn noise_free_decay() {
        let cfg = OUModelConfig {
            theta: 1.0,
            g: Diffusion::constant(0.0),
            y0: 1.0,
            horizon: 1.0,
            dt: 1e-3,
        };
        let p = simulate_ou_model(&cfg, 0, 0).unwrap();
        assert!((p.values.last().unwrap() - (-1f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn noise_free_estimate_converges() {
        let mut errs = Vec::new();
        for dt in [1e-2, 1e-3] {
            let cfg = OUModelConfig {
                theta: 2.0,
                g: Diffusion::constant(0.0),
                y0: 1.0,
                horizon: 2.0,
                dt,
            };
            let p = simulate_ou_model(&cfg, 0, 0).unwrap();
            errs.push((ou_drift_estimator(&p).unwrap() - 2.0).abs());
        }
        // Euler on dY = -θY dt gives exactly θ
        assert!(errs.iter().all(|e| *e < 1e-9), "{errs:?}");
    }

    #[test]
    fn oscillating_bounds_accepted_and_violations_rejected() {
        Diffusion::oscillating().check(50.0, 0.01).unwrap();
        let bad = Diffusion {
            lower: 0.6,
            ..Diffusion::oscillating()
        };
        assert!(bad.check(50.0, 0.01).is_err());
    }

    #[test]
    fn degenerate_path() {
        assert!(matches!(
            ou_drift_estimate(&[0.0, 0.0, 0.0], 0.1),
            Err(Error::Degenerate(_))
        ));
        assert!(ou_drift_estimate(&[1.0], 0.1).is_err());
    }

    #[test]
    fn frac_identity_is_exact() {
        let cfg = FracModelConfig {
            theta: 2.0,
            hurst: 0.7,
            f: FunctionSpec::identity(),
            driver: ProcessSpec::StationaryOu { theta: 1.0 },
            x0: 5.0,
            horizon: 20.0,
            dt: 0.01,
            epsilon: 0.1,
        };
        let e = frac_drift_estimator(&cfg, 11, 0).unwrap();
        assert_relative_eq!(
            e.theta_hat - cfg.theta,
            e.x0_term + e.noise_term,
            epsilon = 1e-12
        );
    }

    #[test]
    fn frac_rejects_other_drivers() {
        let cfg = FracModelConfig {
            theta: 1.0,
            hurst: 0.7,
            f: FunctionSpec::identity(),
            driver: ProcessSpec::Fbm { hurst: 0.5 },
            x0: 0.0,
            horizon: 1.0,
            dt: 0.01,
            epsilon: 0.1,
        };
        assert!(frac_drift_estimator(&cfg, 0, 0).is_err());
    }
}
