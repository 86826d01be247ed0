//! Exact path sampling on uniform grids.

mod cholesky;
mod circulant;

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::exec::{map_indexed, Parallelism};
use crate::kernels::{covariance_matrix, sawtooth_profile, ProcessKind, ProcessSpec, XiLaw};
use crate::rng::replicate_rng;
use cholesky::CholeskySampler;
use circulant::CirculantSampler;

/// Largest number of steps a single path may have.
pub const MAX_STEPS: usize = 1 << 20;
/// Largest number of grid points handled by the dense Cholesky sampler.
pub const MAX_CHOLESKY_POINTS: usize = 4097;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    CholeskyExact,
    CirculantEmbedding,
    MarkovRecursion,
    BridgeConstruction,
    SawtoothDirect,
}

impl SimMethod {
    pub fn admissible(self, kind: ProcessKind) -> bool {
        use ProcessKind::*;
        match self {
            SimMethod::CholeskyExact => kind != RandomSawtooth,
            SimMethod::CirculantEmbedding => {
                matches!(kind, Fbm | StationaryOu | FractionalOu | TemperedStationary)
            }
            SimMethod::MarkovRecursion => kind == StationaryOu,
            SimMethod::BridgeConstruction => kind == PeriodicBridge,
            SimMethod::SawtoothDirect => kind == RandomSawtooth,
        }
    }

    pub fn default_for(kind: ProcessKind) -> SimMethod {
        match kind {
            ProcessKind::Fbm => SimMethod::CirculantEmbedding,
            ProcessKind::StationaryOu => SimMethod::MarkovRecursion,
            ProcessKind::FractionalOu | ProcessKind::TemperedStationary => SimMethod::CholeskyExact,
            ProcessKind::PeriodicBridge => SimMethod::BridgeConstruction,
            ProcessKind::RandomSawtooth => SimMethod::SawtoothDirect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// `None` selects the default method for the process kind.
    pub method: Option<SimMethod>,
    pub replicates: usize,
    pub base_seed: u64,
    pub parallelism: Parallelism,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            method: None,
            replicates: 1,
            base_seed: 0,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub spec: ProcessSpec,
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate: u64,
}

impl SamplePath {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.time(i)).collect()
    }

    /// Writes `t,value` rows preceded by `#` header comments.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# spec={}", self.spec)?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.time(i), v)?;
        }
        Ok(())
    }
}

enum Engine {
    Markov {
        sd0: f64,
        phi: f64,
        innovation_sd: f64,
    },
    /// Circulant samples of increments (cumulated, starting at `offset`) or
    /// of values directly.
    Circulant {
        sampler: CirculantSampler,
        increments: bool,
        offset: usize,
    },
    Cholesky(CholeskySampler),
    /// Per point: coefficient on the previous point, and conditional sd.
    /// `None` marks a pinned point.
    Bridge(Vec<Option<(f64, f64)>>),
    Sawtooth {
        xi: XiLaw,
        profile: Vec<f64>,
    },
}

/// A sampler prepared once for a fixed spec and grid, reusable across
/// replicates and threads.
pub struct PathSampler {
    pub spec: ProcessSpec,
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
    pub method: SimMethod,
    /// Fallbacks, jitter and clamping applied while preparing the sampler.
    pub notes: Vec<String>,
    engine: Engine,
}

fn fgn_autocov(hurst: f64, dt: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * dt.powf(h2) * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

impl PathSampler {
    pub fn new(
        spec: ProcessSpec,
        t0: f64,
        dt: f64,
        n: usize,
        method: Option<SimMethod>,
    ) -> Result<Self> {
        spec.validate()?;
        precondition(dt > 0.0 && dt.is_finite(), || {
            format!("dt must be positive, got {dt}")
        })?;
        precondition(t0 >= 0.0 && t0.is_finite(), || {
            format!("t0 must be non-negative, got {t0}")
        })?;
        precondition(n >= 1, || "a path needs at least one step".into())?;
        if n > MAX_STEPS {
            return Err(Error::MemoryGuard {
                requested: n,
                limit: MAX_STEPS,
            });
        }
        let kind = spec.kind();
        let explicit = method.is_some();
        let mut method = method.unwrap_or_else(|| SimMethod::default_for(kind));
        if !method.admissible(kind) {
            return Err(Error::Precondition(format!(
                "method {method:?} cannot sample {spec}"
            )));
        }
        let mut notes = Vec::new();
        if !explicit && method == SimMethod::CholeskyExact && n + 1 > MAX_CHOLESKY_POINTS {
            notes.push(format!(
                "{} points exceed the Cholesky limit; using circulant embedding",
                n + 1
            ));
            method = SimMethod::CirculantEmbedding;
        }
        let times: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * dt).collect();
        let engine = match method {
            SimMethod::MarkovRecursion => {
                let ProcessSpec::StationaryOu { theta } = spec else {
                    unreachable!()
                };
                let var = 1.0 / (2.0 * theta);
                let phi = (-theta * dt).exp();
                Engine::Markov {
                    sd0: var.sqrt(),
                    phi,
                    innovation_sd: (var * -(-2.0 * theta * dt).exp_m1()).sqrt(),
                }
            }
            SimMethod::CirculantEmbedding => match Self::circulant(&spec, t0, dt, n) {
                Ok(engine) => {
                    if let Engine::Circulant { sampler, .. } = &engine {
                        if sampler.clamped > 0.0 {
                            notes.push(format!(
                                "clamped negative embedding mass {:e}",
                                sampler.clamped
                            ));
                        }
                    }
                    engine
                }
                Err(e) if n < MAX_CHOLESKY_POINTS => {
                    notes.push(format!(
                        "circulant embedding unavailable ({e}); fell back to Cholesky"
                    ));
                    method = SimMethod::CholeskyExact;
                    Self::cholesky(&spec, &times, &mut notes)?
                }
                Err(e) => return Err(e),
            },
            SimMethod::CholeskyExact => {
                if n + 1 > MAX_CHOLESKY_POINTS {
                    return Err(Error::MemoryGuard {
                        requested: n + 1,
                        limit: MAX_CHOLESKY_POINTS,
                    });
                }
                Self::cholesky(&spec, &times, &mut notes)?
            }
            SimMethod::BridgeConstruction => Engine::Bridge(bridge_coefficients(&times)),
            SimMethod::SawtoothDirect => {
                let ProcessSpec::RandomSawtooth { xi } = spec else {
                    unreachable!()
                };
                Engine::Sawtooth {
                    xi,
                    profile: times.iter().map(|&t| sawtooth_profile(t)).collect(),
                }
            }
        };
        Ok(PathSampler {
            spec,
            t0,
            dt,
            n,
            method,
            notes,
            engine,
        })
    }

    fn cholesky(spec: &ProcessSpec, times: &[f64], notes: &mut Vec<String>) -> Result<Engine> {
        let cov = covariance_matrix(spec, times)?;
        let sampler = CholeskySampler::new(&cov)?;
        if sampler.jitter > 0.0 {
            notes.push(format!("cholesky diagonal jitter {:e}", sampler.jitter));
        }
        Ok(Engine::Cholesky(sampler))
    }

    fn circulant(spec: &ProcessSpec, t0: f64, dt: f64, n: usize) -> Result<Engine> {
        match *spec {
            ProcessSpec::Fbm { hurst } => {
                let offset = (t0 / dt).round();
                if (offset * dt - t0).abs() > 1e-9 * t0.max(dt) {
                    return Err(Error::Precondition(format!(
                        "t0={t0} is not a multiple of dt={dt}"
                    )));
                }
                let offset = offset as usize;
                if offset + n > 4 * MAX_STEPS {
                    return Err(Error::MemoryGuard {
                        requested: offset + n,
                        limit: 4 * MAX_STEPS,
                    });
                }
                let sampler = CirculantSampler::new(offset + n, |k| Ok(fgn_autocov(hurst, dt, k)))?;
                Ok(Engine::Circulant {
                    sampler,
                    increments: true,
                    offset,
                })
            }
            _ => {
                let sampler = CirculantSampler::new(n + 1, |k| {
                    Ok(spec.stationary_covariance(k as f64 * dt)?.value)
                })?;
                Ok(Engine::Circulant {
                    sampler,
                    increments: false,
                    offset: 0,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.engine {
            Engine::Markov {
                sd0,
                phi,
                innovation_sd,
            } => {
                let mut out = Vec::with_capacity(self.n + 1);
                let mut x = sd0 * rng.sample::<f64, _>(StandardNormal);
                out.push(x);
                for _ in 0..self.n {
                    x = phi * x + innovation_sd * rng.sample::<f64, _>(StandardNormal);
                    out.push(x);
                }
                out
            }
            Engine::Circulant {
                sampler,
                increments,
                offset,
            } => {
                let raw = sampler.sample(rng);
                if !increments {
                    return raw;
                }
                let mut out = Vec::with_capacity(self.n + 1);
                let mut acc = 0.0;
                if *offset == 0 {
                    out.push(0.0);
                }
                for (i, d) in raw.iter().enumerate() {
                    acc += d;
                    if i + 1 >= *offset {
                        out.push(acc);
                    }
                }
                out
            }
            Engine::Cholesky(s) => s.sample(rng),
            Engine::Bridge(coef) => {
                let mut out = Vec::with_capacity(coef.len());
                let mut prev = 0.0;
                for c in coef {
                    let x = match *c {
                        None => 0.0,
                        Some((m, sd)) => m * prev + sd * rng.sample::<f64, _>(StandardNormal),
                    };
                    out.push(x);
                    prev = x;
                }
                out
            }
            Engine::Sawtooth { xi, profile } => {
                let amp = xi.sample(rng);
                profile.iter().map(|p| amp * p).collect()
            }
        }
    }

    pub fn path(&self, base_seed: u64, replicate: u64) -> SamplePath {
        let mut rng = replicate_rng(base_seed, replicate);
        SamplePath {
            spec: self.spec,
            t0: self.t0,
            dt: self.dt,
            values: self.sample(&mut rng),
            seed: base_seed,
            replicate,
        }
    }

    /// Applies `f` to replicates `0..count`, returning results in replicate
    /// order regardless of the execution mode.
    pub fn map_replicates<T, F>(
        &self,
        base_seed: u64,
        count: usize,
        mode: Parallelism,
        f: F,
    ) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, &[f64]) -> T + Sync,
    {
        map_indexed(count, mode, |r| {
            let mut rng = replicate_rng(base_seed, r as u64);
            let values = self.sample(&mut rng);
            f(r as u64, &values)
        })
    }
}

/// Sequential bridge construction: given the previous grid point in the same
/// unit interval (or the pinned left end), the next value is Gaussian with
/// mean `(1-u)/(1-u_p) X_p` and variance `(u-u_p)(1-u)/(1-u_p)`.
fn bridge_coefficients(times: &[f64]) -> Vec<Option<(f64, f64)>> {
    let snap = |t: f64| {
        let r = t.round();
        if (t - r).abs() <= 1e-9 * t.abs().max(1.0) {
            (r, 0.0)
        } else {
            (t.floor(), t - t.floor())
        }
    };
    let mut prev: Option<(f64, f64)> = None;
    times
        .iter()
        .map(|&t| {
            let (k, u) = snap(t);
            let coef = if u == 0.0 {
                None
            } else {
                // a new unit interval restarts from the pin at its left end
                let (up, carry) = match prev {
                    Some((kp, up)) if kp == k => (up, 1.0),
                    _ => (0.0, 0.0),
                };
                let m = carry * (1.0 - u) / (1.0 - up);
                let var = (u - up) * (1.0 - u) / (1.0 - up);
                Some((m, var.max(0.0).sqrt()))
            };
            prev = Some((k, u));
            coef
        })
        .collect()
}

/// One path with replicate index 0 of the given seed.
pub fn sample_path(
    spec: &ProcessSpec,
    t0: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<SamplePath> {
    Ok(PathSampler::new(*spec, t0, dt, n, None)?.path(seed, 0))
}

pub fn simulate_replicates(
    spec: &ProcessSpec,
    t0: f64,
    dt: f64,
    n: usize,
    cfg: &SimConfig,
) -> Result<Vec<SamplePath>> {
    precondition(cfg.replicates >= 1, || "replicates must be positive".into())?;
    let sampler = PathSampler::new(*spec, t0, dt, n, cfg.method)?;
    Ok(map_indexed(cfg.replicates, cfg.parallelism, |r| {
        sampler.path(cfg.base_seed, r as u64)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementMoment {
    pub lag_steps: usize,
    pub lag: f64,
    /// `(E|X_{t+lag} - X_t|^r)^{1/r}`
    pub norm: f64,
}

/// Per-lag `L^r` norms of increments, pooled over paths and start points.
pub fn increment_moments(paths: &[SamplePath], r: u32) -> Result<Vec<IncrementMoment>> {
    precondition(!paths.is_empty(), || {
        "increment_moments needs at least one path".into()
    })?;
    precondition(matches!(r, 2 | 4 | 8), || {
        format!("r must be 2, 4 or 8, got {r}")
    })?;
    let first = &paths[0];
    let len = first.values.len();
    precondition(
        paths
            .iter()
            .all(|p| p.values.len() == len && p.dt == first.dt && p.t0 == first.t0),
        || "all paths must share one grid".into(),
    )?;
    Ok((0..len)
        .map(|lag| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for p in paths {
                for i in 0..len - lag {
                    sum += (p.values[i + lag] - p.values[i]).abs().powi(r as i32);
                    count += 1;
                }
            }
            IncrementMoment {
                lag_steps: lag,
                lag: lag as f64 * first.dt,
                norm: (sum / count as f64).powf(1.0 / r as f64),
            }
        })
        .collect())
}

/// `max_{lag > 0} norm / lag^ρ` over the supplied moments with `lag <= 1`.
pub fn holder_ratio(moments: &[IncrementMoment], rho: f64) -> f64 {
    moments
        .iter()
        .filter(|m| m.lag_steps > 0 && m.lag <= 1.0 + 1e-12)
        .map(|m| m.norm / m.lag.powf(rho))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bridge_pins_integer_times() {
        let p = sample_path(&ProcessSpec::PeriodicBridge, 0.0, 0.125, 40, 3).unwrap();
        for (i, v) in p.values.iter().enumerate() {
            if i % 8 == 0 {
                assert_eq!(*v, 0.0);
                assert!(v.is_sign_positive());
            } else {
                assert_ne!(*v, 0.0);
            }
        }
    }

    #[test]
    fn determinism() {
        let spec = ProcessSpec::Fbm { hurst: 0.7 };
        let a = sample_path(&spec, 0.0, 0.01, 100, 42).unwrap();
        let b = sample_path(&spec, 0.0, 0.01, 100, 42).unwrap();
        assert_eq!(a.values, b.values);
        let c = sample_path(&spec, 0.0, 0.01, 100, 43).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn fbm_offset_grid() {
        let spec = ProcessSpec::Fbm { hurst: 0.7 };
        let p = sample_path(&spec, 1.0, 0.25, 8, 1).unwrap();
        assert_eq!(p.values.len(), 9);
        // t0 off the dt lattice goes through Cholesky
        let s = PathSampler::new(spec, 0.3, 0.25, 8, None).unwrap();
        assert_eq!(s.method, SimMethod::CholeskyExact);
        assert!(!s.notes.is_empty());
    }

    #[test]
    fn inadmissible_method() {
        let r = PathSampler::new(
            ProcessSpec::PeriodicBridge,
            0.0,
            0.1,
            10,
            Some(SimMethod::MarkovRecursion),
        );
        assert!(r.is_err());
    }

    #[test]
    fn memory_guard() {
        let r = PathSampler::new(
            ProcessSpec::StationaryOu { theta: 1.0 },
            0.0,
            0.1,
            MAX_STEPS + 1,
            None,
        );
        assert!(matches!(r, Err(Error::MemoryGuard { .. })));
    }

    #[test]
    fn lag_zero_moment_is_zero() {
        let spec = ProcessSpec::StationaryOu { theta: 1.0 };
        let cfg = SimConfig {
            replicates: 4,
            base_seed: 9,
            ..Default::default()
        };
        let paths = simulate_replicates(&spec, 0.0, 0.1, 20, &cfg).unwrap();
        let m = increment_moments(&paths, 2).unwrap();
        assert_eq!(m[0].norm, 0.0);
        assert!(increment_moments(&[], 2).is_err());
        assert!(increment_moments(&paths, 3).is_err());
    }

    #[test]
    fn csv_layout() {
        let p = sample_path(&ProcessSpec::PeriodicBridge, 0.0, 0.5, 2, 5).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# spec=bridge");
        assert_eq!(lines[1], "# seed=5");
        assert_eq!(lines[2], "t,value");
        assert_eq!(lines[3], "0,0");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn fgn_lag_zero_is_step_variance() {
        assert_relative_eq!(
            fgn_autocov(0.7, 0.5, 0),
            0.5f64.powf(1.4),
            max_relative = 1e-14
        );
    }
}
