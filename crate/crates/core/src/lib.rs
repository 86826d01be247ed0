//! Small-ball estimates, divergence of integral functionals and drift
//! estimation for Gaussian and related stochastic processes.

pub mod error;
pub mod estimators;
pub mod exec;
pub mod functionals;
pub mod kernels;
pub mod oracles;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod smallball;
pub mod stats;
pub mod testfuncs;

pub use error::{Error, Result};
pub use exec::Parallelism;
pub use kernels::{covariance, variogram, KernelEval, ProcessKind, ProcessSpec, XiLaw};
pub use simulate::{sample_path, SamplePath, SimConfig, SimMethod};
