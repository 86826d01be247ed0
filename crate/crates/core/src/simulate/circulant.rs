use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Eigenvalues below `-NEGATIVE_TOLERANCE * max eigenvalue` make the
/// embedding unusable; smaller negatives are clamped to zero.
pub(crate) const NEGATIVE_TOLERANCE: f64 = 1e-8;

/// Exact sampler for a stationary Gaussian sequence of length `len` with
/// autocovariance `γ`, by circulant embedding.
pub(crate) struct CirculantSampler {
    len: usize,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    pub(crate) clamped: f64,
}

impl CirculantSampler {
    pub(crate) fn new(len: usize, gamma: impl Fn(usize) -> Result<f64>) -> Result<Self> {
        let m = len.saturating_sub(1).max(1).next_power_of_two();
        let size = 2 * m;
        let lags = (0..=m).map(&gamma).collect::<Result<Vec<f64>>>()?;
        let mut buf: Vec<Complex<f64>> = (0..size)
            .map(|k| Complex::new(if k <= m { lags[k] } else { lags[size - k] }, 0.0))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(size);
        fft.process(&mut buf);
        let max = buf.iter().map(|c| c.re).fold(0.0f64, f64::max);
        let min = buf.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min < -NEGATIVE_TOLERANCE * max {
            return Err(Error::Precondition(format!(
                "circulant embedding has a negative eigenvalue {min:e} (largest {max:e})"
            )));
        }
        let clamped = buf.iter().map(|c| (-c.re).max(0.0)).sum::<f64>();
        let sqrt_eig = buf
            .iter()
            .map(|c| (c.re.max(0.0) / size as f64).sqrt())
            .collect();
        Ok(CirculantSampler {
            len,
            sqrt_eig,
            fft,
            clamped,
        })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.truncate(self.len);
        buf.into_iter().map(|c| c.re).collect()
    }
}
