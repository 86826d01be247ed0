use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const JITTER_ATTEMPTS: usize = 3;

/// Exact Gaussian sampler from a covariance matrix. Indices with zero
/// variance are pinned to zero and left out of the factorization.
pub(crate) struct CholeskySampler {
    len: usize,
    active: Vec<usize>,
    lower: DMatrix<f64>,
    pub(crate) jitter: f64,
}

impl CholeskySampler {
    pub(crate) fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let len = cov.nrows();
        let active: Vec<usize> = (0..len).filter(|&i| cov[(i, i)] > 0.0).collect();
        let k = active.len();
        let sub = DMatrix::from_fn(k, k, |i, j| cov[(active[i], active[j])]);
        let trace = sub.trace();
        let mut jitter = 0.0;
        let mut step = 1e-12 * trace / k.max(1) as f64;
        for attempt in 0..=JITTER_ATTEMPTS {
            let mut m = sub.clone();
            for i in 0..k {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = m.cholesky() {
                return Ok(CholeskySampler {
                    len,
                    active,
                    lower: ch.unpack(),
                    jitter,
                });
            }
            if attempt < JITTER_ATTEMPTS {
                jitter = step;
                step *= 10.0;
            }
        }
        Err(Error::Cholesky {
            attempts: JITTER_ATTEMPTS,
            jitter,
        })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.active.len();
        let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = &self.lower * z;
        let mut out = vec![0.0; self.len];
        for (i, &idx) in self.active.iter().enumerate() {
            out[idx] = x[i];
        }
        out
    }
}
