use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Symmetrizes `cov` and adds `ridge * I`.
pub fn regularize_covariance(cov: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let mut out = (cov + cov.transpose()) * 0.5;
    for i in 0..out.nrows() {
        out[(i, i)] += ridge;
    }
    out
}

/// Multivariate normal with a cached Cholesky factor.
#[derive(Clone, Debug)]
pub struct Gaussian {
    mean: DVector<f64>,
    chol_lower: DMatrix<f64>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        Self::build(None, mean, cov)
    }

    /// Like [`Gaussian::new`] but names `state` in the error.
    pub fn for_state(state: usize, mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        Self::build(Some(state), mean, cov)
    }

    fn build(state: Option<usize>, mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                what: "covariance",
                expected: d,
                actual: cov.nrows(),
            });
        }
        if cov.iter().any(|v| !v.is_finite()) || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite { state });
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { state })?;
        let chol_lower = chol.l();
        let log_det_half: f64 = chol_lower.diagonal().iter().map(|v| v.ln()).sum();
        if !log_det_half.is_finite() {
            return Err(Error::NotPositiveDefinite { state });
        }
        let log_norm = -0.5 * d as f64 * (2.0 * PI).ln() - log_det_half;
        Ok(Self {
            mean,
            chol_lower,
            log_norm,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Squared Mahalanobis distance via forward substitution.
    fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let l = &self.chol_lower;
        let mut z = [0.0_f64; 16];
        let mut heap;
        let z: &mut [f64] = if d <= 16 {
            &mut z[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let mut acc = x[i] - self.mean[i];
            for k in 0..i {
                acc -= l[(i, k)] * z[k];
            }
            let zi = acc / l[(i, i)];
            z[i] = zi;
            q += zi * zi;
        }
        q
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Draws `mean + L z` with `z ~ N(0, I)`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.mean.len();
        let mut z = [0.0_f64; 16];
        let mut heap;
        let z: &mut [f64] = if d <= 16 {
            &mut z[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let mut acc = self.mean[i];
            for k in 0..=i {
                acc += self.chol_lower[(i, k)] * z[k];
            }
            out[i] = acc;
        }
    }
}

/// `log N(obs; mean, cov)`.
pub fn gaussian_log_density(obs: &[f64], mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    if obs.len() != mean.len() {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: mean.len(),
            actual: obs.len(),
        });
    }
    Ok(Gaussian::new(mean.clone(), cov)?.log_density(obs))
}
