//! Multivariate normal sampling through the Cholesky factor.

use super::matrix::{CholeskyFactor, CovMatrix, Matrix};
use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;

/// Prepared sampler for N(mean, cov): samples are mean + L·z with z iid
/// standard normal.
pub struct MvnSampler<S> {
    mean: Vec<S>,
    chol: CholeskyFactor<S>,
}

impl<S: Scalar> MvnSampler<S> {
    pub fn new(mean: Vec<S>, cov: &CovMatrix<S>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::Domain(format!(
                "mean length {} vs covariance dim {}",
                mean.len(),
                cov.dim()
            )));
        }
        let (repaired, _report) = cov.repair_psd()?;
        let chol = repaired.cholesky()?;
        Ok(Self { mean, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Write one draw into `out` (length d).
    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut [S], z_buf: &mut [S], rng: &mut R) {
        for z in z_buf.iter_mut() {
            *z = S::standard_normal(rng);
        }
        out.copy_from_slice(&self.mean);
        self.chol.apply_add(z_buf, out);
    }
}

/// Draw `n` samples from N(mean, cov) as an n×d matrix.
pub fn mvn_sample<S: Scalar>(
    mean: &[S],
    cov: &CovMatrix<S>,
    n: usize,
    stream: RngStream,
) -> Result<Matrix<S>> {
    let sampler = MvnSampler::new(mean.to_vec(), cov)?;
    let d = mean.len();
    let mut rng = stream.rng();
    let mut out = Matrix::zeros(n, d);
    let mut z = vec![S::zero(); d];
    for i in 0..n {
        sampler.sample_into(out.row_mut(i), &mut z, &mut rng);
    }
    Ok(out)
}
