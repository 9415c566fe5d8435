//! Deterministic statistical primitives shared by every other module:
//! normal and chi-squared quantiles, percentiles, Pearson correlation,
//! small dense covariance matrices with Cholesky factorization, seeded
//! RNG streams, and multivariate-normal sampling.

mod chi2;
mod matrix;
mod mvn;
mod normal;
mod rng;
mod special;

pub use chi2::{chi2_cdf, chi2_quantile};
pub use matrix::{CholeskyFactor, CovMatrix, Matrix, PsdRepair};
pub use mvn::{mvn_sample, MvnSampler};
pub use normal::{normal_cdf, normal_quantile};
pub use rng::RngStream;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Arithmetic mean. Empty input is a domain error.
pub fn mean<S: Scalar>(values: &[S]) -> Result<S> {
    if values.is_empty() {
        return Err(Error::Domain("mean of empty list".into()));
    }
    let sum: S = values.iter().copied().sum();
    Ok(sum / S::from_usize(values.len()))
}

/// Unbiased sample variance (divisor n − 1). Needs at least two values.
pub fn sample_variance<S: Scalar>(values: &[S]) -> Result<S> {
    if values.len() < 2 {
        return Err(Error::Domain("sample variance needs >= 2 values".into()));
    }
    let m = mean(values)?;
    let ss: S = values.iter().map(|&v| (v - m) * (v - m)).sum();
    Ok(ss / S::from_usize(values.len() - 1))
}

/// Unbiased sample standard deviation.
pub fn sample_std<S: Scalar>(values: &[S]) -> Result<S> {
    Ok(sample_variance(values)?.sqrt())
}

/// Population variance (divisor n).
pub fn population_variance<S: Scalar>(values: &[S]) -> Result<S> {
    if values.is_empty() {
        return Err(Error::Domain("variance of empty list".into()));
    }
    let m = mean(values)?;
    let ss: S = values.iter().map(|&v| (v - m) * (v - m)).sum();
    Ok(ss / S::from_usize(values.len()))
}

/// Linear-interpolation percentile at rank position `h = p(n − 1)` on the
/// sorted values.
pub fn percentile<S: Scalar>(values: &[S], p: S) -> Result<S> {
    if values.is_empty() {
        return Err(Error::Domain("percentile of empty list".into()));
    }
    if !(p > S::zero() && p < S::one()) {
        return Err(Error::Domain(format!("percentile level {p} outside (0,1)")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("percentile of non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    if n == 1 {
        return Ok(sorted[0]);
    }
    let h = p * S::from_usize(n - 1);
    let lo = h.floor();
    let idx = lo.as_f64() as usize;
    if idx + 1 >= n {
        return Ok(sorted[n - 1]);
    }
    let frac = h - lo;
    Ok(sorted[idx] + frac * (sorted[idx + 1] - sorted[idx]))
}

/// Sample Pearson correlation with its degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation<S> {
    /// Coefficient in [−1, 1]; 0 when degenerate.
    pub value: S,
    /// True when either series is constant, where the coefficient is
    /// undefined and reported as 0.
    pub degenerate: bool,
}

/// Sample Pearson correlation coefficient, clamped to [−1, 1].
///
/// A constant series yields `value = 0` with the degenerate flag set;
/// constant tree predictions occur on tiny leaves and must not poison a
/// covariance matrix with NaN.
pub fn pearson<S: Scalar>(a: &[S], b: &[S]) -> Result<Correlation<S>> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "pearson length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Domain("pearson needs >= 2 points".into()));
    }
    let ma = mean(a)?;
    let mb = mean(b)?;
    let mut sab = S::zero();
    let mut saa = S::zero();
    let mut sbb = S::zero();
    for (&x, &y) in a.iter().zip(b.iter()) {
        let dx = x - ma;
        let dy = y - mb;
        sab = sab + dx * dy;
        saa = saa + dx * dx;
        sbb = sbb + dy * dy;
    }
    if saa == S::zero() || sbb == S::zero() {
        return Ok(Correlation {
            value: S::zero(),
            degenerate: true,
        });
    }
    let r = sab / (saa * sbb).sqrt();
    Ok(Correlation {
        value: r.min(S::one()).max(-S::one()),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_constant_list() {
        let v = [5.0, 5.0, 5.0];
        assert_eq!(percentile(&v, 0.683).unwrap(), 5.0);
    }

    #[test]
    fn percentile_odd_median() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5).unwrap(), 3.0);
    }

    #[test]
    fn percentile_interpolates() {
        // h = 0.683 * 4 = 2.732 -> 3 + 0.732
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let got: f64 = percentile(&v, 0.683).unwrap();
        assert!((got - 3.732).abs() < 1e-12, "{got}");
    }

    #[test]
    fn percentile_rejects_empty() {
        assert!(percentile::<f64>(&[], 0.5).is_err());
    }

    #[test]
    fn percentile_unsorted_input() {
        let v = [4.0, 1.0, 5.0, 2.0, 3.0];
        assert_eq!(percentile(&v, 0.5).unwrap(), 3.0);
    }

    #[test]
    fn pearson_identical_series() {
        let a = [1.0, 2.0, 3.0];
        let c = pearson(&a, &a).unwrap();
        assert_eq!(c.value, 1.0);
        assert!(!c.degenerate);
    }

    #[test]
    fn pearson_anticorrelated() {
        let a = [1.0, 2.0, 3.0];
        let b = [3.0, 2.0, 1.0];
        assert_eq!(pearson(&a, &b).unwrap().value, -1.0);
    }

    #[test]
    fn pearson_hand_value() {
        let a = [1.0f64, 2.0, 3.0];
        let b = [1.0, 2.0, 4.0];
        let got = pearson(&a, &b).unwrap().value;
        assert!((got - 0.9819805060619659).abs() < 1e-12, "{got}");
    }

    #[test]
    fn pearson_constant_is_degenerate_zero() {
        let a = [2.0, 2.0, 2.0];
        let b = [1.0, 2.0, 3.0];
        let c = pearson(&a, &b).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.degenerate);
    }

    #[test]
    fn sample_variance_hand() {
        let v = [1.0, 3.0];
        assert_eq!(sample_variance(&v).unwrap(), 2.0);
    }
}
