//! Calibration metrics: standard error, standard confidence via
//! Mahalanobis distance against the χ² cutoff, and median negative log
//! probability density.

use crate::error::{Error, Result};
use crate::intervals::PredictionDistribution;
use crate::scalar::Scalar;
use crate::stats::{chi2_quantile, percentile, CholeskyFactor};

/// One test pair: the prediction distribution at x and the observed y.
#[derive(Debug, Clone)]
pub struct EvaluationPoint<S> {
    pub dist: PredictionDistribution<S>,
    pub observed: Vec<S>,
}

impl<S: Scalar> EvaluationPoint<S> {
    pub fn new(dist: PredictionDistribution<S>, observed: Vec<S>) -> Result<Self> {
        if dist.dim() != observed.len() {
            return Err(Error::Domain(format!(
                "distribution dim {} vs observed dim {}",
                dist.dim(),
                observed.len()
            )));
        }
        Ok(Self { dist, observed })
    }

    fn residual(&self) -> Vec<S> {
        self.dist
            .mean
            .iter()
            .zip(self.observed.iter())
            .map(|(&m, &y)| m - y)
            .collect()
    }
}

/// Summary of all metrics over one test set.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MetricReport<S> {
    /// Mean |residual| / σ̂; univariate only.
    pub standard_error: Option<S>,
    /// Fraction of points inside the χ² cutoff at coverage p_c.
    pub standard_confidence: S,
    pub median_nlpd: S,
    pub n_points: usize,
    pub p_c: S,
}

/// Eq-style standard error: mean over points of |θ̂ − y| / σ̂. Univariate
/// distributions only; any zero σ̂ is an error naming the point.
pub fn standard_error<S: Scalar>(points: &[EvaluationPoint<S>]) -> Result<S> {
    if points.is_empty() {
        return Err(Error::Domain("standard error of no points".into()));
    }
    let mut acc = S::zero();
    for (i, pt) in points.iter().enumerate() {
        if pt.dist.dim() != 1 {
            return Err(Error::Domain(
                "standard error is defined for univariate predictions".into(),
            ));
        }
        let var = pt.dist.cov.get(0, 0);
        if var <= S::zero() {
            return Err(Error::Metric {
                point: i,
                reason: "predicted σ is zero".into(),
            });
        }
        acc = acc + (pt.dist.mean[0] - pt.observed[0]).abs() / var.sqrt();
    }
    Ok(acc / S::from_usize(points.len()))
}

fn repaired_cholesky<S: Scalar>(
    dist: &PredictionDistribution<S>,
) -> Result<CholeskyFactor<S>> {
    let (repaired, _) = dist.cov.repair_psd()?;
    repaired.cholesky()
}

fn mahalanobis_with<S: Scalar>(
    chol: &CholeskyFactor<S>,
    residual: &[S],
) -> Result<S> {
    let z = chol.forward_solve(residual)?;
    Ok(z.iter().map(|&v| v * v).sum::<S>().sqrt())
}

/// Covariance-normalized residual magnitude √(rᵀΣ̂⁻¹r), solved through the
/// Cholesky factor (never an explicit inverse).
pub fn mahalanobis<S: Scalar>(dist: &PredictionDistribution<S>, observed: &[S]) -> Result<S> {
    if observed.len() != dist.dim() {
        return Err(Error::Domain("observed dim mismatch".into()));
    }
    let chol = repaired_cholesky(dist)?;
    let residual: Vec<S> = dist
        .mean
        .iter()
        .zip(observed.iter())
        .map(|(&m, &y)| m - y)
        .collect();
    mahalanobis_with(&chol, &residual)
}

/// Fraction of points whose squared Mahalanobis distance is inside the
/// χ²_d quantile at coverage `p_c`.
pub fn standard_confidence<S: Scalar>(points: &[EvaluationPoint<S>], p_c: S) -> Result<S> {
    if points.is_empty() {
        return Err(Error::Domain("standard confidence of no points".into()));
    }
    let d = points[0].dist.dim();
    let cutoff = chi2_quantile(p_c, d as u32)?;
    let mut inside = 0usize;
    for (i, pt) in points.iter().enumerate() {
        if pt.dist.dim() != d {
            return Err(Error::Domain("mixed output dimensions".into()));
        }
        let chol = repaired_cholesky(&pt.dist).map_err(|e| Error::Metric {
            point: i,
            reason: e.to_string(),
        })?;
        let rm = mahalanobis_with(&chol, &pt.residual()).map_err(|e| Error::Metric {
            point: i,
            reason: e.to_string(),
        })?;
        if rm * rm <= cutoff {
            inside += 1;
        }
    }
    Ok(S::from_usize(inside) / S::from_usize(points.len()))
}

fn nlpd_one<S: Scalar>(pt: &EvaluationPoint<S>, point_index: usize) -> Result<S> {
    let d = S::from_usize(pt.dist.dim());
    let chol = repaired_cholesky(&pt.dist).map_err(|e| Error::Metric {
        point: point_index,
        reason: e.to_string(),
    })?;
    let log_det = chol.log_det().map_err(|e| Error::Metric {
        point: point_index,
        reason: e.to_string(),
    })?;
    let rm = mahalanobis_with(&chol, &pt.residual()).map_err(|e| Error::Metric {
        point: point_index,
        reason: e.to_string(),
    })?;
    let two_pi = S::two() * S::pi();
    Ok(S::half() * (d * two_pi.ln() + log_det + rm * rm))
}

/// Median over points of −ln p(y; θ̂, Σ̂) =
/// ½[d·ln 2π + ln det Σ̂ + r_M²]. The median keeps jackknife-style outliers
/// from dominating.
pub fn median_nlpd<S: Scalar>(points: &[EvaluationPoint<S>]) -> Result<S> {
    if points.is_empty() {
        return Err(Error::Domain("NLPD of no points".into()));
    }
    let values: Vec<S> = points
        .iter()
        .enumerate()
        .map(|(i, pt)| nlpd_one(pt, i))
        .collect::<Result<_>>()?;
    percentile(&values, S::half())
}

/// All metrics at once; standard error included only for univariate
/// distributions.
pub fn evaluate<S: Scalar>(points: &[EvaluationPoint<S>], p_c: S) -> Result<MetricReport<S>> {
    let univariate = points.first().map_or(false, |pt| pt.dist.dim() == 1);
    let standard_error = if univariate {
        Some(standard_error(points)?)
    } else {
        None
    };
    Ok(MetricReport {
        standard_error,
        standard_confidence: standard_confidence(points, p_c)?,
        median_nlpd: median_nlpd(points)?,
        n_points: points.len(),
        p_c,
    })
}
