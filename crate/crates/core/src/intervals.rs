//! Recalibrated bootstrap prediction distributions.
//!
//! Out-of-bag standard residuals set a per-output recalibration factor α
//! (percentile route, plus an MLE variant for comparison). The factor
//! rescales the bootstrap standard deviation into the interval width, and
//! one of four correlation estimators (trivial, training-data, jackknife,
//! bootstrap) fills in the off-diagonal structure of the returned normal
//! prediction distribution. The bias-corrected infinitesimal-jackknife and
//! jackknife-after-bootstrap covariance estimators live here too, along
//! with the unconditional OOB-constant baseline.

use crate::ensemble::{oob_records, OobRecord, TrainedForest};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{normal_quantile, pearson, percentile, sample_std, CovMatrix, Matrix};
use crate::tree::FeatureValue;

/// How the correlation matrix ρ̂(x) of the prediction distribution is
/// estimated. `Bootstrap` is the Pearson correlation over tree-wise
/// predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CorrelationMethod {
    /// ρ̂ = identity: outputs treated as independent.
    Trivial,
    /// Pearson correlation of the observed training outputs, reused at
    /// every input.
    TrainingData,
    /// Ratio of jackknife covariance to jackknife variances.
    Jackknife,
    /// Pearson correlation over the tree-wise predictions.
    Bootstrap,
}

impl CorrelationMethod {
    pub const ALL: [CorrelationMethod; 4] = [
        CorrelationMethod::Trivial,
        CorrelationMethod::TrainingData,
        CorrelationMethod::Jackknife,
        CorrelationMethod::Bootstrap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CorrelationMethod::Trivial => "trivial",
            CorrelationMethod::TrainingData => "training-data",
            CorrelationMethod::Jackknife => "jackknife",
            CorrelationMethod::Bootstrap => "bootstrap",
        }
    }
}

/// Per-output recalibration factors α with the confidence level they were
/// computed at.
#[derive(Debug, Clone, PartialEq)]
pub struct RecalibrationFactor<S> {
    pub alpha: Vec<S>,
    pub p: S,
    /// Smallest per-output count of usable (nonzero-spread) records.
    pub usable_rows: usize,
    /// True when some α collapsed to zero and was clamped to 1e-6.
    pub clamped: bool,
}

fn usable_residuals<S: Scalar>(records: &[OobRecord<S>], output: usize) -> Vec<S> {
    records
        .iter()
        .filter(|r| r.oob_std[output] > S::zero())
        .map(|r| r.std_residual[output])
        .collect()
}

/// α_j = (p-percentile of the |standard residuals| for output j) / η(p),
/// with η(p) = Φ⁻¹((1+p)/2).
pub fn recalibration_factor<S: Scalar>(
    records: &[OobRecord<S>],
    p: S,
) -> Result<RecalibrationFactor<S>> {
    if records.is_empty() {
        return Err(Error::Calibration("no out-of-bag records".into()));
    }
    let d = records[0].oob_std.len();
    let eta = normal_quantile((S::one() + p) / S::two())?;
    let mut alpha = Vec::with_capacity(d);
    let mut usable_rows = usize::MAX;
    let mut clamped = false;
    for j in 0..d {
        let residuals = usable_residuals(records, j);
        if residuals.len() < 8 {
            return Err(Error::Calibration(format!(
                "output {j}: only {} usable out-of-bag records after zero-spread exclusion",
                residuals.len()
            )));
        }
        usable_rows = usable_rows.min(residuals.len());
        let r_p = percentile(&residuals, p)?;
        let mut a = r_p / eta;
        if a == S::zero() {
            a = S::from_f64(1e-6);
            clamped = true;
        }
        alpha.push(a);
    }
    Ok(RecalibrationFactor {
        alpha,
        p,
        usable_rows,
        clamped,
    })
}

/// Closed-form maximizer of the OOB residual log likelihood:
/// α_j = sqrt(mean of squared standard residuals). Sensitive to outliers,
/// which is exactly why the percentile route is the default.
pub fn mle_recalibration_factor<S: Scalar>(records: &[OobRecord<S>]) -> Result<Vec<S>> {
    if records.is_empty() {
        return Err(Error::Calibration("no out-of-bag records".into()));
    }
    let d = records[0].oob_std.len();
    let mut alpha = Vec::with_capacity(d);
    for j in 0..d {
        let residuals = usable_residuals(records, j);
        if residuals.len() < 8 {
            return Err(Error::Calibration(format!(
                "output {j}: only {} usable out-of-bag records",
                residuals.len()
            )));
        }
        let ms: S = residuals.iter().map(|&r| r * r).sum::<S>()
            / S::from_usize(residuals.len());
        let a = ms.sqrt();
        alpha.push(if a == S::zero() { S::from_f64(1e-6) } else { a });
    }
    Ok(alpha)
}

/// Compute OOB records, derive α at level `p`, and install it on the
/// forest. Returns the factor.
pub fn calibrate_forest<S: Scalar>(
    forest: &mut TrainedForest<S>,
    p: S,
) -> Result<RecalibrationFactor<S>> {
    let set = oob_records(forest)?;
    let factor = recalibration_factor(&set.records, p)?;
    forest.set_recalibration(factor.alpha.clone(), p)?;
    Ok(factor)
}

/// α_j · sample standard deviation (divisor B − 1) of the per-tree
/// predictions, per output. Units follow the per-tree matrix.
fn recalibrated_sigma_from<S: Scalar>(per_tree: &Matrix<S>, alpha: &[S]) -> Vec<S> {
    (0..per_tree.n_cols())
        .map(|j| {
            let col = per_tree.column(j);
            let sd = sample_std(&col).unwrap_or(S::zero());
            alpha[j] * sd
        })
        .collect()
}

/// Recalibrated standard deviation σ̂(x) per output, original units.
pub fn recalibrated_sigma<S: Scalar>(
    forest: &TrainedForest<S>,
    input: &[FeatureValue<S>],
) -> Result<Vec<S>> {
    let alpha = forest
        .recalibration()
        .ok_or_else(|| Error::Calibration("forest has no recalibration factor set".into()))?;
    let per_tree = forest.predict_per_tree_std(input)?;
    let mut sigma = recalibrated_sigma_from(&per_tree, alpha);
    for (s, &scale) in sigma.iter_mut().zip(forest.standardizer().scales()) {
        *s = *s * scale;
    }
    Ok(sigma)
}

/// Pearson correlation matrix over the columns of a B×d per-tree
/// prediction matrix. Degenerate (constant) columns contribute 0
/// off-diagonal; the diagonal is 1.
pub fn bootstrap_correlation<S: Scalar>(per_tree: &Matrix<S>) -> Result<CovMatrix<S>> {
    if per_tree.n_rows() < 2 {
        return Err(Error::Domain("bootstrap correlation needs B >= 2".into()));
    }
    let d = per_tree.n_cols();
    let mut rho = CovMatrix::identity(d);
    for j in 0..d {
        let cj = per_tree.column(j);
        for k in (j + 1)..d {
            let ck = per_tree.column(k);
            let c = pearson(&cj, &ck)?;
            let v = if c.degenerate { S::zero() } else { c.value };
            rho.set(j, k, v);
            rho.set(k, j, v);
        }
    }
    Ok(rho)
}

/// Pearson correlation matrix of the observed training outputs, the
/// input-independent estimate used by [`CorrelationMethod::TrainingData`].
pub fn training_data_correlation<S: Scalar>(forest: &TrainedForest<S>) -> Result<CovMatrix<S>> {
    let outputs = forest.training_outputs();
    if outputs.n_rows() < 2 {
        return Err(Error::Domain("training correlation needs N >= 2".into()));
    }
    let d = outputs.n_cols();
    let mut rho = CovMatrix::identity(d);
    for j in 0..d {
        let cj = outputs.column(j);
        for k in (j + 1)..d {
            let ck = outputs.column(k);
            let c = pearson(&cj, &ck)?;
            let v = if c.degenerate { S::zero() } else { c.value };
            rho.set(j, k, v);
            rho.set(k, j, v);
        }
    }
    Ok(rho)
}

/// Bias-corrected jackknife covariance estimates at one input, original
/// output units.
#[derive(Debug, Clone)]
pub struct JackknifeCovariance<S> {
    /// Infinitesimal-jackknife estimate.
    pub ij: CovMatrix<S>,
    /// Jackknife-after-bootstrap estimate.
    pub jab: CovMatrix<S>,
    /// Element-wise mean of the two (the "jackknife" everywhere else).
    pub averaged: CovMatrix<S>,
    /// Training rows dropped from the JaB sum for having no OOB tree.
    pub dropped_rows: usize,
    /// True when a negative diagonal of the averaged matrix was clamped.
    pub clamped_diagonal: bool,
}

/// Diagonal floor for the averaged jackknife matrix.
const JACKKNIFE_VARIANCE_FLOOR: f64 = 1e-12;

/// Bias-corrected IJ and JaB covariance matrices at `input`, plus their
/// average.
///
/// IJ: Σᵢ [Σ_b (Y_bi−1)(t_bj−θ̂_j)/B]·[Σ_b (Y_bi−1)(t_bk−θ̂_k)/B]
///     − (N−1)/B · Cov_*[t_bj, t_bk]
/// JaB: (N−1)/N · Σᵢ (θ̂_{j(−i)}−θ̂_j)(θ̂_{k(−i)}−θ̂_k)
///     − (e−1)(N−1)/B · Cov_*[t_bj, t_bk]
///
/// with Cov_*[t_bj, t_bk] = Σ_b (t_bj−θ̂_j)(t_bk−θ̂_k)/B, the tree
/// covariance over bags. Both corrections vanish as B → ∞.
pub fn jackknife_covariance<S: Scalar>(
    forest: &TrainedForest<S>,
    input: &[FeatureValue<S>],
) -> Result<JackknifeCovariance<S>> {
    let per_tree = forest.predict_per_tree_std(input)?;
    jackknife_covariance_from(forest, &per_tree)
}

pub(crate) fn jackknife_covariance_from<S: Scalar>(
    forest: &TrainedForest<S>,
    per_tree_std: &Matrix<S>,
) -> Result<JackknifeCovariance<S>> {
    let b = per_tree_std.n_rows();
    let d = per_tree_std.n_cols();
    let n = forest.n_train();
    if b < 2 {
        return Err(Error::Domain("jackknife needs B >= 2".into()));
    }
    let counts = forest.bag_counts();
    let theta = per_tree_std.column_means();
    let nb = S::from_usize(b);
    let nn = S::from_usize(n);

    // devs[b][j] = t_bj − θ̂_j
    let devs: Vec<Vec<S>> = (0..b)
        .map(|bi| {
            (0..d)
                .map(|j| per_tree_std.get(bi, j) - theta[j])
                .collect()
        })
        .collect();

    // Shared bias kernel Σ_b dev_bj dev_bk.
    let mut tree_ss = CovMatrix::zeros(d);
    for dev in &devs {
        for j in 0..d {
            for k in j..d {
                let v = tree_ss.get(j, k) + dev[j] * dev[k];
                tree_ss.set(j, k, v);
                tree_ss.set(k, j, v);
            }
        }
    }

    // IJ main term.
    let mut ij = CovMatrix::zeros(d);
    for i in 0..n {
        let mut c = vec![S::zero(); d];
        for (bi, dev) in devs.iter().enumerate() {
            let y = counts.count(bi, i);
            if y == 1 {
                continue;
            }
            let w = S::from_f64(f64::from(y) - 1.0);
            for (j, cj) in c.iter_mut().enumerate() {
                *cj = *cj + w * dev[j];
            }
        }
        for cj in &mut c {
            *cj = *cj / nb;
        }
        for j in 0..d {
            for k in j..d {
                let v = ij.get(j, k) + c[j] * c[k];
                ij.set(j, k, v);
                ij.set(k, j, v);
            }
        }
    }
    let ij_bias = (nn - S::one()) / (nb * nb);
    for j in 0..d {
        for k in 0..d {
            ij.set(j, k, ij.get(j, k) - ij_bias * tree_ss.get(j, k));
        }
    }

    // JaB main term over rows with at least one OOB tree.
    let oob_means = forest.oob_means_at(per_tree_std);
    let mut jab = CovMatrix::zeros(d);
    let mut dropped = 0usize;
    for om in &oob_means {
        match om {
            None => dropped += 1,
            Some(m) => {
                for j in 0..d {
                    for k in j..d {
                        let v =
                            jab.get(j, k) + (m[j] - theta[j]) * (m[k] - theta[k]);
                        jab.set(j, k, v);
                        jab.set(k, j, v);
                    }
                }
            }
        }
    }
    if dropped == n {
        return Err(Error::Numerical(
            "jackknife-after-bootstrap: no training row is out-of-bag for any tree".into(),
        ));
    }
    let jab_front = (nn - S::one()) / nn;
    let jab_bias = (S::e() - S::one()) * (nn - S::one()) / (nb * nb);
    for j in 0..d {
        for k in 0..d {
            jab.set(
                j,
                k,
                jab_front * jab.get(j, k) - jab_bias * tree_ss.get(j, k),
            );
        }
    }

    // Average, de-standardize all three, clamp the averaged diagonal.
    let scales = forest.standardizer().scales();
    let mut averaged = CovMatrix::zeros(d);
    for j in 0..d {
        for k in 0..d {
            averaged.set(j, k, (ij.get(j, k) + jab.get(j, k)) / S::two());
        }
    }
    for m in [&mut ij, &mut jab, &mut averaged] {
        for j in 0..d {
            for k in 0..d {
                m.set(j, k, m.get(j, k) * scales[j] * scales[k]);
            }
        }
    }
    let floor = S::from_f64(JACKKNIFE_VARIANCE_FLOOR);
    let mut clamped = false;
    for j in 0..d {
        if averaged.get(j, j) < S::zero() {
            averaged.set(j, j, floor);
            clamped = true;
        }
    }

    Ok(JackknifeCovariance {
        ij,
        jab,
        averaged,
        dropped_rows: dropped,
        clamped_diagonal: clamped,
    })
}

/// ρ̂_jk = Cov_J(j,k) / √(V_J(j)·V_J(k)) from the averaged jackknife
/// matrix, clamped to the unit interval; at-floor variances force ρ̂ = 0.
pub fn jackknife_correlation<S: Scalar>(
    forest: &TrainedForest<S>,
    input: &[FeatureValue<S>],
) -> Result<CovMatrix<S>> {
    let jk = jackknife_covariance(forest, input)?;
    Ok(correlation_of(&jk.averaged))
}

fn correlation_of<S: Scalar>(cov: &CovMatrix<S>) -> CovMatrix<S> {
    let d = cov.dim();
    let floor = S::from_f64(JACKKNIFE_VARIANCE_FLOOR);
    let mut rho = CovMatrix::identity(d);
    for j in 0..d {
        for k in (j + 1)..d {
            let vj = cov.get(j, j);
            let vk = cov.get(k, k);
            let v = if vj <= floor || vk <= floor {
                S::zero()
            } else {
                (cov.get(j, k) / (vj * vk).sqrt())
                    .min(S::one())
                    .max(-S::one())
            };
            rho.set(j, k, v);
            rho.set(k, j, v);
        }
    }
    reconcile_correlation(rho)
}

/// Entry-wise clamped jackknife correlations need not be jointly
/// consistent (e.g. ρ₀₂ = ρ₁₂ = 1 with ρ₀₁ < 1 has no PSD completion), and
/// a covariance built from such a matrix cannot be factored at any
/// reasonable jitter. Shrink toward the identity, escalating, until the
/// matrix factors; the unit diagonal is preserved.
fn reconcile_correlation<S: Scalar>(rho: CovMatrix<S>) -> CovMatrix<S> {
    if rho.cholesky().is_ok() {
        return rho;
    }
    let d = rho.dim();
    let mut shrink = S::from_f64(1e-9);
    loop {
        let keep = (S::one() - shrink).max(S::zero());
        let mut m = CovMatrix::identity(d);
        for j in 0..d {
            for k in (j + 1)..d {
                let v = keep * rho.get(j, k);
                m.set(j, k, v);
                m.set(k, j, v);
            }
        }
        if m.cholesky().is_ok() || keep == S::zero() {
            return m;
        }
        shrink = shrink * S::from_f64(10.0);
    }
}

/// Mean vector and recalibrated covariance at one input, original units:
/// the N(θ̂(x), Σ̂(x)) returned for every prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDistribution<S> {
    pub mean: Vec<S>,
    pub cov: CovMatrix<S>,
    /// Dimensionless correlation matrix used to build `cov`.
    pub correlation: CovMatrix<S>,
}

impl<S: Scalar> PredictionDistribution<S> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Assemble from per-output standard deviations and a correlation
    /// matrix: Σ_jk = ρ_jk σ_j σ_k.
    pub fn from_sigma_and_correlation(
        mean: Vec<S>,
        sigma: &[S],
        correlation: CovMatrix<S>,
    ) -> Self {
        let d = mean.len();
        let mut cov = CovMatrix::zeros(d);
        for j in 0..d {
            for k in 0..d {
                cov.set(j, k, correlation.get(j, k) * sigma[j] * sigma[k]);
            }
        }
        Self {
            mean,
            cov,
            correlation,
        }
    }
}

/// Full prediction distribution at `input` with the correlation estimated
/// by `method`. `TrainingData` requires the precomputed training
/// correlation matrix.
pub fn prediction_distribution<S: Scalar>(
    forest: &TrainedForest<S>,
    input: &[FeatureValue<S>],
    method: CorrelationMethod,
    train_corr: Option<&CovMatrix<S>>,
) -> Result<PredictionDistribution<S>> {
    let alpha = forest
        .recalibration()
        .ok_or_else(|| Error::Calibration("forest has no recalibration factor set".into()))?;
    let per_tree = forest.predict_per_tree_std(input)?;
    let d = per_tree.n_cols();

    let rho = match method {
        CorrelationMethod::Trivial => CovMatrix::identity(d),
        CorrelationMethod::TrainingData => {
            let rc = train_corr.ok_or_else(|| {
                Error::Domain("TrainingData method requires a training correlation".into())
            })?;
            if rc.dim() != d {
                return Err(Error::Domain(format!(
                    "training correlation dim {} vs {d} outputs",
                    rc.dim()
                )));
            }
            rc.clone()
        }
        CorrelationMethod::Jackknife => {
            let jk = jackknife_covariance_from(forest, &per_tree)?;
            correlation_of(&jk.averaged)
        }
        CorrelationMethod::Bootstrap => bootstrap_correlation(&per_tree)?,
    };

    let mut sigma = recalibrated_sigma_from(&per_tree, alpha);
    for (s, &scale) in sigma.iter_mut().zip(forest.standardizer().scales()) {
        *s = *s * scale;
    }
    let mut mean = per_tree.column_means();
    forest.standardizer().restore(&mut mean);
    Ok(PredictionDistribution::from_sigma_and_correlation(
        mean, &sigma, rho,
    ))
}

/// Unconditional interval from raw OOB residuals: the same half-width at
/// every input.
#[derive(Debug, Clone, PartialEq)]
pub struct OobConstantInterval<S> {
    /// p-percentile of |θ̂₍₋ᵢ₎ − yᵢ| per output, original units.
    pub half_width: Vec<S>,
    /// half_width / η(p): the σ-equivalent used when scoring this baseline
    /// with distribution metrics.
    pub sigma: Vec<S>,
    pub p: S,
}

/// OOB-constant baseline: percentile of the raw (unstandardized-by-ŝ)
/// absolute OOB residuals, applied identically at every input.
pub fn oob_constant_interval<S: Scalar>(
    forest: &TrainedForest<S>,
    p: S,
) -> Result<OobConstantInterval<S>> {
    let set = oob_records(forest)?;
    let d = forest.n_outputs();
    let eta = normal_quantile((S::one() + p) / S::two())?;
    let scales = forest.standardizer().scales();
    let mut half_width = Vec::with_capacity(d);
    for j in 0..d {
        let raw: Vec<S> = set
            .records
            .iter()
            .map(|r| r.abs_residual[j] * scales[j])
            .collect();
        half_width.push(percentile(&raw, p)?);
    }
    let sigma = half_width.iter().map(|&w| w / eta).collect();
    Ok(OobConstantInterval {
        half_width,
        sigma,
        p,
    })
}

impl<S: Scalar> OobConstantInterval<S> {
    /// Prediction distribution for this baseline at one input: the forest
    /// mean with the constant per-output σ and no correlation.
    pub fn distribution(
        &self,
        forest: &TrainedForest<S>,
        input: &[FeatureValue<S>],
    ) -> Result<PredictionDistribution<S>> {
        let mean = forest.predict_mean(input)?;
        let d = mean.len();
        Ok(PredictionDistribution::from_sigma_and_correlation(
            mean,
            &self.sigma,
            CovMatrix::identity(d),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_friedman_grosse, NoiseSpec};
    use crate::ensemble::fit_forest;
    use crate::stats::RngStream;

    fn records_from_residuals(residuals: &[f64]) -> Vec<OobRecord<f64>> {
        residuals
            .iter()
            .enumerate()
            .map(|(i, &r)| OobRecord {
                row: i,
                oob_mean: vec![0.0],
                oob_std: vec![1.0],
                std_residual: vec![r],
                abs_residual: vec![r],
            })
            .collect()
    }

    #[test]
    fn constant_residuals_give_ratio_alpha() {
        let recs = records_from_residuals(&[2.0; 12]);
        let f = recalibration_factor(&recs, 0.683).unwrap();
        let want = 2.0 / 1.0006418287624494;
        assert!((f.alpha[0] - want).abs() < 1e-9, "{}", f.alpha[0]);
        assert_eq!(f.usable_rows, 12);
        assert!(!f.clamped);
    }

    #[test]
    fn hand_percentile_alpha() {
        let recs = records_from_residuals(&[0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]);
        let f = recalibration_factor(&recs, 0.5).unwrap();
        // r̃_0.5 = 2.25, η(0.5) = 0.6744897501960817
        let want = 2.25 / 0.6744897501960817;
        assert!((f.alpha[0] - want).abs() < 1e-12, "{}", f.alpha[0]);
        assert!((f.alpha[0] - 3.3358549916376042).abs() < 1e-12);
    }

    #[test]
    fn half_normal_grid_alpha_approaches_one() {
        // residuals placed exactly at half-normal quantiles
        let n = 4001;
        let residuals: Vec<f64> = (0..n)
            .map(|i| {
                let q = (i as f64 + 0.5) / n as f64;
                normal_quantile((1.0 + q) / 2.0).unwrap()
            })
            .collect();
        let recs = records_from_residuals(&residuals);
        for p in [0.3, 0.5, 0.683, 0.9] {
            let f = recalibration_factor(&recs, p).unwrap();
            assert!((f.alpha[0] - 1.0).abs() < 1e-3, "p={p}: {}", f.alpha[0]);
        }
    }

    #[test]
    fn too_few_records_is_calibration_error() {
        let recs = records_from_residuals(&[1.0; 7]);
        assert!(matches!(
            recalibration_factor(&recs, 0.683),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn all_zero_residuals_clamp_alpha() {
        let recs = records_from_residuals(&[0.0; 10]);
        let f = recalibration_factor(&recs, 0.683).unwrap();
        assert_eq!(f.alpha[0], 1e-6);
        assert!(f.clamped);
    }

    #[test]
    fn zero_spread_records_are_excluded() {
        let mut recs = records_from_residuals(&[1.0; 10]);
        // two zero-spread records whose residual would poison the tail
        for rec in recs.iter_mut().take(2) {
            rec.oob_std = vec![0.0];
            rec.std_residual = vec![f64::NAN];
        }
        let f = recalibration_factor(&recs, 0.683).unwrap();
        assert_eq!(f.usable_rows, 8);
        assert!(f.alpha[0].is_finite());
    }

    #[test]
    fn alpha_invariant_under_record_reordering() {
        let residuals = [0.3, 2.2, 1.1, 0.9, 4.0, 0.2, 1.7, 2.9, 0.6, 1.3];
        let recs = records_from_residuals(&residuals);
        let mut rev: Vec<f64> = residuals.to_vec();
        rev.reverse();
        let recs_rev = records_from_residuals(&rev);
        let a = recalibration_factor(&recs, 0.683).unwrap();
        let b = recalibration_factor(&recs_rev, 0.683).unwrap();
        assert_eq!(a.alpha, b.alpha);
    }

    #[test]
    fn mle_factor_closed_form() {
        let recs = records_from_residuals(&[1.0; 9]);
        assert!((mle_recalibration_factor(&recs).unwrap()[0] - 1.0).abs() < 1e-12);

        let recs = records_from_residuals(&[1.0, 3.0, 1.0, 3.0, 1.0, 3.0, 1.0, 3.0]);
        let got = mle_recalibration_factor(&recs).unwrap()[0];
        assert!((got - 5.0f64.sqrt()).abs() < 1e-12, "{got}");
    }

    #[test]
    fn mle_factor_outlier_sensitivity() {
        // heavy outlier pulls the MLE far above the percentile factor
        let vals = [1.0, 1.0, 1.0, 10.0, 1.0, 1.0, 1.0, 10.0];
        let recs = records_from_residuals(&vals);
        let mle = mle_recalibration_factor(&recs).unwrap()[0];
        assert!((mle - 25.75f64.sqrt()).abs() < 1e-12, "{mle}");
        let pct = recalibration_factor(&recs, 0.683).unwrap().alpha[0];
        assert!(mle > 3.0 * pct, "mle {mle} vs percentile {pct}");
    }

    #[test]
    fn sigma_from_per_tree_hand_case() {
        // B = 2 tree predictions [1, 3], α = 2 -> 2·√2
        let per_tree = Matrix::from_rows(vec![vec![1.0], vec![3.0]]);
        let sigma = recalibrated_sigma_from(&per_tree, &[2.0]);
        assert!((sigma[0] - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);

        // identical trees -> 0
        let per_tree = Matrix::from_rows(vec![vec![5.0], vec![5.0], vec![5.0]]);
        assert_eq!(recalibrated_sigma_from(&per_tree, &[2.0])[0], 0.0);

        // α = 1 reduces to the plain bootstrap standard deviation
        let per_tree = Matrix::from_rows(vec![vec![1.0], vec![2.0], vec![4.0]]);
        let want = sample_std(&[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(recalibrated_sigma_from(&per_tree, &[1.0])[0], want);
    }

    #[test]
    fn bootstrap_correlation_cases() {
        let one_d = Matrix::from_rows(vec![vec![1.0], vec![2.0]]);
        let rho = bootstrap_correlation(&one_d).unwrap();
        assert_eq!(rho.dim(), 1);
        assert_eq!(rho.get(0, 0), 1.0);

        let dup = Matrix::from_rows(vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]);
        assert_eq!(bootstrap_correlation(&dup).unwrap().get(0, 1), 1.0);

        let anti = Matrix::from_rows(vec![vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0]]);
        assert_eq!(bootstrap_correlation(&anti).unwrap().get(0, 1), -1.0);

        let degen = Matrix::from_rows(vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]);
        let rho = bootstrap_correlation(&degen).unwrap();
        assert_eq!(rho.get(0, 1), 0.0);
        assert_eq!(rho.get(1, 1), 1.0);
    }

    #[test]
    fn identical_trees_zero_jackknife() {
        // constant-output dataset: every tree predicts the constant
        let data = crate::datasets::Dataset::new(
            vec![crate::datasets::InputColumn::real("x")],
            vec!["y".into()],
            (0..16)
                .map(|i| vec![FeatureValue::Real(i as f64)])
                .collect(),
            Matrix::from_rows(vec![vec![3.0]; 16]),
            "const",
        )
        .unwrap();
        let f = fit_forest(&data, 8, RngStream::new(1)).unwrap();
        let jk = jackknife_covariance(&f, &[FeatureValue::Real(0.5)]).unwrap();
        assert_eq!(jk.ij.get(0, 0), 0.0);
        assert_eq!(jk.jab.get(0, 0), 0.0);
        assert_eq!(jk.averaged.get(0, 0), 0.0);
    }

    #[test]
    fn jackknife_correlation_univariate_is_identity() {
        let data = gen_friedman_grosse(32, NoiseSpec::new(1.0).unwrap(), RngStream::new(40))
            .unwrap();
        let f = fit_forest(&data, 16, RngStream::new(41)).unwrap();
        let rho = jackknife_correlation(&f, data.input_row(0)).unwrap();
        assert_eq!(rho.dim(), 1);
        assert_eq!(rho.get(0, 0), 1.0);
    }

    #[test]
    fn bootstrap_covariance_is_symmetric_and_psd_before_repair() {
        let data = gen_friedman_grosse(64, NoiseSpec::new(2.0).unwrap(), RngStream::new(42))
            .unwrap();
        let data =
            crate::datasets::add_linear_correlated_output(&data, 0.9, RngStream::new(43))
                .unwrap();
        let data = crate::datasets::add_quadratic_output(&data, 0.5, RngStream::new(44))
            .unwrap();
        let mut f = fit_forest(&data, 32, RngStream::new(45)).unwrap();
        calibrate_forest(&mut f, 0.683).unwrap();
        for i in 0..16 {
            let dist =
                prediction_distribution(&f, data.input_row(i), CorrelationMethod::Bootstrap, None)
                    .unwrap();
            assert!(dist.cov.is_symmetric(1e-12));
            // a scaled sample covariance factors without any repair
            dist.cov.cholesky().unwrap();
        }
    }

    #[test]
    fn trivial_distribution_has_zero_off_diagonals() {
        let data = gen_friedman_grosse(32, NoiseSpec::new(1.0).unwrap(), RngStream::new(2))
            .unwrap();
        let data = crate::datasets::add_linear_correlated_output(&data, 0.9, RngStream::new(3))
            .unwrap();
        let mut f = fit_forest(&data, 16, RngStream::new(4)).unwrap();
        calibrate_forest(&mut f, 0.683).unwrap();
        let dist =
            prediction_distribution(&f, data.input_row(0), CorrelationMethod::Trivial, None)
                .unwrap();
        assert_eq!(dist.cov.get(0, 1), 0.0);
        assert_eq!(dist.cov.get(1, 0), 0.0);
        assert!(dist.cov.get(0, 0) > 0.0);
    }

    #[test]
    fn bootstrap_distribution_univariate_reduces_to_sigma_squared() {
        let data = gen_friedman_grosse(32, NoiseSpec::new(1.0).unwrap(), RngStream::new(5))
            .unwrap();
        let mut f = fit_forest(&data, 16, RngStream::new(6)).unwrap();
        calibrate_forest(&mut f, 0.683).unwrap();
        let x = data.input_row(3);
        let dist =
            prediction_distribution(&f, x, CorrelationMethod::Bootstrap, None).unwrap();
        let sigma: Vec<f64> = recalibrated_sigma(&f, x).unwrap();
        assert!((dist.cov.get(0, 0) - sigma[0] * sigma[0]).abs() < 1e-12);
    }

    #[test]
    fn training_data_method_requires_matrix() {
        let data = gen_friedman_grosse(32, NoiseSpec::new(1.0).unwrap(), RngStream::new(7))
            .unwrap();
        let mut f = fit_forest(&data, 16, RngStream::new(8)).unwrap();
        calibrate_forest(&mut f, 0.683).unwrap();
        assert!(prediction_distribution(
            &f,
            data.input_row(0),
            CorrelationMethod::TrainingData,
            None
        )
        .is_err());
        let rho = training_data_correlation(&f).unwrap();
        prediction_distribution(&f, data.input_row(0), CorrelationMethod::TrainingData, Some(&rho))
            .unwrap();
    }

    #[test]
    fn uncalibrated_forest_is_an_error() {
        let data = gen_friedman_grosse(32, NoiseSpec::new(1.0).unwrap(), RngStream::new(9))
            .unwrap();
        let f = fit_forest(&data, 16, RngStream::new(10)).unwrap();
        assert!(matches!(
            prediction_distribution(&f, data.input_row(0), CorrelationMethod::Bootstrap, None),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn oob_constant_interval_hand_percentile() {
        // unit-scale forest so standardized == original residual scale is
        // exercised through the real pipeline instead
        let data = gen_friedman_grosse(64, NoiseSpec::new(2.0).unwrap(), RngStream::new(11))
            .unwrap();
        let f = fit_forest(&data, 32, RngStream::new(12)).unwrap();
        let itv = oob_constant_interval(&f, 0.5).unwrap();
        // must equal the hand percentile of the raw residuals
        let set = oob_records(&f).unwrap();
        let scale = f.standardizer().scales()[0];
        let raw: Vec<f64> = set.records.iter().map(|r| r.abs_residual[0] * scale).collect();
        let want = percentile(&raw, 0.5).unwrap();
        assert_eq!(itv.half_width[0], want);
        assert!((itv.sigma[0] - want / 0.6744897501960817).abs() < 1e-10);
    }

    #[test]
    fn oob_constant_width_is_input_independent() {
        let data = gen_friedman_grosse(64, NoiseSpec::new(2.0).unwrap(), RngStream::new(13))
            .unwrap();
        let f = fit_forest(&data, 32, RngStream::new(14)).unwrap();
        let itv = oob_constant_interval(&f, 0.683).unwrap();
        let d0 = itv.distribution(&f, data.input_row(0)).unwrap();
        let d1 = itv.distribution(&f, data.input_row(1)).unwrap();
        assert_eq!(d0.cov, d1.cov);
    }
}
