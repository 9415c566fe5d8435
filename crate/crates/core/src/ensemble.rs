//! Bagging driver: draws bootstrap samples, fits trees in parallel, records
//! the bag-count matrix, and serves per-tree, mean, and out-of-bag
//! predictions.

use crate::datasets::{Dataset, InputColumn, Standardizer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{Matrix, RngStream};
use crate::tree::{fit_tree, predict_tree, FeatureValue, TreeModel, TreeRow};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// B×N matrix of bag multiplicities: entry (b, i) counts how many times
/// training row i was drawn into bag b. Zero means the row is out-of-bag
/// for that tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagCounts {
    n_bags: usize,
    n_train: usize,
    counts: Vec<u32>,
}

impl BagCounts {
    fn draw(n_bags: usize, n_train: usize, stream: RngStream) -> Self {
        let mut counts = vec![0u32; n_bags * n_train];
        for b in 0..n_bags {
            let mut rng = stream.substream(b as u64).rng();
            let row = &mut counts[b * n_train..(b + 1) * n_train];
            for _ in 0..n_train {
                let i = rng.gen_range(0..n_train);
                row[i] += 1;
            }
        }
        Self {
            n_bags,
            n_train,
            counts,
        }
    }

    pub fn n_bags(&self) -> usize {
        self.n_bags
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn count(&self, bag: usize, row: usize) -> u32 {
        self.counts[bag * self.n_train + row]
    }

    pub fn bag_row(&self, bag: usize) -> &[u32] {
        &self.counts[bag * self.n_train..(bag + 1) * self.n_train]
    }

    /// Bags for which `row` is out-of-bag.
    pub fn oob_bags(&self, row: usize) -> Vec<usize> {
        (0..self.n_bags).filter(|&b| self.count(b, row) == 0).collect()
    }

    /// Fraction of (bag, row) entries that are zero; ≈ e⁻¹ for honest
    /// bootstrap draws.
    pub fn zero_fraction(&self) -> f64 {
        let zeros = self.counts.iter().filter(|&&c| c == 0).count();
        zeros as f64 / self.counts.len() as f64
    }
}

/// Bagged multi-output forest plus everything the interval estimators
/// need: bag counts, the standardizer, standardized training outputs, and
/// (once calibrated) per-output recalibration factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest<S> {
    trees: Vec<TreeModel<S>>,
    bag_counts: BagCounts,
    n_train: usize,
    input_columns: Vec<InputColumn>,
    output_names: Vec<String>,
    standardizer: Standardizer<S>,
    /// Training inputs, kept for out-of-bag evaluation.
    training_inputs: Vec<Vec<FeatureValue<S>>>,
    /// Standardized training outputs, N×d.
    training_outputs: Matrix<S>,
    /// Per-output recalibration factor α, set by the intervals module
    /// before any interval query.
    recalibration: Option<Vec<S>>,
    /// Confidence level the recalibration was computed at.
    recalibration_p: Option<S>,
    /// Training rows that appear in every bag (OOB for zero trees).
    rows_never_oob: Vec<usize>,
}

/// Fit a forest of B full-depth trees on bootstrap resamples.
///
/// Bag draws are derived per-bag from the stream, and trees fit in
/// parallel; the result is identical to sequential execution.
pub fn fit_forest<S: Scalar>(
    data: &Dataset<S>,
    n_bags: usize,
    stream: RngStream,
) -> Result<TrainedForest<S>> {
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::Domain(format!("fit_forest needs N >= 2 rows, got {n}")));
    }
    if n_bags < 2 {
        return Err(Error::Domain(format!("fit_forest needs B >= 2 bags, got {n_bags}")));
    }

    let standardizer = Standardizer::fit(data.outputs())?;
    let std_outputs = standardizer.standardize(data.outputs());
    let bag_counts = BagCounts::draw(n_bags, n, stream);

    let trees: Vec<TreeModel<S>> = (0..n_bags)
        .into_par_iter()
        .map(|b| {
            let mut rows: Vec<TreeRow<'_, S>> = Vec::with_capacity(n);
            for i in 0..n {
                for _ in 0..bag_counts.count(b, i) {
                    rows.push(TreeRow {
                        input: data.input_row(i),
                        output: std_outputs.row(i),
                    });
                }
            }
            fit_tree(&rows)
        })
        .collect::<Result<_>>()?;

    let rows_never_oob: Vec<usize> = (0..n)
        .filter(|&i| (0..n_bags).all(|b| bag_counts.count(b, i) > 0))
        .collect();

    Ok(TrainedForest {
        trees,
        bag_counts,
        n_train: n,
        input_columns: data.input_columns().to_vec(),
        output_names: data.output_names().to_vec(),
        standardizer,
        training_inputs: (0..n).map(|i| data.input_row(i).to_vec()).collect(),
        training_outputs: std_outputs,
        recalibration: None,
        recalibration_p: None,
        rows_never_oob,
    })
}

impl<S: Scalar> TrainedForest<S> {
    pub fn n_bags(&self) -> usize {
        self.trees.len()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_outputs(&self) -> usize {
        self.training_outputs.n_cols()
    }

    pub fn bag_counts(&self) -> &BagCounts {
        &self.bag_counts
    }

    pub fn standardizer(&self) -> &Standardizer<S> {
        &self.standardizer
    }

    pub fn training_outputs(&self) -> &Matrix<S> {
        &self.training_outputs
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn input_columns(&self) -> &[InputColumn] {
        &self.input_columns
    }

    pub fn rows_never_oob(&self) -> &[usize] {
        &self.rows_never_oob
    }

    pub fn recalibration(&self) -> Option<&[S]> {
        self.recalibration.as_deref()
    }

    pub fn recalibration_p(&self) -> Option<S> {
        self.recalibration_p
    }

    /// Install per-output recalibration factors; a single-writer setup step
    /// before any concurrent interval queries.
    pub fn set_recalibration(&mut self, alpha: Vec<S>, p: S) -> Result<()> {
        if alpha.len() != self.n_outputs() {
            return Err(Error::Domain(format!(
                "{} recalibration factors for {} outputs",
                alpha.len(),
                self.n_outputs()
            )));
        }
        self.recalibration = Some(alpha);
        self.recalibration_p = Some(p);
        Ok(())
    }

    /// Per-tree predictions at `input`, standardized units, B×d.
    pub fn predict_per_tree_std(&self, input: &[FeatureValue<S>]) -> Result<Matrix<S>> {
        let d = self.n_outputs();
        let mut out = Matrix::zeros(self.trees.len(), d);
        for (b, tree) in self.trees.iter().enumerate() {
            let pred = predict_tree(tree, input)?;
            out.row_mut(b).copy_from_slice(pred);
        }
        Ok(out)
    }

    /// Per-tree predictions in original output units, B×d.
    pub fn predict_per_tree(&self, input: &[FeatureValue<S>]) -> Result<Matrix<S>> {
        let mut m = self.predict_per_tree_std(input)?;
        for b in 0..m.n_rows() {
            self.standardizer.restore(m.row_mut(b));
        }
        Ok(m)
    }

    /// Ensemble mean prediction in original output units.
    pub fn predict_mean(&self, input: &[FeatureValue<S>]) -> Result<Vec<S>> {
        let mut mean = self.predict_per_tree_std(input)?.column_means();
        self.standardizer.restore(&mut mean);
        Ok(mean)
    }

    /// Ensemble mean in standardized units.
    pub fn predict_mean_std(&self, input: &[FeatureValue<S>]) -> Result<Vec<S>> {
        Ok(self.predict_per_tree_std(input)?.column_means())
    }

    /// Out-of-bag prediction mean at `input` for each training row,
    /// standardized units; None for rows with no OOB tree. Used by the
    /// jackknife-after-bootstrap estimator.
    pub(crate) fn oob_means_at(
        &self,
        per_tree_std: &Matrix<S>,
    ) -> Vec<Option<Vec<S>>> {
        let d = self.n_outputs();
        (0..self.n_train)
            .map(|i| {
                let bags = self.bag_counts.oob_bags(i);
                if bags.is_empty() {
                    return None;
                }
                let nb = S::from_usize(bags.len());
                let mut mean = vec![S::zero(); d];
                for &b in &bags {
                    for (j, m) in mean.iter_mut().enumerate() {
                        *m = *m + per_tree_std.get(b, j);
                    }
                }
                for m in &mut mean {
                    *m = *m / nb;
                }
                Some(mean)
            })
            .collect()
    }

    /// Serialize the whole forest (schema, trees, bag counts, recalibration,
    /// standardizer) as JSON. Round-trips bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-training-row out-of-bag summary, standardized units.
#[derive(Debug, Clone, PartialEq)]
pub struct OobRecord<S> {
    pub row: usize,
    /// OOB ensemble mean θ̂₍₋ᵢ₎ per output.
    pub oob_mean: Vec<S>,
    /// OOB standard deviation ŝ₍₋ᵢ₎ per output (divisor Bᵢ − 1).
    pub oob_std: Vec<S>,
    /// |θ̂₍₋ᵢ₎ − yᵢ| / ŝ₍₋ᵢ₎ per output; NaN where ŝ = 0 (zero-spread,
    /// excluded from calibration percentiles).
    pub std_residual: Vec<S>,
    /// |θ̂₍₋ᵢ₎ − yᵢ| per output, standardized units.
    pub abs_residual: Vec<S>,
}

/// OOB records plus bookkeeping on what was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct OobSet<S> {
    pub records: Vec<OobRecord<S>>,
    /// Rows omitted for having fewer than 2 OOB trees.
    pub omitted_rows: usize,
    /// (row, output) pairs with exactly-zero OOB spread.
    pub zero_spread: usize,
}

/// Out-of-bag means, standard deviations, and standard residuals for every
/// training row with at least 2 OOB trees.
pub fn oob_records<S: Scalar>(forest: &TrainedForest<S>) -> Result<OobSet<S>> {
    let d = forest.n_outputs();
    let b_total = forest.n_bags();

    // Predictions of every tree on every training row, computed once.
    let per_row: Vec<Matrix<S>> = (0..forest.n_train)
        .into_par_iter()
        .map(|i| {
            let mut m = Matrix::zeros(b_total, d);
            for (b, tree) in forest.trees.iter().enumerate() {
                let pred = predict_tree(tree, &forest.training_inputs[i])?;
                m.row_mut(b).copy_from_slice(pred);
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(forest.n_train);
    let mut omitted = 0usize;
    let mut zero_spread = 0usize;
    for i in 0..forest.n_train {
        let oob = forest.bag_counts.oob_bags(i);
        if oob.len() < 2 {
            omitted += 1;
            continue;
        }
        let nb = S::from_usize(oob.len());
        let mut mean = vec![S::zero(); d];
        for &b in &oob {
            for (j, m) in mean.iter_mut().enumerate() {
                *m = *m + per_row[i].get(b, j);
            }
        }
        for m in &mut mean {
            *m = *m / nb;
        }
        let mut std = vec![S::zero(); d];
        for &b in &oob {
            for (j, s) in std.iter_mut().enumerate() {
                let dev = per_row[i].get(b, j) - mean[j];
                *s = *s + dev * dev;
            }
        }
        for s in &mut std {
            *s = (*s / (nb - S::one())).sqrt();
        }
        let y = forest.training_outputs.row(i);
        let abs_residual: Vec<S> = (0..d).map(|j| (mean[j] - y[j]).abs()).collect();
        let std_residual: Vec<S> = (0..d)
            .map(|j| {
                if std[j] > S::zero() {
                    abs_residual[j] / std[j]
                } else {
                    zero_spread += 1;
                    S::nan()
                }
            })
            .collect();
        records.push(OobRecord {
            row: i,
            oob_mean: mean,
            oob_std: std,
            std_residual,
            abs_residual,
        });
    }

    if records.len() < 8 {
        return Err(Error::Calibration(format!(
            "only {} training rows have >= 2 out-of-bag trees; recalibration would be meaningless",
            records.len()
        )));
    }
    Ok(OobSet {
        records,
        omitted_rows: omitted,
        zero_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_friedman_grosse, Dataset, NoiseSpec};
    use crate::stats::Matrix;

    fn constant_dataset(n: usize) -> Dataset<f64> {
        let rows = (0..n)
            .map(|i| vec![FeatureValue::Real(i as f64)])
            .collect();
        let outs = Matrix::from_rows(vec![vec![7.0]; n]);
        Dataset::new(
            vec![InputColumn::real("x")],
            vec!["y".into()],
            rows,
            outs,
            "const",
        )
        .unwrap()
    }

    #[test]
    fn bag_rows_sum_to_n() {
        let data = constant_dataset(2);
        let f = fit_forest(&data, 2, RngStream::new(3)).unwrap();
        for b in 0..2 {
            let total: u32 = f.bag_counts().bag_row(b).iter().sum();
            assert_eq!(total, 2);
        }
    }

    #[test]
    fn zero_fraction_near_inverse_e() {
        let data: Dataset<f64> =
            gen_friedman_grosse(128, NoiseSpec::none(), RngStream::new(5)).unwrap();
        let f = fit_forest(&data, 64, RngStream::new(6)).unwrap();
        let frac = f.bag_counts().zero_fraction();
        assert!((0.31..=0.42).contains(&frac), "zero fraction {frac}");
    }

    #[test]
    fn constant_outputs_predict_the_constant() {
        let data = constant_dataset(16);
        let f = fit_forest(&data, 8, RngStream::new(4)).unwrap();
        let per_tree = f.predict_per_tree(&[FeatureValue::Real(3.3)]).unwrap();
        for b in 0..per_tree.n_rows() {
            assert!((per_tree.get(b, 0) - 7.0).abs() < 1e-12);
        }
        let mean = f.predict_mean(&[FeatureValue::Real(100.0)]).unwrap();
        assert!((mean[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn mean_is_column_mean_of_per_tree() {
        let data: Dataset<f64> =
            gen_friedman_grosse(64, NoiseSpec::new(1.0).unwrap(), RngStream::new(7)).unwrap();
        let f = fit_forest(&data, 16, RngStream::new(8)).unwrap();
        let x = data.input_row(0);
        let mean = f.predict_mean(x).unwrap();
        let per_tree = f.predict_per_tree(x).unwrap();
        let col_mean = per_tree.column_means();
        for (a, b) in mean.iter().zip(col_mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn refit_same_seed_is_bit_identical() {
        let data: Dataset<f64> =
            gen_friedman_grosse(32, NoiseSpec::new(0.5).unwrap(), RngStream::new(9)).unwrap();
        let a = fit_forest(&data, 8, RngStream::new(10)).unwrap();
        let b = fit_forest(&data, 8, RngStream::new(10)).unwrap();
        assert_eq!(a.bag_counts(), b.bag_counts());
        assert_eq!(a, b);
    }

    #[test]
    fn oob_mean_uses_only_oob_trees() {
        let data: Dataset<f64> =
            gen_friedman_grosse(32, NoiseSpec::new(1.0).unwrap(), RngStream::new(11)).unwrap();
        let f = fit_forest(&data, 16, RngStream::new(12)).unwrap();
        let set = oob_records(&f).unwrap();
        for rec in &set.records {
            let i = rec.row;
            let oob = f.bag_counts().oob_bags(i);
            assert!(oob.len() >= 2);
            // recompute the OOB mean by hand from per-tree predictions
            let per_tree = f.predict_per_tree_std(data.input_row(i)).unwrap();
            for j in 0..f.n_outputs() {
                let m: f64 =
                    oob.iter().map(|&b| per_tree.get(b, j)).sum::<f64>() / oob.len() as f64;
                assert!((m - rec.oob_mean[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn never_oob_rows_are_omitted_and_counted() {
        // Tiny forest where some row is in every bag: craft it by searching
        // seeds; N=12, B=3 makes this common.
        let data: Dataset<f64> =
            gen_friedman_grosse(12, NoiseSpec::new(1.0).unwrap(), RngStream::new(1)).unwrap();
        let mut found = false;
        for seed in 0..200 {
            let f = fit_forest(&data, 3, RngStream::new(seed)).unwrap();
            if !f.rows_never_oob().is_empty() {
                found = true;
                let set = oob_records(&f);
                if let Ok(set) = set {
                    assert!(set.omitted_rows >= f.rows_never_oob().len());
                    for rec in &set.records {
                        assert!(!f.rows_never_oob().contains(&rec.row));
                    }
                }
                break;
            }
        }
        assert!(found, "no seed produced an always-in-bag row");
    }

    #[test]
    fn usable_rows_all_present_at_paper_scale() {
        let data: Dataset<f64> =
            gen_friedman_grosse(128, NoiseSpec::new(2.0).unwrap(), RngStream::new(13)).unwrap();
        let f = fit_forest(&data, 64, RngStream::new(14)).unwrap();
        let set = oob_records(&f).unwrap();
        assert_eq!(set.records.len(), 128);
        assert_eq!(set.omitted_rows, 0);
    }

    #[test]
    fn too_few_rows_is_a_calibration_error() {
        let data = constant_dataset(4);
        let f = fit_forest(&data, 4, RngStream::new(2)).unwrap();
        match oob_records(&f) {
            Err(Error::Calibration(_)) => {}
            other => panic!("expected calibration error, got {other:?}"),
        }
    }

    #[test]
    fn noiseless_fit_quality_smoke() {
        // test RMSE strictly below the spread of y itself
        let s = RngStream::new(60);
        let data: Dataset<f64> =
            gen_friedman_grosse(192, NoiseSpec::none(), s.substream(0)).unwrap();
        let train = data.subset(&(0..128).collect::<Vec<_>>());
        let test = data.subset(&(128..192).collect::<Vec<_>>());
        let f = fit_forest(&train, 64, s.substream(1)).unwrap();
        let mut sq = 0.0;
        for i in 0..test.n_rows() {
            let pred = f.predict_mean(test.input_row(i)).unwrap()[0];
            sq += (pred - test.output_row(i)[0]).powi(2);
        }
        let rmse = (sq / test.n_rows() as f64).sqrt();
        let y = test.outputs().column(0);
        let my = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        assert!(rmse < sd, "rmse {rmse} vs output sd {sd}");
    }

    #[test]
    fn zero_spread_records_are_counted() {
        // constant outputs: every OOB spread is exactly zero
        let data = constant_dataset(16);
        let f = fit_forest(&data, 8, RngStream::new(61)).unwrap();
        let set = oob_records(&f).unwrap();
        assert!(!set.records.is_empty());
        assert_eq!(set.zero_spread, set.records.len());
        for rec in &set.records {
            assert_eq!(rec.oob_std[0], 0.0);
            assert!(rec.std_residual[0].is_nan());
        }
        // and calibration on them refuses: no usable residuals
        assert!(crate::intervals::recalibration_factor(&set.records, 0.683).is_err());
    }

    #[test]
    fn serialization_round_trip_is_bit_exact() {
        let data: Dataset<f64> =
            gen_friedman_grosse(48, NoiseSpec::new(1.0).unwrap(), RngStream::new(15)).unwrap();
        let mut f = fit_forest(&data, 16, RngStream::new(16)).unwrap();
        f.set_recalibration(vec![1.25], 0.683).unwrap();
        let json = f.to_json().unwrap();
        let g = TrainedForest::<f64>::from_json(&json).unwrap();
        assert_eq!(f, g);
        let x = data.input_row(5);
        let a = f.predict_per_tree(x).unwrap();
        let b = g.predict_per_tree(x).unwrap();
        assert_eq!(a, b);
    }
}
