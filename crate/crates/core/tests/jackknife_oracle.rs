//! Brute-force cross-checks of the bias-corrected jackknife covariance:
//! a from-first-principles re-computation on a tiny forest, and a scalar
//! (univariate, loop-by-loop) re-implementation checked against the matrix
//! diagonal. Both are written independently of the library's internals.

use calibag::datasets::{add_linear_correlated_output, gen_friedman_grosse, Dataset, NoiseSpec};
use calibag::ensemble::{fit_forest, TrainedForest};
use calibag::intervals::jackknife_covariance;
use calibag::stats::RngStream;
use calibag::tree::FeatureValue;

/// Independent brute-force IJ/JaB for output pair (j, k), original units.
fn brute_force_jackknife(
    forest: &TrainedForest<f64>,
    input: &[FeatureValue<f64>],
    j: usize,
    k: usize,
) -> (f64, f64) {
    let per_tree = forest.predict_per_tree_std(input).unwrap();
    let b = per_tree.n_rows();
    let n = forest.n_train();
    let counts = forest.bag_counts();

    let mean_of = |col: usize| -> f64 {
        (0..b).map(|bi| per_tree.get(bi, col)).sum::<f64>() / b as f64
    };
    let theta_j = mean_of(j);
    let theta_k = mean_of(k);

    // Cov over bags of (Y_bi, t_b·) with the known means 1 and θ̂.
    let cov_star = |row: usize, col: usize, theta: f64| -> f64 {
        (0..b)
            .map(|bi| {
                (f64::from(counts.count(bi, row)) - 1.0) * (per_tree.get(bi, col) - theta)
            })
            .sum::<f64>()
            / b as f64
    };
    let ij_main: f64 = (0..n)
        .map(|i| cov_star(i, j, theta_j) * cov_star(i, k, theta_k))
        .sum();
    let tree_ss: f64 = (0..b)
        .map(|bi| (per_tree.get(bi, j) - theta_j) * (per_tree.get(bi, k) - theta_k))
        .sum();
    let ij = ij_main - (n as f64 - 1.0) / b as f64 * (tree_ss / b as f64);

    // JaB over rows with at least one OOB bag.
    let mut jab_main = 0.0;
    for i in 0..n {
        let oob: Vec<usize> = (0..b).filter(|&bi| counts.count(bi, i) == 0).collect();
        if oob.is_empty() {
            continue;
        }
        let mj = oob.iter().map(|&bi| per_tree.get(bi, j)).sum::<f64>() / oob.len() as f64;
        let mk = oob.iter().map(|&bi| per_tree.get(bi, k)).sum::<f64>() / oob.len() as f64;
        jab_main += (mj - theta_j) * (mk - theta_k);
    }
    let e = std::f64::consts::E;
    let jab = (n as f64 - 1.0) / n as f64 * jab_main
        - (e - 1.0) * (n as f64 - 1.0) / b as f64 * (tree_ss / b as f64);

    let scales = forest.standardizer().scales();
    (ij * scales[j] * scales[k], jab * scales[j] * scales[k])
}

#[test]
fn three_row_four_bag_hand_example_matches_brute_force() {
    let data: Dataset<f64> =
        gen_friedman_grosse(3, NoiseSpec::new(1.0).unwrap(), RngStream::new(17)).unwrap();
    let forest = fit_forest(&data, 4, RngStream::new(18)).unwrap();
    let x = data.input_row(1);
    let jk = jackknife_covariance(&forest, x).unwrap();
    let (ij, jab) = brute_force_jackknife(&forest, x, 0, 0);
    assert!((jk.ij.get(0, 0) - ij).abs() < 1e-12, "{} vs {ij}", jk.ij.get(0, 0));
    assert!(
        (jk.jab.get(0, 0) - jab).abs() < 1e-12,
        "{} vs {jab}",
        jk.jab.get(0, 0)
    );
    let avg = (ij + jab) / 2.0;
    if avg >= 0.0 {
        assert!((jk.averaged.get(0, 0) - avg).abs() < 1e-12);
    }
}

#[test]
fn multi_output_brute_force_agreement() {
    let base: Dataset<f64> =
        gen_friedman_grosse(24, NoiseSpec::new(2.0).unwrap(), RngStream::new(19)).unwrap();
    let data = add_linear_correlated_output(&base, 0.9, RngStream::new(20)).unwrap();
    let forest = fit_forest(&data, 16, RngStream::new(21)).unwrap();
    for point in 0..4 {
        let x = data.input_row(point);
        let jk = jackknife_covariance(&forest, x).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let (ij, jab) = brute_force_jackknife(&forest, x, j, k);
                let scale = ij.abs().max(1e-9);
                assert!(
                    (jk.ij.get(j, k) - ij).abs() < 1e-10 * scale.max(1.0),
                    "IJ[{j}][{k}] at point {point}: {} vs {ij}",
                    jk.ij.get(j, k)
                );
                let scale = jab.abs().max(1e-9);
                assert!(
                    (jk.jab.get(j, k) - jab).abs() < 1e-10 * scale.max(1.0),
                    "JaB[{j}][{k}] at point {point}: {} vs {jab}",
                    jk.jab.get(j, k)
                );
            }
        }
    }
}

/// Univariate jackknife written as independent scalar code, used to pin
/// the matrix diagonal: fit a two-output forest, compute each output's
/// variance with the scalar routine, compare to the matrix diagonal.
#[test]
fn scalar_and_matrix_jackknife_diagonals_agree() {
    let base: Dataset<f64> =
        gen_friedman_grosse(48, NoiseSpec::new(2.0).unwrap(), RngStream::new(22)).unwrap();
    let data = add_linear_correlated_output(&base, 0.5, RngStream::new(23)).unwrap();
    let forest = fit_forest(&data, 32, RngStream::new(24)).unwrap();

    for point in 0..8 {
        let x = data.input_row(point);
        let jk = jackknife_covariance(&forest, x).unwrap();
        let per_tree = forest.predict_per_tree_std(x).unwrap();
        let b = per_tree.n_rows() as f64;
        let n = forest.n_train() as f64;
        for out in 0..2 {
            // scalar variance path
            let t: Vec<f64> = per_tree.column(out);
            let theta = t.iter().sum::<f64>() / b;
            let mut ij_main = 0.0;
            for i in 0..forest.n_train() {
                let mut c = 0.0;
                for (bi, &tb) in t.iter().enumerate() {
                    c += (f64::from(forest.bag_counts().count(bi, i)) - 1.0) * (tb - theta);
                }
                c /= b;
                ij_main += c * c;
            }
            let ss: f64 = t.iter().map(|&tb| (tb - theta) * (tb - theta)).sum();
            let ij_scalar = ij_main - (n - 1.0) / b * (ss / b);

            let mut jab_main = 0.0;
            for i in 0..forest.n_train() {
                let oob: Vec<f64> = t
                    .iter()
                    .enumerate()
                    .filter(|&(bi, _)| forest.bag_counts().count(bi, i) == 0)
                    .map(|(_, &tb)| tb)
                    .collect();
                if oob.is_empty() {
                    continue;
                }
                let m = oob.iter().sum::<f64>() / oob.len() as f64;
                jab_main += (m - theta) * (m - theta);
            }
            let jab_scalar = (n - 1.0) / n * jab_main
                - (std::f64::consts::E - 1.0) * (n - 1.0) / b * (ss / b);

            let scale = forest.standardizer().scales()[out];
            let ij_scalar = ij_scalar * scale * scale;
            let jab_scalar = jab_scalar * scale * scale;

            let tol = 1e-10 * ij_scalar.abs().max(1.0);
            assert!(
                (jk.ij.get(out, out) - ij_scalar).abs() < tol,
                "IJ diag output {out} point {point}"
            );
            let tol = 1e-10 * jab_scalar.abs().max(1.0);
            assert!(
                (jk.jab.get(out, out) - jab_scalar).abs() < tol,
                "JaB diag output {out} point {point}"
            );
        }
    }
}

#[test]
fn duplicated_output_has_near_unit_jackknife_correlation() {
    // output 1 is a positive rescaling of output 0 (rho = 1 construction):
    // wherever the bias-corrected variance stays above the floor, the
    // jackknife correlation must be 1 within 0.05; at-floor points report 0
    let base: Dataset<f64> =
        gen_friedman_grosse(128, NoiseSpec::new(1.0).unwrap(), RngStream::new(25)).unwrap();
    let data = add_linear_correlated_output(&base, 1.0, RngStream::new(26)).unwrap();
    let forest = fit_forest(&data, 64, RngStream::new(27)).unwrap();
    let test: Dataset<f64> =
        gen_friedman_grosse(64, NoiseSpec::none(), RngStream::new(28)).unwrap();
    let mut at_floor = 0usize;
    for i in 0..test.n_rows() {
        let rho = calibag::intervals::jackknife_correlation(&forest, test.input_row(i)).unwrap();
        let r = rho.get(0, 1);
        if r == 0.0 {
            at_floor += 1;
        } else {
            assert!((r - 1.0).abs() < 0.05, "point {i}: {r}");
        }
    }
    assert!(
        at_floor <= test.n_rows() * 3 / 10,
        "{at_floor}/64 points clamped to the variance floor"
    );
}

#[test]
fn independent_noise_outputs_have_small_mean_jackknife_correlation() {
    // two pure-noise outputs: correlation centered near zero, loosely
    let n = 128;
    let mut rng = RngStream::new(29).rng();
    use rand::Rng;
    let rows: Vec<Vec<FeatureValue<f64>>> = (0..n)
        .map(|_| (0..4).map(|_| FeatureValue::Real(rng.gen::<f64>())).collect())
        .collect();
    let outs: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            vec![
                rng.gen::<f64>() * 2.0 - 1.0,
                rng.gen::<f64>() * 2.0 - 1.0,
            ]
        })
        .collect();
    let cols = (0..4)
        .map(|i| calibag::datasets::InputColumn::real(format!("x{i}")))
        .collect();
    let data = Dataset::new(
        cols,
        vec!["a".into(), "b".into()],
        rows,
        calibag::stats::Matrix::from_rows(outs),
        "noise",
    )
    .unwrap();
    let forest = fit_forest(&data, 64, RngStream::new(30)).unwrap();

    let mut acc_abs = 0.0;
    let mut acc = 0.0;
    let m = 64;
    let mut rng2 = RngStream::new(31).rng();
    for _ in 0..m {
        let x: Vec<FeatureValue<f64>> =
            (0..4).map(|_| FeatureValue::Real(rng2.gen::<f64>())).collect();
        let rho = calibag::intervals::jackknife_correlation(&forest, &x).unwrap();
        acc_abs += rho.get(0, 1).abs();
        acc += rho.get(0, 1);
    }
    let mean_abs = acc_abs / m as f64;
    let mean_signed = acc / m as f64;
    // the estimator is noisy point-to-point but must not manufacture a
    // systematic correlation, and must sit far below the duplicated-output
    // case above
    assert!(mean_abs < 0.65, "mean |jackknife correlation| {mean_abs}");
    assert!(mean_signed.abs() < 0.4, "mean jackknife correlation {mean_signed}");
}
