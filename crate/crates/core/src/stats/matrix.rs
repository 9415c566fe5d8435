//! Small dense matrices: a rectangular row-major matrix and a symmetric
//! covariance matrix with tolerant Cholesky factorization and PSD repair.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Row-major rectangular matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let n = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * cols);
        for r in &rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: n, cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Per-column arithmetic means.
    pub fn column_means(&self) -> Vec<S> {
        let n = S::from_usize(self.rows);
        let mut m = vec![S::zero(); self.cols];
        for i in 0..self.rows {
            for (j, mj) in m.iter_mut().enumerate() {
                *mj = *mj + self.get(i, j);
            }
        }
        for mj in &mut m {
            *mj = *mj / n;
        }
        m
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks_exact(self.cols.max(1))
    }
}

/// What PSD repair had to do to make a matrix factorizable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PsdRepair {
    pub symmetrized: bool,
    pub clamped_correlation: bool,
    /// Diagonal jitter that was finally added (0 when none was needed).
    pub jitter: f64,
}

impl PsdRepair {
    pub fn touched(&self) -> bool {
        self.symmetrized || self.clamped_correlation || self.jitter > 0.0
    }
}

/// Symmetric d×d covariance matrix in squared output units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix<S> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> CovMatrix<S> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![S::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for j in 0..dim {
            m.set(j, j, S::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), dim, "covariance matrix must be square");
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.dim + j] = v;
    }

    pub fn is_symmetric(&self, rel_tol: S) -> bool {
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let a = self.get(i, j);
                let b = self.get(j, i);
                let scale = a.abs().max(b.abs()).max(S::one());
                if (a - b).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    fn max_diag(&self) -> S {
        (0..self.dim)
            .map(|j| self.get(j, j))
            .fold(S::zero(), |a, b| a.max(b))
    }

    /// Repair toward positive semi-definiteness: symmetrize, clamp
    /// off-diagonal magnitudes to (1 − 1e-9)·√(σⱼⱼσₖₖ), then escalate
    /// diagonal jitter from 1e-10·max(diag) by factors of 10 up to
    /// 1e-6·max(diag) until a Cholesky factorization exists.
    ///
    /// Bias-corrected jackknife covariances can be indefinite, so this is a
    /// load-bearing path, not belt-and-braces.
    pub fn repair_psd(&self) -> Result<(CovMatrix<S>, PsdRepair)> {
        let mut report = PsdRepair::default();
        let mut m = self.clone();

        if !m.is_symmetric(S::from_f64(1e-12)) {
            report.symmetrized = true;
        }
        for i in 0..m.dim {
            for j in (i + 1)..m.dim {
                let avg = (m.get(i, j) + m.get(j, i)) / S::two();
                m.set(i, j, avg);
                m.set(j, i, avg);
            }
        }

        let corr_cap = S::from_f64(1.0 - 1e-9);
        for i in 0..m.dim {
            for j in (i + 1)..m.dim {
                let dii = m.get(i, i).max(S::zero());
                let djj = m.get(j, j).max(S::zero());
                let bound = corr_cap * (dii * djj).sqrt();
                let v = m.get(i, j);
                if v.abs() > bound {
                    let clamped = if v >= S::zero() { bound } else { -bound };
                    m.set(i, j, clamped);
                    m.set(j, i, clamped);
                    report.clamped_correlation = true;
                }
            }
        }

        if m.cholesky().is_ok() {
            return Ok((m, report));
        }

        let base = m.max_diag().max(S::zero());
        let mut jitter = S::from_f64(1e-10) * base;
        let cap = S::from_f64(1e-6) * base;
        while jitter <= cap && jitter > S::zero() {
            let mut jittered = m.clone();
            for j in 0..m.dim {
                jittered.set(j, j, m.get(j, j) + jitter);
            }
            if jittered.cholesky().is_ok() {
                report.jitter = jitter.as_f64();
                return Ok((jittered, report));
            }
            jitter = jitter * S::from_f64(10.0);
        }
        Err(Error::Numerical(format!(
            "matrix not PSD after repair: {:?}",
            self.data.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
        )))
    }

    /// Lower-triangular Cholesky factor, tolerating exact semi-definiteness
    /// (zero pivots produce zero columns, so degenerate covariances such as
    /// the zero matrix or perfectly correlated outputs still factor).
    pub fn cholesky(&self) -> Result<CholeskyFactor<S>> {
        let d = self.dim;
        let mut l = vec![S::zero(); d * d];
        let scale = self.max_diag().max(S::one());
        let neg_tol = S::from_f64(1e-12) * scale;
        for j in 0..d {
            let mut pivot = self.get(j, j);
            for k in 0..j {
                pivot = pivot - l[j * d + k] * l[j * d + k];
            }
            if pivot < -neg_tol {
                return Err(Error::Numerical(format!(
                    "cholesky pivot {pivot} negative at column {j}"
                )));
            }
            if pivot <= S::zero() {
                // Zero pivot: a semi-definite direction. The rest of this
                // column must then be (numerically) zero, otherwise the
                // matrix is indefinite and only looks semi-definite.
                for i in (j + 1)..d {
                    let mut v = self.get(i, j);
                    for k in 0..j {
                        v = v - l[i * d + k] * l[j * d + k];
                    }
                    let vtol = S::from_f64(1e-7)
                        * (self.get(i, i).max(S::zero()) * self.get(j, j).max(S::zero()))
                            .sqrt()
                        + neg_tol;
                    if v.abs() > vtol {
                        return Err(Error::Numerical(format!(
                            "cholesky: zero pivot at column {j} with inconsistent entry at row {i}"
                        )));
                    }
                }
                continue;
            }
            let ljj = pivot.sqrt();
            l[j * d + j] = ljj;
            for i in (j + 1)..d {
                let mut v = self.get(i, j);
                for k in 0..j {
                    v = v - l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = v / ljj;
            }
        }
        Ok(CholeskyFactor { dim: d, l })
    }
}

/// Lower-triangular factor L with Σ = LLᵀ.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<S> {
    dim: usize,
    l: Vec<S>,
}

impl<S: Scalar> CholeskyFactor<S> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.l[i * self.dim + j]
    }

    pub fn is_singular(&self) -> bool {
        (0..self.dim).any(|j| self.get(j, j) == S::zero())
    }

    /// out += L·z, where z has length d.
    pub fn apply_add(&self, z: &[S], out: &mut [S]) {
        for i in 0..self.dim {
            let mut acc = S::zero();
            for j in 0..=i {
                acc = acc + self.get(i, j) * z[j];
            }
            out[i] = out[i] + acc;
        }
    }

    /// Solve L·z = r by forward substitution. Errors when singular.
    pub fn forward_solve(&self, r: &[S]) -> Result<Vec<S>> {
        let mut z = vec![S::zero(); self.dim];
        for i in 0..self.dim {
            let lii = self.get(i, i);
            if lii == S::zero() {
                return Err(Error::Numerical(
                    "singular covariance: zero Cholesky pivot".into(),
                ));
            }
            let mut acc = r[i];
            for j in 0..i {
                acc = acc - self.get(i, j) * z[j];
            }
            z[i] = acc / lii;
        }
        Ok(z)
    }

    /// ln det Σ = 2·Σⱼ ln Lⱼⱼ. Errors when singular.
    pub fn log_det(&self) -> Result<S> {
        let mut acc = S::zero();
        for j in 0..self.dim {
            let ljj = self.get(j, j);
            if ljj == S::zero() {
                return Err(Error::Numerical(
                    "singular covariance: log-determinant undefined".into(),
                ));
            }
            acc = acc + ljj.ln();
        }
        Ok(S::two() * acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_recomposes() {
        let m = CovMatrix::from_rows(&[
            vec![4.0, 2.0, 0.6],
            vec![2.0, 2.0, 0.5],
            vec![0.6, 0.5, 1.0],
        ]);
        let l = m.cholesky().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0f64;
                for k in 0..3 {
                    acc += l.get(i, k) * l.get(j, k);
                }
                assert!((acc - m.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_zero_matrix_is_zero() {
        let m = CovMatrix::<f64>::zeros(3);
        let l = m.cholesky().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l.get(i, j), 0.0);
            }
        }
        assert!(l.is_singular());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = CovMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(m.cholesky().is_err());
    }

    #[test]
    fn repair_clamps_excess_correlation() {
        let m = CovMatrix::from_rows(&[vec![1.0, 1.5], vec![1.5, 1.0]]);
        let (fixed, report) = m.repair_psd().unwrap();
        assert!(report.clamped_correlation);
        assert!(fixed.get(0, 1) <= 1.0);
        fixed.cholesky().unwrap();
    }

    #[test]
    fn repair_jitters_slightly_indefinite_matrix() {
        // min eigenvalue ≈ −8e-8: inside the jitter escalation range but
        // untouched by the correlation clamp
        let a = 0.50000004f64.sqrt();
        let m = CovMatrix::from_rows(&[
            vec![1.0, a, 0.0],
            vec![a, 1.0, a],
            vec![0.0, a, 1.0],
        ]);
        assert!(m.cholesky().is_err());
        let (fixed, report) = m.repair_psd().unwrap();
        assert!(report.jitter > 0.0);
        fixed.cholesky().unwrap();
    }

    #[test]
    fn repair_gives_up_on_strongly_indefinite_matrix() {
        let m = CovMatrix::from_rows(&[
            vec![1.0, 0.999, 0.0],
            vec![0.999, 1.0, 0.999],
            vec![0.0, 0.999, 1.0],
        ]);
        assert!(m.repair_psd().is_err());
    }

    #[test]
    fn forward_solve_hand_case() {
        // Σ = [[4,0],[0,1]], r = (2,1) -> Mahalanobis sqrt(2)
        let m = CovMatrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 1.0]]);
        let l = m.cholesky().unwrap();
        let z = l.forward_solve(&[2.0, 1.0]).unwrap();
        let r2: f64 = z.iter().map(|v| v * v).sum();
        assert!((r2.sqrt() - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn matrix_column_means() {
        let m = Matrix::from_rows(vec![vec![1.0, 10.0], vec![3.0, 30.0]]);
        assert_eq!(m.column_means(), vec![2.0, 20.0]);
    }
}
