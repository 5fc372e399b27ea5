//! Dense vector and matrix primitives plus the similarity and ridge kernels
//! the rest of the crate is built on. Everything is `f64`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecDense(Vec<f64>);

impl VecDense {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ShapeMismatch("vector must have dim >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector".into()));
        }
        Ok(VecDense(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl AsRef<[f64]> for VecDense {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatDense {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl MatDense {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix".into()));
        }
        Ok(MatDense { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatDense {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from equally long rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> MatDense {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        MatDense {
            rows: indices.len(),
            cols: self.cols,
            values,
        }
    }

    pub fn transpose(&self) -> MatDense {
        let mut t = MatDense::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &MatDense) -> Result<MatDense> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = MatDense::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.values[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

/// Sum with pairwise (cascade) reduction, so the result depends only on the
/// order of the input and not on how work was split across threads.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Cosine similarity on raw slices. Zero vectors are rejected.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector { row: None });
    }
    Ok(cosine_from_parts(dot(a, b), na, nb))
}

#[inline]
fn cosine_from_parts(dot: f64, na: f64, nb: f64) -> f64 {
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn cosine_similarity(a: &VecDense, b: &VecDense) -> Result<f64> {
    cosine(a.as_slice(), b.as_slice())
}

/// Cosine similarity between every row of `a` and every row of `b`.
///
/// Entry `(i, j)` is bit-identical to `cosine(a.row(i), b.row(j))`.
pub fn pairwise_cosine(a: &MatDense, b: &MatDense) -> Result<MatDense> {
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            left: a.cols(),
            right: b.cols(),
        });
    }
    let a_norms = row_norms(a)?;
    let b_norms = row_norms(b)?;
    let b_norms = &b_norms;
    let values: Vec<f64> = (0..a.rows())
        .into_par_iter()
        .flat_map_iter(|i| {
            let ra = a.row(i);
            let na = a_norms[i];
            (0..b.rows()).map(move |j| cosine_from_parts(dot(ra, b.row(j)), na, b_norms[j]))
        })
        .collect();
    MatDense::new(a.rows(), b.rows(), values)
}

fn row_norms(m: &MatDense) -> Result<Vec<f64>> {
    m.row_iter()
        .enumerate()
        .map(|(i, r)| {
            let n = norm(r);
            if n == 0.0 {
                Err(Error::ZeroVector { row: Some(i) })
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// Fitted ridge coefficients: `p x q` for `n x p` inputs and `n x q` targets.
pub type RidgeCoefficients = MatDense;

/// Solves `min ||XB - Y||^2 + lambda ||B||^2` via the normal equations
/// `(X'X + lambda I) B = X'Y`.
///
/// Cholesky is tried first; if the system is not numerically positive
/// definite the solve falls back to Gaussian elimination with partial
/// pivoting, and only reports [`Error::SingularSystem`] if that fails too.
pub fn ridge_fit(x: &MatDense, y: &MatDense, lambda: f64) -> Result<RidgeCoefficients> {
    if x.rows() != y.rows() {
        return Err(Error::ShapeMismatch(format!(
            "design has {} rows but targets have {}",
            x.rows(),
            y.rows()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ridge penalty must be finite and >= 0, got {lambda}"
        )));
    }
    let xt = x.transpose();
    let mut gram = xt.matmul(x)?;
    for i in 0..gram.rows() {
        gram.set(i, i, gram.get(i, i) + lambda);
    }
    let rhs = xt.matmul(y)?;
    match cholesky_solve(&gram, &rhs) {
        Some(b) => Ok(b),
        None => gaussian_solve(&gram, &rhs).ok_or(Error::SingularSystem { lambda }),
    }
}

/// Minimum-norm least-squares fit `B = pinv(X) Y`, i.e. the `lambda -> 0`
/// limit of [`ridge_fit`]. Works for rank-deficient designs.
pub fn least_squares_pinv(x: &MatDense, y: &MatDense) -> Result<RidgeCoefficients> {
    if x.rows() != y.rows() {
        return Err(Error::ShapeMismatch(format!(
            "design has {} rows but targets have {}",
            x.rows(),
            y.rows()
        )));
    }
    let xm = nalgebra::DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice());
    let ym = nalgebra::DMatrix::from_row_slice(y.rows(), y.cols(), y.as_slice());
    let svd = xm.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = max_sv * (x.rows().max(x.cols()) as f64) * f64::EPSILON;
    let b = svd
        .solve(&ym, eps)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let mut values = Vec::with_capacity(b.nrows() * b.ncols());
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            values.push(b[(i, j)]);
        }
    }
    MatDense::new(b.nrows(), b.ncols(), values)
}

/// `X B`.
pub fn ridge_predict(b: &RidgeCoefficients, x: &MatDense) -> Result<MatDense> {
    x.matmul(b)
}

fn cholesky_solve(a: &MatDense, rhs: &MatDense) -> Option<MatDense> {
    let n = a.rows();
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let tol = scale * 1e-12;
    let mut l = MatDense::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if !(diag > tol) {
            return None;
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    let m = rhs.cols();
    let mut out = MatDense::zeros(n, m);
    for c in 0..m {
        // forward: L z = b
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = rhs.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * z[k];
            }
            z[i] = s / l.get(i, i);
        }
        // backward: L' x = z
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= l.get(k, i) * out.get(k, c);
            }
            out.set(i, c, s / l.get(i, i));
        }
    }
    Some(out)
}

fn gaussian_solve(a: &MatDense, rhs: &MatDense) -> Option<MatDense> {
    let n = a.rows();
    let m = rhs.cols();
    let scale = a.as_slice().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = scale.max(f64::MIN_POSITIVE) * 1e-12;
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.extend_from_slice(rhs.row(i));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| aug[p][col].abs().total_cmp(&aug[q][col].abs()))?;
        if aug[pivot][col].abs() <= tol {
            return None;
        }
        aug.swap(col, pivot);
        for r in (col + 1)..n {
            let f = aug[r][col] / aug[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..(n + m) {
                aug[r][c] -= f * aug[col][c];
            }
        }
    }
    let mut out = MatDense::zeros(n, m);
    for c in 0..m {
        for i in (0..n).rev() {
            let mut s = aug[i][n + c];
            for k in (i + 1)..n {
                s -= aug[i][k] * out.get(k, c);
            }
            out.set(i, c, s / aug[i][i]);
        }
    }
    Some(out)
}
