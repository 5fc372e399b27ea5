//! PCA and truncated SVD baselines.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::MatDense;

/// Orthonormal projection axes (`d x dim`) plus the offset subtracted first.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProjection {
    pub axes: MatDense,
    pub offset: Vec<f64>,
    /// Eigenvalues of the scatter matrix for each kept axis, descending.
    pub eigenvalues: Vec<f64>,
}

impl LinearProjection {
    pub fn project(&self, data: &MatDense) -> Result<MatDense> {
        let centered = subtract_row(data, &self.offset);
        centered.matmul(&self.axes.transpose())
    }

    /// Maps projected coordinates back into the original space.
    pub fn reconstruct(&self, coords: &MatDense) -> Result<MatDense> {
        let mut back = coords.matmul(&self.axes)?;
        for i in 0..back.rows() {
            for (v, o) in back.row_mut(i).iter_mut().zip(&self.offset) {
                *v += o;
            }
        }
        Ok(back)
    }
}

/// Top-`d` principal axes of the mean-centred data.
pub fn pca_axes(data: &MatDense, d: usize) -> Result<LinearProjection> {
    let n = data.rows().max(1) as f64;
    let mean: Vec<f64> = (0..data.cols())
        .map(|j| data.row_iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    top_axes(data, d, mean)
}

/// Top-`d` right singular vectors of the uncentred data.
pub fn svd_axes(data: &MatDense, d: usize) -> Result<LinearProjection> {
    top_axes(data, d, vec![0.0; data.cols()])
}

fn top_axes(data: &MatDense, d: usize, offset: Vec<f64>) -> Result<LinearProjection> {
    let dim = data.cols();
    if d == 0 || d > dim {
        return Err(Error::DTooLarge { d, dim });
    }
    let centered = subtract_row(data, &offset);
    let scatter = centered.transpose().matmul(&centered)?;
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(dim, dim, scatter.as_slice()));

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&p, &q| {
        eig.eigenvalues[q]
            .total_cmp(&eig.eigenvalues[p])
            .then(p.cmp(&q))
    });

    let mut axes = MatDense::zeros(d, dim);
    let mut eigenvalues = Vec::with_capacity(d);
    for (row, &c) in order.iter().take(d).enumerate() {
        let col = eig.eigenvectors.column(c);
        // sign convention: the largest-magnitude component is positive
        let pivot = (0..dim).fold(0, |best, j| if col[j].abs() > col[best].abs() { j } else { best });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..dim {
            axes.set(row, j, sign * col[j]);
        }
        eigenvalues.push(eig.eigenvalues[c]);
    }
    Ok(LinearProjection {
        axes,
        offset,
        eigenvalues,
    })
}

fn subtract_row(data: &MatDense, offset: &[f64]) -> MatDense {
    let mut out = data.clone();
    for i in 0..out.rows() {
        for (v, o) in out.row_mut(i).iter_mut().zip(offset) {
            *v -= o;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, euclidean};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_line_axis() {
        let data = MatDense::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let p = pca_axes(&data, 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.axes.get(0, 0) - s).abs() < 1e-12);
        assert!((p.axes.get(0, 1) - s).abs() < 1e-12);
    }

    fn embedded_plane(seed: u64) -> MatDense {
        // 2-d data pushed through a fixed 2 -> 5 linear map
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = [[1.0, 0.5, -0.3, 2.0, 0.0], [0.0, 1.0, 1.0, -1.0, 0.7]];
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (u, v): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                (0..5).map(|j| u * map[0][j] + v * map[1][j] + 0.25).collect()
            })
            .collect();
        MatDense::from_rows(&rows).unwrap()
    }

    #[test]
    fn exact_subspace_reconstructs() {
        let data = embedded_plane(8);
        let p = pca_axes(&data, 2).unwrap();
        let back = p.reconstruct(&p.project(&data).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(data.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
        // the offset makes the uncentred data rank 3, so SVD needs 3 axes
        let s = svd_axes(&data, 3).unwrap();
        let back = s.reconstruct(&s.project(&data).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(data.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rank_pca_preserves_distances() {
        let data = embedded_plane(2);
        let p = pca_axes(&data, 2).unwrap();
        let y = p.project(&data).unwrap();
        for i in 0..data.rows() {
            for j in 0..data.rows() {
                let a = euclidean(data.row(i), data.row(j));
                let b = euclidean(y.row(i), y.row(j));
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn axes_are_orthonormal_with_fixed_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let data = MatDense::from_rows(&rows).unwrap();
        for p in [pca_axes(&data, 4).unwrap(), svd_axes(&data, 4).unwrap()] {
            for i in 0..4 {
                for j in 0..4 {
                    let g = dot(p.axes.row(i), p.axes.row(j));
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-9);
                }
                let row = p.axes.row(i);
                let big = row.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
                assert!(big > 0.0);
            }
            assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
        assert!(matches!(pca_axes(&data, 7), Err(Error::DTooLarge { d: 7, dim: 6 })));
        assert!(matches!(svd_axes(&data, 0), Err(Error::DTooLarge { .. })));
    }
}
