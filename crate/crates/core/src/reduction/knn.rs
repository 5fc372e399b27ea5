use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, euclidean, norm, MatDense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `1 - cos(a, b)`.
    #[default]
    CosineDistance,
    Euclidean,
}

/// Exact k-nearest-neighbour lists, one per point, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl KnnGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Builds a graph from explicit neighbour lists. Each list must hold `k`
    /// entries sorted by distance and must not contain the node itself.
    pub fn from_lists(k: usize, lists: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let mut indices = Vec::with_capacity(lists.len() * k);
        let mut distances = Vec::with_capacity(lists.len() * k);
        for (i, list) in lists.iter().enumerate() {
            if list.len() != k {
                return Err(Error::ShapeMismatch(format!(
                    "node {i} has {} neighbours, expected {k}",
                    list.len()
                )));
            }
            for w in list.windows(2) {
                if w[1].1 < w[0].1 {
                    return Err(Error::InvalidParameter(format!(
                        "neighbours of node {i} are not sorted"
                    )));
                }
            }
            for &(j, d) in list {
                if j == i || j >= lists.len() || !(d >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "bad neighbour ({j}, {d}) for node {i}"
                    )));
                }
                indices.push(j);
                distances.push(d);
            }
        }
        Ok(KnnGraph {
            k,
            indices,
            distances,
        })
    }
}

pub fn distance(metric: Metric, a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    match metric {
        Metric::CosineDistance => (1.0 - (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)).max(0.0),
        Metric::Euclidean => euclidean(a, b),
    }
}

/// Brute-force k-nearest neighbours. Ties go to the lower row index.
pub fn knn_graph(data: &MatDense, k: usize, metric: Metric) -> Result<KnnGraph> {
    let n = data.rows();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let norms: Vec<f64> = data.row_iter().map(norm).collect();
    if metric == Metric::CosineDistance {
        if let Some(i) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroVector { row: Some(i) });
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = data.row(i);
            let mut cand: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, distance(metric, a, data.row(j), norms[i], norms[j])))
                .collect();
            let by_dist = |x: &(usize, f64), y: &(usize, f64)| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_dist);
                cand.truncate(k);
            }
            cand.sort_by(by_dist);
            cand
        })
        .collect();
    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for r in rows {
        for (j, d) in r {
            indices.push(j);
            distances.push(d);
        }
    }
    Ok(KnnGraph {
        k,
        indices,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_points() {
        let data = MatDense::from_rows(&[[0.0], [1.0], [10.0]]).unwrap();
        let g = knn_graph(&data, 1, Metric::Euclidean).unwrap();
        assert_eq!(g.neighbors(0), [1]);
        assert_eq!(g.neighbors(1), [0]);
        assert_eq!(g.neighbors(2), [1]);
        assert_eq!(g.distances(2), [9.0]);
    }

    #[test]
    fn k_equal_n_minus_one_lists_everyone() {
        let data = MatDense::from_rows(&[[0.0, 1.0], [1.0, 0.0], [3.0, 3.0], [2.0, 5.0]]).unwrap();
        let g = knn_graph(&data, 3, Metric::Euclidean).unwrap();
        for i in 0..4 {
            let mut nb = g.neighbors(i).to_vec();
            nb.sort();
            let expected: Vec<usize> = (0..4).filter(|&j| j != i).collect();
            assert_eq!(nb, expected);
        }
        assert!(matches!(knn_graph(&data, 4, Metric::Euclidean), Err(Error::KTooLarge { .. })));
        assert!(matches!(knn_graph(&data, 0, Metric::Euclidean), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let data = MatDense::from_rows(&[[0.0], [1.0], [-1.0], [1.0]]).unwrap();
        let g = knn_graph(&data, 2, Metric::Euclidean).unwrap();
        assert_eq!(g.neighbors(0), [1, 2]);
        assert_eq!(g.neighbors(1), [3, 0]);
    }

    #[test]
    fn matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let data = MatDense::from_rows(&rows).unwrap();
        for metric in [Metric::Euclidean, Metric::CosineDistance] {
            let g = knn_graph(&data, 7, metric).unwrap();
            for i in 0..50 {
                // oracle: score every other point, full stable sort
                let mut all: Vec<(f64, usize)> = Vec::new();
                for j in 0..50 {
                    if j == i {
                        continue;
                    }
                    let d = match metric {
                        Metric::Euclidean => rows[i]
                            .iter()
                            .zip(&rows[j])
                            .map(|(a, b)| (a - b).powi(2))
                            .sum::<f64>()
                            .sqrt(),
                        Metric::CosineDistance => {
                            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                            let na: f64 = rows[i].iter().map(|a| a * a).sum::<f64>().sqrt();
                            let nb: f64 = rows[j].iter().map(|a| a * a).sum::<f64>().sqrt();
                            1.0 - dot / (na * nb)
                        }
                    };
                    all.push((d, j));
                }
                all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                let expected: Vec<usize> = all[..7].iter().map(|p| p.1).collect();
                assert_eq!(g.neighbors(i), expected.as_slice());
                for (got, want) in g.distances(i).iter().zip(&all[..7]) {
                    assert!((got - want.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn from_lists_validates() {
        assert!(KnnGraph::from_lists(1, vec![vec![(1, 1.0)], vec![(0, 1.0)]]).is_ok());
        assert!(KnnGraph::from_lists(1, vec![vec![(0, 1.0)], vec![(0, 1.0)]]).is_err());
        assert!(KnnGraph::from_lists(2, vec![vec![(1, 2.0), (2, 1.0)], vec![], vec![]]).is_err());
    }
}
