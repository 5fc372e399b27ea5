//! Spectral initialization from the normalized graph Laplacian.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::umap::FuzzyGraph;
use crate::linalg::{dot, norm};

const POWER_ITERATIONS: usize = 200;

/// Coordinates from the `dims` eigenvectors of `L = I - D^-1/2 W D^-1/2`
/// with the smallest non-trivial eigenvalues.
///
/// Power iteration runs on `2I - L`, whose dominant eigenvector is the
/// trivial `D^1/2 1`; that vector and every previously found one are
/// deflated by Gram-Schmidt on each step. Returns `None` for disconnected
/// graphs (the trivial eigenvalue is then degenerate) and for graphs too
/// small to have `dims` non-trivial directions.
pub fn spectral_layout(graph: &FuzzyGraph, dims: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let n = graph.n();
    if n < dims + 2 || !graph.is_connected() {
        return None;
    }
    let mut degree = vec![0.0; n];
    for &(i, j, w) in graph.edges() {
        degree[i] += w;
        degree[j] += w;
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();

    // x -> x + D^-1/2 W D^-1/2 x
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = x.to_vec();
        for &(i, j, w) in graph.edges() {
            let s = w * inv_sqrt[i] * inv_sqrt[j];
            y[i] += s * x[j];
            y[j] += s * x[i];
        }
        y
    };

    let mut trivial: Vec<f64> = degree.iter().map(|d| d.sqrt()).collect();
    normalize(&mut trivial);
    let mut basis = vec![trivial];

    for _ in 0..dims {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        deflate(&mut v, &basis);
        if !normalize(&mut v) {
            return None;
        }
        for _ in 0..POWER_ITERATIONS {
            let mut w = apply(&v);
            deflate(&mut w, &basis);
            if !normalize(&mut w) {
                return None;
            }
            v = w;
        }
        basis.push(v);
    }

    let mut coords = vec![0.0; n * dims];
    for (d, vec) in basis[1..].iter().enumerate() {
        for i in 0..n {
            coords[i * dims + d] = vec[i];
        }
    }
    let max_abs = coords.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max_abs > 0.0) {
        return None;
    }
    let expansion = 10.0 / max_abs;
    let noise = Normal::new(0.0, 1e-4).expect("valid sd");
    for c in coords.iter_mut() {
        *c = *c * expansion + noise.sample(rng);
    }
    Some(coords)
}

fn deflate(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= p * y;
        }
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if !(n > 1e-300) || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}
