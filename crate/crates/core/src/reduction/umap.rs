//! UMAP: calibrated kNN membership, fuzzy union, and the negative-sampling
//! layout optimizer.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::KnnGraph;
use super::spectral::spectral_layout;
use crate::error::{Error, Result};
use crate::linalg::MatDense;
use crate::manifest::splitmix64;

const SIGMA_LO: f64 = 1e-8;
const SIGMA_HI: f64 = 1e4;
const BISECTION_STEPS: usize = 64;
const GRAD_CLIP: f64 = 4.0;

/// Per-node distance offset and bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rho: f64,
    pub sigma: f64,
}

/// Solves `sum_j exp(-offsets[j] / sigma) = target` for `sigma` by bisection
/// on `[1e-8, 1e4]`. The left side increases with `sigma`, so an unreachable
/// target simply pins the answer to one end of the bracket.
pub fn solve_sigma(offsets: &[f64], target: f64) -> f64 {
    let mass = |sigma: f64| offsets.iter().map(|&x| (-x / sigma).exp()).sum::<f64>();
    let (mut lo, mut hi) = (SIGMA_LO, SIGMA_HI);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Calibrates every node: `rho` is the distance to the nearest neighbour and
/// `sigma` makes the node's total membership equal `target` (default
/// `log2(k)`).
pub fn smooth_knn(graph: &KnnGraph, target: Option<f64>) -> Vec<Calibration> {
    let target = target.unwrap_or_else(|| (graph.k() as f64).log2());
    (0..graph.n())
        .into_par_iter()
        .map(|i| {
            let d = graph.distances(i);
            let rho = d[0];
            let offsets: Vec<f64> = d.iter().map(|&x| (x - rho).max(0.0)).collect();
            Calibration {
                rho,
                sigma: solve_sigma(&offsets, target),
            }
        })
        .collect()
}

/// `sum_j exp(-max(0, d_ij - rho_i) / sigma_i) - target` for one node.
pub fn calibration_residual(graph: &KnnGraph, calib: &[Calibration], i: usize, target: f64) -> f64 {
    let c = calib[i];
    graph
        .distances(i)
        .iter()
        .map(|&d| membership(d, c))
        .sum::<f64>()
        - target
}

#[inline]
pub fn membership(d: f64, c: Calibration) -> f64 {
    (-(d - c.rho).max(0.0) / c.sigma).exp()
}

/// Probabilistic t-conorm `a + b - ab`.
#[inline]
pub fn fuzzy_or(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Undirected weighted graph; each edge stored once with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl FuzzyGraph {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, j, w) in edges {
            if i == j || i >= n || j >= n || !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidParameter(format!("bad edge ({i}, {j}, {w})")));
            }
            map.insert((i.min(j), i.max(j)), w);
        }
        Ok(FuzzyGraph {
            n,
            edges: map.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Symmetric lookup; 0 when there is no edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|p| self.edges[p].2)
            .unwrap_or(0.0)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

/// Symmetrizes calibrated directed memberships with [`fuzzy_or`].
pub fn fuzzy_union(graph: &KnnGraph, calib: &[Calibration]) -> FuzzyGraph {
    let mut directed: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for i in 0..graph.n() {
        for (&j, &d) in graph.neighbors(i).iter().zip(graph.distances(i)) {
            let w = membership(d, calib[i]);
            let entry = directed.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
            if i < j {
                entry.0 = w;
            } else {
                entry.1 = w;
            }
        }
    }
    let edges = directed
        .into_iter()
        .map(|((i, j), (a, b))| (i, j, fuzzy_or(a, b).min(1.0)))
        .filter(|e| e.2 > 0.0)
        .collect();
    FuzzyGraph { n: graph.n(), edges }
}

/// Fits `(a, b)` so that `1 / (1 + a t^(2b))` tracks the target curve
/// (`1` below `min_dist`, `exp(-(t - min_dist) / spread)` above) on 300
/// evenly spaced points of `[0, 3 spread]`.
///
/// Grid search for a starting point, then Gauss-Newton with step halving.
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let ts: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = ts
        .iter()
        .map(|&t| {
            if t < min_dist {
                1.0
            } else {
                (-(t - min_dist) / spread).exp()
            }
        })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        ts.iter()
            .zip(&ys)
            .map(|(&t, &y)| {
                let r = 1.0 / (1.0 + a * t.powf(2.0 * b)) - y;
                r * r
            })
            .sum()
    };

    let mut best = (1.0, 1.0, f64::INFINITY);
    for ai in 1..=40 {
        for bi in 1..=40 {
            let (a, b) = (0.1 * ai as f64, 0.05 * bi as f64);
            let e = sse(a, b);
            if e < best.2 {
                best = (a, b, e);
            }
        }
    }
    let (mut a, mut b, mut err) = best;

    for _ in 0..100 {
        // normal equations of the 2-parameter linearized problem
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&t, &y) in ts.iter().zip(&ys) {
            if t == 0.0 {
                continue;
            }
            let p = t.powf(2.0 * b);
            let den = 1.0 + a * p;
            let r = 1.0 / den - y;
            let da = -p / (den * den);
            let db = -a * p * 2.0 * t.ln() / (den * den);
            let g = [da, db];
            for u in 0..2 {
                jtr[u] += g[u] * r;
                for v in 0..2 {
                    jtj[u][v] += g[u] * g[v];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = -(jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let step_b = -(jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let mut scale = 1.0;
        let mut moved = false;
        while scale > 1e-6 {
            let (na, nb) = (a + scale * step_a, b + scale * step_b);
            if na > 0.0 && nb > 0.0 {
                let e = sse(na, nb);
                if e <= err {
                    a = na;
                    b = nb;
                    err = e;
                    moved = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !moved || (scale * step_a).abs().max((scale * step_b).abs()) < 1e-6 {
            break;
        }
    }
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Spectral layout, falling back to random for disconnected graphs.
    #[default]
    Spectral,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub dims: usize,
    pub epochs: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub negative_sample_rate: usize,
    pub repulsion_strength: f64,
    pub learning_rate: f64,
    pub init: InitKind,
    pub seed: u64,
    /// Apply edge updates sequentially in edge order. When false, edges are
    /// processed in parallel with racy (Hogwild-style) updates.
    pub deterministic: bool,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            dims: 2,
            epochs: 500,
            min_dist: 0.1,
            spread: 1.0,
            negative_sample_rate: 5,
            repulsion_strength: 1.0,
            learning_rate: 1.0,
            init: InitKind::Spectral,
            seed: 42,
            deterministic: true,
        }
    }
}

/// Outcome of [`sgd_layout`].
#[derive(Debug, Clone)]
pub struct Layout {
    pub coords: MatDense,
    pub a: f64,
    pub b: f64,
    /// True when spectral init was requested but random init was used.
    pub init_fallback: bool,
}

trait Coords {
    fn get(&self, i: usize, d: usize) -> f64;
    fn add(&self, i: usize, d: usize, v: f64);
}

struct SeqCoords {
    dims: usize,
    values: Vec<Cell<f64>>,
}

impl Coords for SeqCoords {
    #[inline]
    fn get(&self, i: usize, d: usize) -> f64 {
        self.values[i * self.dims + d].get()
    }
    #[inline]
    fn add(&self, i: usize, d: usize, v: f64) {
        let c = &self.values[i * self.dims + d];
        c.set(c.get() + v);
    }
}

struct AtomicCoords {
    dims: usize,
    values: Vec<AtomicU64>,
}

impl Coords for AtomicCoords {
    #[inline]
    fn get(&self, i: usize, d: usize) -> f64 {
        f64::from_bits(self.values[i * self.dims + d].load(Ordering::Relaxed))
    }
    #[inline]
    fn add(&self, i: usize, d: usize, v: f64) {
        let cell = &self.values[i * self.dims + d];
        let cur = f64::from_bits(cell.load(Ordering::Relaxed));
        cell.store((cur + v).to_bits(), Ordering::Relaxed);
    }
}

/// Small counter-based stream so every (epoch, edge) draws its own negative
/// samples independent of processing order.
struct EdgeRng(u64);

impl EdgeRng {
    fn new(seed: u64, epoch: usize, edge: usize) -> Self {
        EdgeRng(splitmix64(seed ^ splitmix64((epoch as u64) << 32 ^ edge as u64)))
    }
    fn below(&mut self, n: usize) -> usize {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        (((splitmix64(self.0) as u128) * n as u128) >> 64) as usize
    }
}

struct Schedule {
    heads: Vec<usize>,
    tails: Vec<usize>,
    epochs_per_sample: Vec<f64>,
}

fn schedule(graph: &FuzzyGraph, epochs: usize) -> Schedule {
    let max_w = graph.edges().iter().map(|e| e.2).fold(0.0, f64::max);
    let mut directed: Vec<(usize, usize, f64)> = Vec::with_capacity(graph.edges().len() * 2);
    for &(i, j, w) in graph.edges() {
        if w < max_w / epochs as f64 {
            continue;
        }
        directed.push((i, j, w));
        directed.push((j, i, w));
    }
    directed.sort_by_key(|x| (x.0, x.1));
    Schedule {
        heads: directed.iter().map(|e| e.0).collect(),
        tails: directed.iter().map(|e| e.1).collect(),
        epochs_per_sample: directed.iter().map(|e| max_w / e.2).collect(),
    }
}

/// Lays out a fuzzy graph in `params.dims` dimensions.
///
/// Each directed edge is sampled at a rate proportional to its weight. A
/// sample pulls both endpoints together, then pushes the head away from
/// `negative_sample_rate` uniformly drawn nodes (never the edge's own
/// endpoints). The learning rate decays linearly to 0.
pub fn sgd_layout(graph: &FuzzyGraph, params: &LayoutParams) -> Result<Layout> {
    if params.dims == 0 || params.epochs == 0 {
        return Err(Error::InvalidParameter("dims and epochs must be >= 1".into()));
    }
    if !(params.spread > 0.0) || !(params.min_dist >= 0.0) {
        return Err(Error::InvalidParameter("spread must be > 0 and min_dist >= 0".into()));
    }
    let n = graph.n();
    let dims = params.dims;
    let (a, b) = fit_ab(params.min_dist, params.spread);

    let mut init_rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut init_fallback = false;
    let spectral = match params.init {
        InitKind::Spectral => {
            let s = spectral_layout(graph, dims, &mut init_rng);
            init_fallback = s.is_none();
            s
        }
        InitKind::Random => None,
    };
    let mut init = spectral.unwrap_or_else(|| {
        (0..n * dims)
            .map(|_| init_rng.random_range(-10.0..10.0))
            .collect()
    });
    rescale_to_box(&mut init, n, dims);

    let sched = schedule(graph, params.epochs);
    let n_edges = sched.heads.len();
    let neg_rate = params.negative_sample_rate.max(1) as f64;
    let epochs_per_neg: Vec<f64> = sched.epochs_per_sample.iter().map(|e| e / neg_rate).collect();
    let mut next_sample = sched.epochs_per_sample.clone();
    let mut next_neg = epochs_per_neg.clone();

    let kernel = |coords: &dyn Coords, e: usize, epoch: usize, alpha: f64, n_neg: usize| {
        let j = sched.heads[e];
        let k = sched.tails[e];
        let d2: f64 = (0..dims).map(|d| (coords.get(j, d) - coords.get(k, d)).powi(2)).sum();
        if d2 > 0.0 {
            let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
            for d in 0..dims {
                let g = (coeff * (coords.get(j, d) - coords.get(k, d))).clamp(-GRAD_CLIP, GRAD_CLIP);
                coords.add(j, d, g * alpha);
                coords.add(k, d, -g * alpha);
            }
        }
        if n <= 2 || n_neg == 0 {
            return;
        }
        let mut rng = EdgeRng::new(params.seed, epoch, e);
        let (lo, hi) = (j.min(k), j.max(k));
        for _ in 0..n_neg {
            // uniform over the n - 2 nodes other than j and k
            let mut r = rng.below(n - 2);
            if r >= lo {
                r += 1;
            }
            if r >= hi {
                r += 1;
            }
            let d2: f64 = (0..dims).map(|d| (coords.get(j, d) - coords.get(r, d)).powi(2)).sum();
            if d2 <= 0.0 {
                continue;
            }
            let coeff = 2.0 * params.repulsion_strength * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0));
            for d in 0..dims {
                let g = (coeff * (coords.get(j, d) - coords.get(r, d))).clamp(-GRAD_CLIP, GRAD_CLIP);
                coords.add(j, d, g * alpha);
            }
        }
    };

    let coords_out = if params.deterministic {
        let coords = SeqCoords {
            dims,
            values: init.into_iter().map(Cell::new).collect(),
        };
        for epoch in 0..params.epochs {
            let alpha = params.learning_rate * (1.0 - epoch as f64 / params.epochs as f64);
            for e in 0..n_edges {
                if next_sample[e] > epoch as f64 {
                    continue;
                }
                let n_neg = ((epoch as f64 - next_neg[e]) / epochs_per_neg[e]).max(0.0) as usize;
                kernel(&coords, e, epoch, alpha, n_neg);
                next_sample[e] += sched.epochs_per_sample[e];
                next_neg[e] += n_neg as f64 * epochs_per_neg[e];
            }
        }
        coords.values.into_iter().map(Cell::into_inner).collect()
    } else {
        let coords = AtomicCoords {
            dims,
            values: init.into_iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
        };
        for epoch in 0..params.epochs {
            let alpha = params.learning_rate * (1.0 - epoch as f64 / params.epochs as f64);
            let active: Vec<(usize, usize)> = (0..n_edges)
                .filter(|&e| next_sample[e] <= epoch as f64)
                .map(|e| {
                    let n_neg = ((epoch as f64 - next_neg[e]) / epochs_per_neg[e]).max(0.0) as usize;
                    (e, n_neg)
                })
                .collect();
            active
                .par_iter()
                .for_each(|&(e, n_neg)| kernel(&coords, e, epoch, alpha, n_neg));
            for &(e, n_neg) in &active {
                next_sample[e] += sched.epochs_per_sample[e];
                next_neg[e] += n_neg as f64 * epochs_per_neg[e];
            }
        }
        coords
            .values
            .into_iter()
            .map(|v| f64::from_bits(v.into_inner()))
            .collect()
    };

    Ok(Layout {
        coords: MatDense::new(n, dims, coords_out)?,
        a,
        b,
        init_fallback,
    })
}

/// Maps every axis affinely onto `[0, 10]`.
fn rescale_to_box(values: &mut [f64], n: usize, dims: usize) {
    for d in 0..dims {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            lo = lo.min(values[i * dims + d]);
            hi = hi.max(values[i * dims + d]);
        }
        let span = hi - lo;
        for i in 0..n {
            let v = &mut values[i * dims + d];
            *v = if span > 0.0 { 10.0 * (*v - lo) / span } else { 5.0 };
        }
    }
}
