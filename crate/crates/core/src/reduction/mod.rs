//! Dimensionality reduction: UMAP plus PCA and truncated-SVD baselines.

pub mod knn;
pub mod linear;
pub mod spectral;
pub mod umap;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::{cosine, MatDense};

pub use knn::{knn_graph, KnnGraph, Metric};
pub use linear::{pca_axes, svd_axes, LinearProjection};
pub use umap::{fuzzy_union, sgd_layout, smooth_knn, FuzzyGraph, InitKind, Layout, LayoutParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Umap,
    Pca,
    Svd,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Umap => "umap",
            Method::Pca => "pca",
            Method::Svd => "svd",
        })
    }
}

/// Low-dimensional coordinates for each token of a source set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEmbedding {
    pub tokens: Vec<String>,
    pub coords: MatDense,
    pub method: Method,
    pub hyperparams: BTreeMap<String, Value>,
    pub seed: u64,
}

impl ReducedEmbedding {
    pub fn new(
        tokens: Vec<String>,
        coords: MatDense,
        method: Method,
        hyperparams: BTreeMap<String, Value>,
        seed: u64,
    ) -> Result<Self> {
        if tokens.len() != coords.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} tokens for {} coordinate rows",
                tokens.len(),
                coords.rows()
            )));
        }
        if coords.cols() == 0 {
            return Err(Error::InvalidParameter("reduced dimension must be >= 1".into()));
        }
        if coords.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reduced coordinates".into()));
        }
        Ok(ReducedEmbedding {
            tokens,
            coords,
            method,
            hyperparams,
            seed,
        })
    }

    pub fn dims(&self) -> usize {
        self.coords.cols()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }

    /// Coordinates with the column means subtracted.
    pub fn centered(&self) -> MatDense {
        let n = self.coords.rows().max(1) as f64;
        let mut out = self.coords.clone();
        for j in 0..out.cols() {
            let mean = self.coords.row_iter().map(|r| r[j]).sum::<f64>() / n;
            for i in 0..out.rows() {
                out.set(i, j, out.get(i, j) - mean);
            }
        }
        out
    }

    /// Cosine similarity of two tokens in the mean-centred reduced space.
    ///
    /// UMAP places the whole layout in a positive box, so uncentred cosines
    /// are all close to 1.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        let ia = self.index_of(a).ok_or_else(|| Error::PivotMiss(a.into()))?;
        let ib = self.index_of(b).ok_or_else(|| Error::PivotMiss(b.into()))?;
        let c = self.centered();
        cosine(c.row(ia), c.row(ib))
    }

    /// Views the coordinates as an embedding set (for caching or further
    /// analysis). Fails if a row is exactly zero.
    pub fn to_embedding_set(&self) -> Result<EmbeddingSet> {
        EmbeddingSet::new(self.tokens.clone(), self.coords.clone(), self.method.to_string())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("token");
        for d in 1..=self.dims() {
            let _ = write!(out, "\tc{d}");
        }
        out.push('\n');
        for (t, row) in self.tokens.iter().zip(self.coords.row_iter()) {
            out.push_str(t);
            for v in row {
                let _ = write!(out, "\t{v:?}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`to_tsv`](Self::to_tsv). Provenance fields are
    /// not part of the table and must be supplied.
    pub fn from_tsv(text: &str, method: Method, seed: u64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::ShapeMismatch("empty coordinate table".into()))?;
        let dims = header.split('\t').count().saturating_sub(1);
        let mut tokens = Vec::new();
        let mut values = Vec::new();
        for (n, line) in lines.enumerate() {
            let mut fields = line.split('\t');
            let token = fields.next().unwrap_or_default().to_string();
            let row: Vec<&str> = fields.collect();
            if row.len() != dims {
                return Err(Error::ShapeMismatch(format!(
                    "row {} has {} coordinates, expected {dims}",
                    n + 2,
                    row.len()
                )));
            }
            for v in row {
                values.push(v.parse::<f64>().map_err(|_| Error::NonFinite(format!("bad coordinate {v:?}")))?);
            }
            tokens.push(token);
        }
        let coords = MatDense::new(tokens.len(), dims, values)?;
        ReducedEmbedding::new(tokens, coords, method, BTreeMap::new(), seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UmapParams {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub dims: usize,
    pub epochs: usize,
    pub negative_sample_rate: usize,
    pub metric: Metric,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for UmapParams {
    fn default() -> Self {
        UmapParams {
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            dims: 2,
            epochs: 500,
            negative_sample_rate: 5,
            metric: Metric::CosineDistance,
            seed: 42,
            deterministic: true,
        }
    }
}

pub fn reduce_umap(set: &EmbeddingSet, params: &UmapParams) -> Result<ReducedEmbedding> {
    reduce_umap_rows(set.tokens().to_vec(), set.matrix(), params)
}

/// UMAP over a bare matrix, for rows that are not word vectors (and may be
/// all zero under the Euclidean metric).
pub fn reduce_umap_rows(tokens: Vec<String>, data: &MatDense, params: &UmapParams) -> Result<ReducedEmbedding> {
    let graph = knn_graph(data, params.n_neighbors, params.metric)?;
    let calib = smooth_knn(&graph, None);
    let fuzzy = fuzzy_union(&graph, &calib);
    let layout = sgd_layout(
        &fuzzy,
        &LayoutParams {
            dims: params.dims,
            epochs: params.epochs,
            min_dist: params.min_dist,
            spread: params.spread,
            negative_sample_rate: params.negative_sample_rate,
            seed: params.seed,
            deterministic: params.deterministic,
            ..LayoutParams::default()
        },
    )?;
    let mut hp = match serde_json::to_value(params)? {
        Value::Object(m) => m.into_iter().collect::<BTreeMap<_, _>>(),
        _ => BTreeMap::new(),
    };
    hp.remove("seed");
    hp.insert("a".into(), layout.a.into());
    hp.insert("b".into(), layout.b.into());
    hp.insert("init_fallback".into(), layout.init_fallback.into());
    ReducedEmbedding::new(tokens, layout.coords, Method::Umap, hp, params.seed)
}

pub fn reduce_pca(set: &EmbeddingSet, d: usize) -> Result<ReducedEmbedding> {
    reduce_linear(set, d, Method::Pca)
}

pub fn reduce_svd(set: &EmbeddingSet, d: usize) -> Result<ReducedEmbedding> {
    reduce_linear(set, d, Method::Svd)
}

fn reduce_linear(set: &EmbeddingSet, d: usize, method: Method) -> Result<ReducedEmbedding> {
    let proj = match method {
        Method::Pca => pca_axes(set.matrix(), d)?,
        _ => svd_axes(set.matrix(), d)?,
    };
    let coords = proj.project(set.matrix())?;
    let mut hp = BTreeMap::new();
    hp.insert("dims".to_string(), Value::from(d));
    ReducedEmbedding::new(set.tokens().to_vec(), coords, method, hp, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs() -> EmbeddingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        let mut tokens = Vec::new();
        for b in 0..2 {
            for i in 0..20 {
                let mut r: Vec<f64> = (0..6).map(|_| noise.sample(&mut rng)).collect();
                r[b] += 3.0;
                rows.push(r);
                tokens.push(format!("b{b}_{i}"));
            }
        }
        EmbeddingSet::new(tokens, MatDense::from_rows(&rows).unwrap(), "blobs").unwrap()
    }

    #[test]
    fn umap_keeps_tokens_and_records_params() {
        let set = blobs();
        let p = UmapParams { n_neighbors: 6, epochs: 100, ..Default::default() };
        let r = reduce_umap(&set, &p).unwrap();
        assert_eq!(r.tokens, set.tokens());
        assert_eq!(r.dims(), 2);
        assert_eq!(r.method, Method::Umap);
        assert_eq!(r.hyperparams["n_neighbors"], 6);
        assert!(r.hyperparams.contains_key("a"));
        assert_eq!(r.seed, 42);
        // within-blob pairs are more similar than cross-blob pairs
        assert!(r.similarity("b0_0", "b0_1").unwrap() > r.similarity("b0_0", "b1_0").unwrap());
        let too_big = UmapParams { n_neighbors: 40, ..Default::default() };
        assert!(matches!(reduce_umap(&set, &too_big), Err(Error::KTooLarge { k: 40, n: 40 })));
    }

    #[test]
    fn tsv_round_trip() {
        let set = blobs();
        let r = reduce_pca(&set, 3).unwrap();
        let text = r.to_tsv();
        assert!(text.starts_with("token\tc1\tc2\tc3\nb0_0\t"));
        let back = ReducedEmbedding::from_tsv(&text, Method::Pca, 0).unwrap();
        assert_eq!(back.tokens, r.tokens);
        assert_eq!(back.coords, r.coords);
    }

    #[test]
    fn linear_reductions() {
        let set = blobs();
        let p = reduce_pca(&set, 2).unwrap();
        let means: Vec<f64> = (0..2).map(|j| p.coords.row_iter().map(|r| r[j]).sum::<f64>()).collect();
        assert!(means.iter().all(|m| m.abs() < 1e-9));
        let s = reduce_svd(&set, 2).unwrap();
        assert_eq!(s.method, Method::Svd);
        assert!(matches!(reduce_pca(&set, 7), Err(Error::DTooLarge { .. })));
    }

    #[test]
    fn rejects_bad_shapes() {
        let m = MatDense::from_rows(&[[1.0, f64::NAN]]).unwrap_or_else(|_| MatDense::zeros(1, 2));
        let bad = ReducedEmbedding::new(vec!["a".into(), "b".into()], m.clone(), Method::Pca, BTreeMap::new(), 0);
        assert!(bad.is_err());
    }
}
