//! Model quality metrics: coverage of a concept list and information
//! recoverable from component similarities, plus random baseline models.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::EmotionModel;
use crate::embedding::{ConceptList, EmbeddingSet};
use crate::error::{Error, Result};
use crate::linalg::{cosine, least_squares_pinv, norm, pairwise_mean, ridge_fit, ridge_predict, MatDense};

/// Predictions with a smaller norm than this score 0 instead of failing.
pub const ZERO_PREDICTION_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub token: String,
    pub best_component: String,
    pub max_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins on `[lo, hi]`; values outside land in the end bins.
    pub fn new(values: &[f64], bins: usize, lo: f64, hi: f64) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = ((v - lo) / width).floor();
            let b = if b.is_nan() { 0 } else { (b.max(0.0) as usize).min(bins - 1) };
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub model: String,
    pub records: Vec<CoverageRecord>,
    pub average_coverage: f64,
    pub histogram: Histogram,
}

impl CoverageReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("token,best_component,max_similarity\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{:?}", r.token, r.best_component, r.max_similarity);
        }
        out
    }
}

pub const HISTOGRAM_BINS: usize = 40;

/// Mean over concepts outside the model of the best cosine similarity to
/// any component. Concepts excluded by the list are skipped too.
pub fn coverage(model: &EmotionModel, concepts: &ConceptList, lexicon: &EmbeddingSet) -> Result<CoverageReport> {
    if model.vectors.cols() != lexicon.dim() {
        return Err(Error::DimensionMismatch {
            left: model.vectors.cols(),
            right: lexicon.dim(),
        });
    }
    let components: BTreeSet<&str> = model.components.iter().map(String::as_str).collect();
    let words: Vec<&String> = concepts
        .entries()
        .iter()
        .filter(|w| !components.contains(w.as_str()) && !concepts.excludes().contains(*w))
        .collect();
    if words.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let records = words
        .par_iter()
        .map(|w| {
            let v = lexicon.vector(w).ok_or_else(|| Error::PivotMiss((*w).clone()))?;
            let sims = similarity_embedding(v, model)?;
            let (best, max) = sims
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, &s)| if s > acc.1 { (j, s) } else { acc });
            Ok(CoverageRecord {
                token: (*w).clone(),
                best_component: model.components[best].clone(),
                max_similarity: max,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sims: Vec<f64> = records.iter().map(|r| r.max_similarity).collect();
    Ok(CoverageReport {
        model: model.name.clone(),
        average_coverage: pairwise_mean(&sims),
        histogram: Histogram::new(&sims, HISTOGRAM_BINS, -1.0, 1.0),
        records,
    })
}

/// Cosine similarity of `w` to every model component.
pub fn similarity_embedding(w: &[f64], model: &EmotionModel) -> Result<Vec<f64>> {
    if w.len() != model.vectors.cols() {
        return Err(Error::DimensionMismatch {
            left: w.len(),
            right: model.vectors.cols(),
        });
    }
    model.vectors.row_iter().map(|m| cosine(w, m)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Ridge,
    /// Minimum-norm least squares; ignores `lambda`.
    Pinv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryParams {
    pub split_seed: u64,
    pub lambda: f64,
    pub solver: Solver,
    /// Z-score similarity features with training-set statistics.
    pub standardize: bool,
    /// Centre features and targets on the training means before fitting.
    pub fit_intercept: bool,
    /// Train and test on every concept; only useful as a sanity check.
    pub train_is_test: bool,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        RecoveryParams {
            split_seed: 42,
            lambda: 1.0,
            solver: Solver::Ridge,
            standardize: false,
            fit_intercept: false,
            train_is_test: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub model: String,
    pub params: RecoveryParams,
    /// Concept indices, ascending.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// `(token, cosine(original, predicted))` for each test concept.
    pub per_word: Vec<(String, f64)>,
    pub average_recovered: f64,
}

/// Seeded 50/50 split: shuffle `0..n`, the first `ceil(n/2)` go to train.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = n.div_ceil(2);
    let mut train = idx[..cut].to_vec();
    let mut test = idx[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Fits a linear map from component similarities back to word vectors on
/// half of the concepts and scores it on the other half.
pub fn recoverable_information(
    model: &EmotionModel,
    concepts: &ConceptList,
    lexicon: &EmbeddingSet,
    params: &RecoveryParams,
) -> Result<RecoveryReport> {
    if model.is_empty() {
        return Err(Error::InvalidParameter("model has no components".into()));
    }
    let words: Vec<&String> = concepts
        .entries()
        .iter()
        .filter(|w| !concepts.excludes().contains(*w))
        .collect();
    let n = words.len();
    if n < 4 {
        return Err(Error::TooFewConcepts(n));
    }
    let y = lexicon.select(&words)?.matrix().clone();
    let features = (0..n)
        .into_par_iter()
        .map(|i| similarity_embedding(y.row(i), model))
        .collect::<Result<Vec<_>>>()?;
    let x = MatDense::from_rows(&features)?;

    let (train, test) = if params.train_is_test {
        ((0..n).collect(), (0..n).collect())
    } else {
        split_indices(n, params.split_seed)
    };
    let (mut x_train, mut y_train) = (x.select_rows(&train), y.select_rows(&train));
    let mut x_test = x.select_rows(&test);

    if params.standardize {
        let (mean, sd) = column_stats(&x_train);
        let scale = |m: &mut MatDense| {
            for i in 0..m.rows() {
                for (j, v) in m.row_mut(i).iter_mut().enumerate() {
                    *v = (*v - mean[j]) / sd[j];
                }
            }
        };
        scale(&mut x_train);
        scale(&mut x_test);
    }
    let mut y_offset = vec![0.0; y.cols()];
    if params.fit_intercept {
        let x_mean = column_stats(&x_train).0;
        y_offset = column_stats(&y_train).0;
        subtract_mean(&mut x_train, &x_mean);
        subtract_mean(&mut x_test, &x_mean);
        subtract_mean(&mut y_train, &y_offset);
    }

    let b = match params.solver {
        Solver::Ridge => ridge_fit(&x_train, &y_train, params.lambda)?,
        Solver::Pinv => least_squares_pinv(&x_train, &y_train)?,
    };
    let mut pred = ridge_predict(&b, &x_test)?;
    for i in 0..pred.rows() {
        for (v, o) in pred.row_mut(i).iter_mut().zip(&y_offset) {
            *v += o;
        }
    }

    let per_word: Vec<(String, f64)> = test
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            let p = pred.row(r);
            let s = if norm(p) < ZERO_PREDICTION_NORM { Ok(0.0) } else { cosine(y.row(i), p) };
            s.map(|s| (words[i].clone(), s))
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = per_word.iter().map(|p| p.1).collect();
    Ok(RecoveryReport {
        model: model.name.clone(),
        params: *params,
        train,
        test,
        average_recovered: pairwise_mean(&scores),
        per_word,
    })
}

fn column_stats(m: &MatDense) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows().max(1) as f64;
    let mean: Vec<f64> = (0..m.cols()).map(|j| m.row_iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd = (0..m.cols())
        .map(|j| {
            let var = m.row_iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            // constant columns are left centred rather than blown up
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

fn subtract_mean(m: &mut MatDense, mean: &[f64]) {
    for i in 0..m.rows() {
        for (v, c) in m.row_mut(i).iter_mut().zip(mean) {
            *v -= c;
        }
    }
}

/// `size` concepts drawn uniformly without replacement.
pub fn random_model(concepts: &ConceptList, lexicon: &EmbeddingSet, size: usize, seed: u64) -> Result<EmotionModel> {
    let n = concepts.len();
    if size > n {
        return Err(Error::SizeTooLarge { size, available: n });
    }
    if size == 0 {
        return Err(Error::InvalidParameter("random model size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<&String> = rand::seq::index::sample(&mut rng, n, size)
        .into_iter()
        .map(|i| &concepts.entries()[i])
        .collect();
    EmotionModel::from_labels(&format!("random{size}"), &picks, lexicon, "random")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Coverage,
    Recovery,
}

/// One language's evaluation inputs. Models are matched across languages
/// by name.
#[derive(Debug, Clone)]
pub struct LanguageInput {
    pub language: String,
    pub concepts: ConceptList,
    pub lexicon: EmbeddingSet,
    pub models: Vec<EmotionModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub model: String,
    pub size: usize,
    pub values: Vec<f64>,
    /// Unweighted mean across languages.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteTable {
    pub metric: Metric,
    pub languages: Vec<String>,
    pub rows: Vec<SuiteRow>,
}

impl SuiteTable {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Model | k |");
        for l in &self.languages {
            let _ = write!(out, " {l} |");
        }
        out.push_str(" Total |\n|---|---|");
        out.push_str(&"---|".repeat(self.languages.len() + 1));
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "| {} | {} |", r.model, r.size);
            for v in &r.values {
                let _ = write!(out, " {v:.3} |");
            }
            let _ = writeln!(out, " {:.3} |", r.total);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,k");
        for l in &self.languages {
            let _ = write!(out, ",{l}");
        }
        out.push_str(",total\n");
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.model, r.size);
            for v in &r.values {
                let _ = write!(out, ",{v:?}");
            }
            let _ = writeln!(out, ",{:?}", r.total);
        }
        out
    }
}

/// Evaluates every model of the first language in every language.
pub fn evaluate_suite(inputs: &[LanguageInput], metric: Metric, recovery: &RecoveryParams) -> Result<SuiteTable> {
    let first = inputs.first().ok_or(Error::EmptyEvaluationSet)?;
    let mut rows = Vec::with_capacity(first.models.len());
    for m in &first.models {
        let values = inputs
            .iter()
            .map(|lang| {
                let model = lang
                    .models
                    .iter()
                    .find(|x| x.name == m.name)
                    .ok_or_else(|| Error::UnknownModel(format!("{} in {}", m.name, lang.language)))?;
                Ok(match metric {
                    Metric::Coverage => coverage(model, &lang.concepts, &lang.lexicon)?.average_coverage,
                    Metric::Recovery => {
                        recoverable_information(model, &lang.concepts, &lang.lexicon, recovery)?.average_recovered
                    }
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(SuiteRow {
            model: m.name.clone(),
            size: m.len(),
            total: values.iter().sum::<f64>() / values.len() as f64,
            values,
        });
    }
    Ok(SuiteTable {
        metric,
        languages: inputs.iter().map(|l| l.language.clone()).collect(),
        rows,
    })
}
