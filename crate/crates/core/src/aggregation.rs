//! Cross-language model synthesis: per-language summary words are mapped
//! into one pivot vocabulary and clustered again into the final components.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{agglomerate, cut, summarize, Linkage, SummaryMode};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::MatDense;
use crate::reduction::{reduce_umap, UmapParams};

/// Source-language token to pivot-language token. Several sources may map
/// to the same pivot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationMap {
    pub language_tag: String,
    pub entries: BTreeMap<String, String>,
}

impl TranslationMap {
    /// Parses `source<TAB>pivot` lines. Blank lines and `#` comments are
    /// skipped; a repeated source keeps its last mapping.
    pub fn parse(text: &str, language_tag: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(src), Some(dst), None) if !src.trim().is_empty() && !dst.trim().is_empty() => {
                    entries.insert(src.trim().to_string(), dst.trim().to_string());
                }
                _ => {
                    return Err(Error::MalformedMap {
                        path: path.to_path_buf(),
                        line: n + 1,
                        message: "expected `source<TAB>target`".into(),
                    })
                }
            }
        }
        Ok(TranslationMap {
            language_tag: language_tag.into(),
            entries,
        })
    }

    pub fn load(path: impl AsRef<Path>, language_tag: &str) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, language_tag, path)
    }

    pub fn identity<S: AsRef<str>>(tokens: &[S], language_tag: &str) -> Self {
        TranslationMap {
            language_tag: language_tag.into(),
            entries: tokens
                .iter()
                .map(|t| (t.as_ref().to_string(), t.as_ref().to_string()))
                .collect(),
        }
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.entries.get(token).map(String::as_str)
    }

    /// Targets with no vector in the pivot set.
    pub fn unresolved(&self, pivot: &EmbeddingSet) -> Vec<String> {
        let set: BTreeSet<&String> = self.entries.values().filter(|t| !pivot.contains(t)).collect();
        set.into_iter().cloned().collect()
    }
}

/// Label list as stored in a model file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub components: Vec<String>,
    #[serde(default)]
    pub notes: String,
}

impl ModelSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn resolve(&self, lexicon: &EmbeddingSet, provenance: &str) -> Result<EmotionModel> {
        EmotionModel::from_labels(&self.name, &self.components, lexicon, provenance)
    }
}

/// An ordered set of labelled components with their vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionModel {
    pub name: String,
    pub components: Vec<String>,
    pub vectors: MatDense,
    /// Manifest path of the run that produced the model, or `"external"`.
    pub provenance: String,
}

impl EmotionModel {
    /// Looks every label up in `lexicon`. Missing labels fail with `PivotMiss`.
    pub fn from_labels<S: AsRef<str>>(
        name: &str,
        labels: &[S],
        lexicon: &EmbeddingSet,
        provenance: &str,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidParameter(format!("model {name} has no components")));
        }
        let mut seen = BTreeSet::new();
        for l in labels {
            if !seen.insert(l.as_ref()) {
                return Err(Error::InvalidParameter(format!(
                    "model {name} repeats component {}",
                    l.as_ref()
                )));
            }
        }
        let sub = lexicon.select(labels)?;
        Ok(EmotionModel {
            name: name.into(),
            components: sub.tokens().to_vec(),
            vectors: sub.matrix().clone(),
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn spec(&self, notes: &str) -> ModelSpec {
        ModelSpec {
            name: self.name.clone(),
            components: self.components.clone(),
            notes: notes.into(),
        }
    }
}

const BUILTIN: &[(&str, &str)] = &[
    ("ekman7", include_str!("../data/models/ekman7.json")),
    ("plutchik32", include_str!("../data/models/plutchik32.json")),
    ("cowen27", include_str!("../data/models/cowen27.json")),
    ("goemotions28", include_str!("../data/models/goemotions28.json")),
    ("emotic27", include_str!("../data/models/emotic27.json")),
    ("hicem15", include_str!("../data/models/hicem15.json")),
    ("hicem25", include_str!("../data/models/hicem25.json")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|b| b.0).collect()
}

pub fn builtin_spec(name: &str) -> Result<ModelSpec> {
    let (_, text) = BUILTIN
        .iter()
        .find(|b| b.0 == name)
        .ok_or_else(|| Error::UnknownModel(name.into()))?;
    Ok(serde_json::from_str(text)?)
}

pub fn load_builtin_model(name: &str, lexicon: &EmbeddingSet) -> Result<EmotionModel> {
    builtin_spec(name)?.resolve(lexicon, "external")
}

/// Space in which summary clustering runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSpace {
    #[default]
    Umap,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryParams {
    pub k_top: usize,
    pub space: ClusterSpace,
    pub umap: UmapParams,
    pub linkage: Linkage,
    pub summary: SummaryMode,
}

impl Default for SummaryParams {
    fn default() -> Self {
        SummaryParams {
            k_top: 50,
            space: ClusterSpace::Umap,
            umap: UmapParams::default(),
            linkage: Linkage::Centroid,
            summary: SummaryMode::CentroidMedoid,
        }
    }
}

/// Coordinates used for clustering `set`. UMAP's neighbour count is clamped
/// to `n - 1` for small sets.
pub fn cluster_coords(set: &EmbeddingSet, space: ClusterSpace, umap: &UmapParams) -> Result<MatDense> {
    match space {
        ClusterSpace::Raw => Ok(set.matrix().clone()),
        ClusterSpace::Umap => {
            let params = UmapParams {
                n_neighbors: umap.n_neighbors.min(set.len().saturating_sub(1)).max(1),
                ..*umap
            };
            Ok(reduce_umap(set, &params)?.coords)
        }
    }
}

/// Runs reduce, agglomerate, cut at `min(k_top, n)` and summarize on one
/// language's lexicon.
pub fn top_summaries(set: &EmbeddingSet, params: &SummaryParams) -> Result<Vec<String>> {
    if params.k_top == 0 {
        return Err(Error::InvalidParameter("k_top must be >= 1".into()));
    }
    match set.len() {
        0 => return Err(Error::TooFewPoints(0)),
        1 => return Ok(set.tokens().to_vec()),
        _ => {}
    }
    let coords = cluster_coords(set, params.space, &params.umap)?;
    let tree = agglomerate(&coords, params.linkage)?;
    let clustering = cut(&tree, &coords, params.k_top.min(set.len()))?;
    summarize(&clustering, &coords, set.tokens(), params.summary)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageSummaries {
    pub language: String,
    pub summaries: Vec<String>,
}

/// Per-language [`top_summaries`], run in parallel. Output follows input order.
pub fn top_summaries_all(
    languages: &[(String, EmbeddingSet)],
    params: &SummaryParams,
) -> Result<Vec<LanguageSummaries>> {
    languages
        .par_iter()
        .map(|(language, set)| {
            Ok(LanguageSummaries {
                language: language.clone(),
                summaries: top_summaries(set, params)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateParams {
    pub k: usize,
    pub space: ClusterSpace,
    pub umap: UmapParams,
    pub linkage: Linkage,
    pub summary: SummaryMode,
}

impl Default for AggregateParams {
    fn default() -> Self {
        AggregateParams {
            k: 15,
            space: ClusterSpace::Raw,
            umap: UmapParams::default(),
            linkage: Linkage::Centroid,
            summary: SummaryMode::CentroidMedoid,
        }
    }
}

/// Translates every summary into the pivot vocabulary. A token with a map
/// entry uses it; otherwise it must already be a pivot token. The pool is
/// deduplicated and sorted, so language order does not matter.
pub fn translate_pool(
    summaries: &[LanguageSummaries],
    maps: &BTreeMap<String, TranslationMap>,
    pivot: &EmbeddingSet,
) -> Result<Vec<String>> {
    let mut pool = BTreeSet::new();
    for lang in summaries {
        let map = maps.get(&lang.language);
        for token in &lang.summaries {
            let target = match map.and_then(|m| m.get(token)) {
                Some(t) => t,
                None if pivot.contains(token) => token.as_str(),
                None => {
                    return Err(Error::UnmappedToken {
                        token: token.clone(),
                        language: lang.language.clone(),
                    })
                }
            };
            if !pivot.contains(target) {
                return Err(Error::PivotMiss(target.into()));
            }
            pool.insert(target.to_string());
        }
    }
    Ok(pool.into_iter().collect())
}

/// Clusters the translated summary pool into `min(k, pool size)` components.
pub fn aggregate(
    name: &str,
    summaries: &[LanguageSummaries],
    maps: &BTreeMap<String, TranslationMap>,
    pivot: &EmbeddingSet,
    params: &AggregateParams,
) -> Result<EmotionModel> {
    if params.k == 0 {
        return Err(Error::KOutOfRange { k: 0, n: 0 });
    }
    let pool = translate_pool(summaries, maps, pivot)?;
    let set = pivot.select(&pool)?;
    let labels = if set.len() == 1 {
        set.tokens().to_vec()
    } else {
        let coords = cluster_coords(&set, params.space, &params.umap)?;
        let tree = agglomerate(&coords, params.linkage)?;
        let clustering = cut(&tree, &coords, params.k.min(set.len()))?;
        summarize(&clustering, &coords, set.tokens(), params.summary)?
    };
    EmotionModel::from_labels(name, &labels, pivot, "aggregate")
}

/// Applies `old -> new` label replacements; new labels must exist in the
/// lexicon. Unmentioned components pass through.
pub fn rename_components(model: &EmotionModel, renames: &TranslationMap, lexicon: &EmbeddingSet) -> Result<EmotionModel> {
    let labels: Vec<String> = model
        .components
        .iter()
        .map(|c| renames.get(c).unwrap_or(c).to_string())
        .collect();
    EmotionModel::from_labels(&model.name, &labels, lexicon, &model.provenance)
}
