//! Small synthetic corpora for tests, benchmarks and demos.
//!
//! The lexicon has one random "head" direction per emotion word used by the
//! built-in models, and a handful of noisy satellites around each head.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::aggregation::builtin_spec;
use crate::embedding::{write_vec_file, ConceptList, EmbeddingSet};
use crate::error::{Error, Result};
use crate::linalg::MatDense;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexiconShape {
    pub dim: usize,
    pub satellites: usize,
    /// Per-coordinate standard deviation of satellite noise.
    pub spread: f64,
}

impl Default for LexiconShape {
    fn default() -> Self {
        LexiconShape { dim: 32, satellites: 5, spread: 0.08 }
    }
}

/// Components of the ekman7, hicem15 and hicem25 models, sorted.
pub fn head_words() -> Vec<String> {
    let mut heads = BTreeSet::new();
    for name in ["ekman7", "hicem15", "hicem25"] {
        heads.extend(builtin_spec(name).expect("bundled model").components);
    }
    heads.into_iter().collect()
}

/// Heads plus `{head}_{i}` satellites. Tokens get `prefix` prepended.
pub fn synthetic_lexicon(seed: u64, shape: LexiconShape, prefix: &str) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid sd");
    let noise = Normal::new(0.0, shape.spread).expect("valid sd");
    let mut tokens = Vec::new();
    let mut rows = Vec::new();
    for head in head_words() {
        let dir: Vec<f64> = (0..shape.dim).map(|_| unit.sample(&mut rng)).collect();
        let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dir: Vec<f64> = dir.iter().map(|v| v / len).collect();
        rows.push(dir.clone());
        tokens.push(format!("{prefix}{head}"));
        for i in 1..=shape.satellites {
            rows.push(dir.iter().map(|v| v + noise.sample(&mut rng)).collect());
            tokens.push(format!("{prefix}{head}_{i}"));
        }
    }
    EmbeddingSet::new(tokens, MatDense::from_rows(&rows).expect("rectangular"), "synthetic").expect("nonzero rows")
}

/// A second language: every pivot vector perturbed slightly, tokens
/// prefixed, plus the `token -> pivot token` map as TSV text.
pub fn translated_lexicon(pivot: &EmbeddingSet, prefix: &str, seed: u64) -> (EmbeddingSet, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).expect("valid sd");
    let tokens: Vec<String> = pivot.tokens().iter().map(|t| format!("{prefix}{t}")).collect();
    let values = pivot.matrix().as_slice().iter().map(|v| v + noise.sample(&mut rng)).collect();
    let matrix = MatDense::new(pivot.len(), pivot.dim(), values).expect("shape");
    let mut map = String::from("# source\tpivot\n");
    for (t, p) in tokens.iter().zip(pivot.tokens()) {
        let _ = writeln!(map, "{t}\t{p}");
    }
    (EmbeddingSet::new(tokens, matrix, "synthetic").expect("nonzero rows"), map)
}

/// Paths written by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub pivot_vectors: PathBuf,
    pub pivot_concepts: PathBuf,
    pub seeds: PathBuf,
    pub other_vectors: PathBuf,
    pub other_concepts: PathBuf,
    pub other_map: PathBuf,
}

/// Writes a two-language corpus (`en` pivot, `xx` second language) into
/// `dir`, using the layout `evaluate-suite` expects.
pub fn write_corpus(dir: &Path, seed: u64) -> Result<CorpusFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let en = synthetic_lexicon(seed, LexiconShape::default(), "");
    let (xx, map) = translated_lexicon(&en, "xx_", seed.wrapping_add(1));
    let files = CorpusFiles {
        pivot_vectors: dir.join("en.vec"),
        pivot_concepts: dir.join("en.concepts.txt"),
        seeds: dir.join("en.seeds.txt"),
        other_vectors: dir.join("xx.vec"),
        other_concepts: dir.join("xx.concepts.txt"),
        other_map: dir.join("xx.map.tsv"),
    };
    write_vec_file(&en, &files.pivot_vectors)?;
    write_vec_file(&xx, &files.other_vectors)?;
    let write = |path: &Path, text: String| std::fs::write(path, text).map_err(|e| Error::io(path, e));
    write(&files.pivot_concepts, en.tokens().join("\n") + "\n")?;
    write(&files.other_concepts, xx.tokens().join("\n") + "\n")?;
    let seeds = builtin_spec("ekman7")?.components;
    write(&files.seeds, seeds.join("\n") + "\n")?;
    write(&files.other_map, map)?;
    Ok(files)
}

/// Every token of `set` as a concept list.
pub fn all_concepts(set: &EmbeddingSet, language_tag: &str) -> ConceptList {
    ConceptList::new(set.tokens().to_vec(), language_tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{load_builtin_model, TranslationMap};
    use crate::linalg::cosine;

    #[test]
    fn lexicon_contains_model_words() {
        let set = synthetic_lexicon(1, LexiconShape::default(), "");
        assert_eq!(set.len(), head_words().len() * 6);
        for name in ["ekman7", "hicem15", "hicem25"] {
            assert!(load_builtin_model(name, &set).is_ok(), "{name}");
        }
        let sim = cosine(set.vector("anger").unwrap(), set.vector("anger_1").unwrap()).unwrap();
        assert!(sim > 0.7, "{sim}");
        assert_eq!(set, synthetic_lexicon(1, LexiconShape::default(), ""));
    }

    #[test]
    fn translation_map_resolves() {
        let en = synthetic_lexicon(2, LexiconShape { satellites: 1, ..Default::default() }, "");
        let (xx, text) = translated_lexicon(&en, "xx_", 3);
        let map = TranslationMap::parse(&text, "xx", Path::new("map.tsv")).unwrap();
        assert!(map.unresolved(&en).is_empty());
        assert_eq!(map.get("xx_fear"), Some("fear"));
        assert_eq!(xx.len(), en.len());
    }

    #[test]
    fn corpus_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_corpus(dir.path(), 5).unwrap();
        let loaded = crate::embedding::load_vec_file(&files.pivot_vectors, None).unwrap();
        assert_eq!(loaded.set.matrix(), synthetic_lexicon(5, LexiconShape::default(), "").matrix());
    }
}
