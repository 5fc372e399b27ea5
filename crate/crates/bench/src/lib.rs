//! Shared fixtures for the benchmarks.

use emocov_core::aggregation::load_builtin_model;
use emocov_core::fixtures::{synthetic_lexicon, LexiconShape};
use emocov_core::{ConceptList, EmbeddingSet, EmotionModel, MatDense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `rows x cols` matrix with entries uniform in [-1, 1).
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> MatDense {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    MatDense::new(rows, cols, values).expect("shape matches")
}

/// Synthetic lexicon with `satellites` words around every head word, the
/// whole vocabulary as the concept list, and a bundled model resolved in it.
pub fn lexicon_case(satellites: usize, model: &str) -> (EmbeddingSet, ConceptList, EmotionModel) {
    let shape = LexiconShape { satellites, ..LexiconShape::default() };
    let lexicon = synthetic_lexicon(11, shape, "");
    let concepts = ConceptList::new(lexicon.tokens().iter().cloned(), "en");
    let model = load_builtin_model(model, &lexicon).expect("heads are present");
    (lexicon, concepts, model)
}
