//! Concept-list expansion: for every pair of seed words, look up the lexicon
//! words closest to the average of the two seed vectors.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{ConceptList, EmbeddingSet};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionParams {
    pub top_k: usize,
    pub min_sim: f64,
    /// Unit-normalize each seed vector before averaging.
    pub normalize: bool,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        ExpansionParams {
            top_k: 10,
            min_sim: 0.5,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub token: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCandidates {
    pub seed_a: String,
    pub seed_b: String,
    /// Sorted by similarity, highest first.
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub params: Option<ExpansionParams>,
    pub pairs: Vec<PairCandidates>,
}

impl CandidateReport {
    /// One `pair<TAB>candidate<TAB>similarity` row per candidate, for review.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("pair\tcandidate\tsimilarity\n");
        for p in &self.pairs {
            for c in &p.candidates {
                out.push_str(&format!(
                    "{}+{}\t{}\t{:.6}\n",
                    p.seed_a, p.seed_b, c.token, c.similarity
                ));
            }
        }
        out
    }
}

/// Averages every unordered pair of seeds and returns the nearest lexicon
/// words to each average.
///
/// Seeds themselves never appear as candidates. Pairs come out in seed-list
/// order (`(0,1), (0,2), ..., (1,2), ...`) regardless of thread scheduling.
pub fn expand_pairwise(
    seeds: &ConceptList,
    lexicon: &EmbeddingSet,
    params: &ExpansionParams,
) -> Result<CandidateReport> {
    if lexicon.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    if params.top_k == 0 {
        return Err(Error::InvalidParameter("top_k must be >= 1".into()));
    }
    if !(-1.0..=1.0).contains(&params.min_sim) {
        return Err(Error::InvalidParameter(format!(
            "min_sim must lie in [-1, 1], got {}",
            params.min_sim
        )));
    }
    let seed_rows = seeds
        .entries()
        .iter()
        .map(|s| {
            lexicon
                .index_of(s)
                .ok_or_else(|| Error::SeedNotInLexicon(s.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let seed_set: HashSet<usize> = seed_rows.iter().copied().collect();
    let lex_norms: Vec<f64> = (0..lexicon.len()).map(|i| norm(lexicon.row(i))).collect();

    let pairs: Vec<(usize, usize)> = (0..seed_rows.len())
        .flat_map(|i| ((i + 1)..seed_rows.len()).map(move |j| (i, j)))
        .collect();

    let results = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mean = pair_mean(
                lexicon.row(seed_rows[i]),
                lexicon.row(seed_rows[j]),
                params.normalize,
            );
            PairCandidates {
                seed_a: seeds.entries()[i].clone(),
                seed_b: seeds.entries()[j].clone(),
                candidates: nearest(&mean, lexicon, &lex_norms, &seed_set, params),
            }
        })
        .collect();

    Ok(CandidateReport {
        params: Some(*params),
        pairs: results,
    })
}

fn pair_mean(a: &[f64], b: &[f64], normalize: bool) -> Vec<f64> {
    if normalize {
        let (na, nb) = (norm(a), norm(b));
        a.iter().zip(b).map(|(x, y)| (x / na + y / nb) / 2.0).collect()
    } else {
        a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect()
    }
}

fn nearest(
    query: &[f64],
    lexicon: &EmbeddingSet,
    lex_norms: &[f64],
    exclude: &HashSet<usize>,
    params: &ExpansionParams,
) -> Vec<Candidate> {
    let qn = norm(query);
    // Antipodal seeds average to zero; there is no direction to search.
    if qn == 0.0 {
        return Vec::new();
    }
    let mut scored: Vec<(usize, f64)> = (0..lexicon.len())
        .filter(|i| !exclude.contains(i))
        .map(|i| {
            let s = (dot(query, lexicon.row(i)) / (qn * lex_norms[i])).clamp(-1.0, 1.0);
            (i, s)
        })
        .filter(|&(_, s)| s >= params.min_sim)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(params.top_k);
    scored
        .into_iter()
        .map(|(i, similarity)| Candidate {
            token: lexicon.tokens()[i].clone(),
            similarity,
        })
        .collect()
}

/// Seeds first (original order), then candidates by first appearance.
pub fn merge_candidates(report: &CandidateReport, seeds: &ConceptList) -> ConceptList {
    let all = seeds.entries().iter().cloned().chain(
        report
            .pairs
            .iter()
            .flat_map(|p| p.candidates.iter().map(|c| c.token.clone())),
    );
    ConceptList::new(all, seeds.language_tag())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MatDense;
    use proptest::prelude::*;

    fn lexicon(rows: &[(&str, &[f64])]) -> EmbeddingSet {
        let tokens = rows.iter().map(|r| r.0.to_string()).collect();
        let m = MatDense::from_rows(&rows.iter().map(|r| r.1).collect::<Vec<_>>()).unwrap();
        EmbeddingSet::new(tokens, m, "test").unwrap()
    }

    #[test]
    fn identical_seeds_find_identical_token() {
        let lex = lexicon(&[("a", &[1.0, 2.0]), ("b", &[1.0, 2.0]), ("c", &[2.0, 4.0]), ("d", &[-1.0, 0.0])]);
        let r = expand_pairwise(&ConceptList::new(["a", "b"], "en"), &lex, &ExpansionParams::default()).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].candidates[0].token, "c");
        assert!((r.pairs[0].candidates[0].similarity - 1.0).abs() < 1e-12);
        assert_eq!(r.pairs[0].candidates.len(), 1);
    }

    #[test]
    fn mean_parallel_to_third_word() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let lex = lexicon(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[s, s])]);
        let r = expand_pairwise(&ConceptList::new(["a", "b"], "en"), &lex, &ExpansionParams::default()).unwrap();
        assert_eq!(r.pairs[0].candidates[0].token, "c");
        assert!((r.pairs[0].candidates[0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_count_and_errors() {
        let lex = lexicon(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[1.0, 1.0])]);
        let r = expand_pairwise(&ConceptList::new(["a", "b", "c"], "en"), &lex, &ExpansionParams::default()).unwrap();
        assert_eq!(r.pairs.len(), 3);
        assert_eq!((r.pairs[2].seed_a.as_str(), r.pairs[2].seed_b.as_str()), ("b", "c"));
        // seeds never appear as candidates
        assert!(r.pairs.iter().all(|p| p.candidates.is_empty()));
        assert!(matches!(
            expand_pairwise(&ConceptList::new(["a", "zz"], "en"), &lex, &ExpansionParams::default()),
            Err(Error::SeedNotInLexicon(t)) if t == "zz"
        ));
        let p = ExpansionParams { top_k: 0, ..Default::default() };
        assert!(expand_pairwise(&ConceptList::new(["a", "b"], "en"), &lex, &p).is_err());
    }

    #[test]
    fn antipodal_seeds_have_no_candidates() {
        let lex = lexicon(&[("a", &[1.0, 0.0]), ("b", &[-1.0, 0.0]), ("c", &[0.0, 1.0])]);
        let p = ExpansionParams { min_sim: -1.0, ..Default::default() };
        let r = expand_pairwise(&ConceptList::new(["a", "b"], "en"), &lex, &p).unwrap();
        assert!(r.pairs[0].candidates.is_empty());
    }

    #[test]
    fn merge_examples() {
        let seeds = ConceptList::new(["happy", "sad"], "en");
        assert_eq!(merge_candidates(&CandidateReport::default(), &seeds), seeds);
        let cand = |t: &str| Candidate { token: t.into(), similarity: 0.9 };
        let report = CandidateReport {
            params: None,
            pairs: vec![
                PairCandidates { seed_a: "happy".into(), seed_b: "sad".into(), candidates: vec![cand("x")] },
                PairCandidates { seed_a: "happy".into(), seed_b: "sad".into(), candidates: vec![cand("y"), cand("x")] },
            ],
        };
        assert_eq!(merge_candidates(&report, &seeds).entries(), ["happy", "sad", "x", "y"]);
        let tsv = report.to_tsv();
        assert!(tsv.starts_with("pair\tcandidate\tsimilarity\nhappy+sad\tx\t0.900000\n"));
    }

    fn random_lexicon(vals: Vec<Vec<f64>>) -> EmbeddingSet {
        let rows: Vec<Vec<f64>> = vals.into_iter().map(|mut r| { r[0] += 20.0; r }).collect();
        let tokens = (0..rows.len()).map(|i| format!("w{i}")).collect();
        EmbeddingSet::new(tokens, MatDense::from_rows(&rows).unwrap(), "p").unwrap()
    }

    proptest! {
        #[test]
        fn expansion_properties(
            vals in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 6..14),
            top_k in 1usize..5,
            min_sim in -0.5f64..0.9,
            scale in 0.1f64..10.0,
        ) {
            let lex = random_lexicon(vals);
            let params = ExpansionParams { top_k, min_sim, normalize: false };
            let fwd = ConceptList::new(["w0", "w1", "w2"], "en");
            let rev = ConceptList::new(["w2", "w1", "w0"], "en");
            let a = expand_pairwise(&fwd, &lex, &params).unwrap();
            let b = expand_pairwise(&rev, &lex, &params).unwrap();
            // (w0,w1) <-> (w1,w0) is pair 0 in `a` and pair 2 in `b`
            prop_assert_eq!(&a.pairs[0].candidates, &b.pairs[2].candidates);
            for p in &a.pairs {
                prop_assert!(p.candidates.len() <= top_k);
                prop_assert!(p.candidates.iter().all(|c| c.similarity >= min_sim));
                prop_assert!(p.candidates.windows(2).all(|w| w[0].similarity >= w[1].similarity));
                prop_assert!(p.candidates.iter().all(|c| !fwd.contains(&c.token)));
            }
            let scaled = EmbeddingSet::new(
                lex.tokens().to_vec(),
                MatDense::new(lex.len(), 4, lex.matrix().as_slice().iter().map(|v| v * scale).collect()).unwrap(),
                "s",
            ).unwrap();
            let c = expand_pairwise(&fwd, &scaled, &params).unwrap();
            for (p, q) in a.pairs.iter().zip(&c.pairs) {
                let ta: Vec<_> = p.candidates.iter().map(|c| &c.token).collect();
                let tc: Vec<_> = q.candidates.iter().map(|c| &c.token).collect();
                prop_assert_eq!(ta, tc);
            }
        }
    }
}
