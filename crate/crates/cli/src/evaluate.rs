//! coverage, recover, evaluate-suite.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use emocov_core::aggregation::{ModelSpec, TranslationMap};
use emocov_core::embedding::{load_concepts, load_vec_file, ConceptList};
use emocov_core::evaluation::{
    coverage as coverage_report, evaluate_suite, random_model, recoverable_information, LanguageInput, Metric, Solver,
};
use emocov_core::manifest::derive_indexed_seed;
use emocov_core::reduction::Method;
use emocov_core::vad::{coverage_heatmap, Grid};
use emocov_core::{ReducedEmbedding, RecoveryParams};
use serde::{Deserialize, Serialize};

use crate::run::{present, required, resolve_model, serde_name, slug, wanted_tokens, Run, UsageError};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct CoverageArgs {
    /// Bundled model names or model JSON paths, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub model: Option<Vec<String>>,
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub lang: Option<String>,
    /// 2-d coordinates (from `reduce`) for a log-similarity map per model
    #[arg(long)]
    pub coords: Option<PathBuf>,
    /// Map resolution in cells per side [default: 48]
    #[arg(long)]
    pub grid: Option<usize>,
    /// Similarities above this are clamped before the log [default: 0.5]
    #[arg(long)]
    pub ceiling: Option<f64>,
}

struct Loaded {
    specs: Vec<ModelSpec>,
    concepts: ConceptList,
    lexicon: emocov_core::EmbeddingSet,
}

fn load_models(run: &mut Run, models: Option<Vec<String>>, concepts: Option<PathBuf>, vectors: Option<PathBuf>, lang: &str) -> anyhow::Result<Loaded> {
    let names = required(models, "model")?;
    let specs = names.iter().map(|m| run.model_spec(m)).collect::<anyhow::Result<Vec<_>>>()?;
    let concepts = run.concepts(&required(concepts, "concepts")?, lang)?;
    let lexicon = run.lexicon_for(&required(vectors, "vectors")?, &wanted_tokens(&concepts, &specs))?;
    let concepts = present(&concepts, &lexicon);
    Ok(Loaded { specs, concepts, lexicon })
}

pub fn coverage(a: CoverageArgs, run: &mut Run) -> anyhow::Result<()> {
    let lang = a.lang.unwrap_or_else(|| "en".into());
    let data = load_models(run, a.model, a.concepts, a.vectors, &lang)?;
    let coords = match &a.coords {
        Some(path) => {
            run.input(path)?;
            let text = std::fs::read_to_string(path).map_err(|e| emocov_core::Error::Io { path: path.clone(), source: e })?;
            Some(ReducedEmbedding::from_tsv(&text, Method::Umap, 0)?)
        }
        None => None,
    };
    let side = a.grid.unwrap_or(48);
    let ceiling = a.ceiling.unwrap_or(0.5);
    for spec in &data.specs {
        let model = resolve_model(spec, &data.lexicon, "external")?;
        let report = coverage_report(&model, &data.concepts, &data.lexicon)?;
        let name = slug(&model.name);
        run.write_json(&format!("coverage_{name}.json"), &report)?;
        run.write(&format!("coverage_{name}.csv"), report.to_csv())?;
        if let Some(coords) = &coords {
            run.param("map", serde_json::json!({ "grid": side, "ceiling": ceiling }));
            let map = coverage_heatmap(coords, &report, Grid { width: side, height: side }, ceiling)?;
            run.write(&format!("coverage_map_{name}.csv"), map.to_csv())?;
        }
        println!(
            "{}: mean coverage {:.4} over {} concepts ({} components)",
            model.name,
            report.average_coverage,
            report.records.len(),
            model.len()
        );
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct RecoveryArgs {
    /// Ridge penalty [default: 1.0]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// ridge or pinv [default: ridge]
    #[arg(long, value_parser = serde_name::<Solver>)]
    pub solver: Option<Solver>,
    /// Z-score similarity features before fitting
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    /// Fit an intercept
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fit_intercept: Option<bool>,
    /// Score on the training words (sanity check only)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub train_is_test: Option<bool>,
}

impl RecoveryArgs {
    fn params(&self, split_seed: u64) -> RecoveryParams {
        let d = RecoveryParams::default();
        RecoveryParams {
            split_seed,
            lambda: self.lambda.unwrap_or(d.lambda),
            solver: self.solver.unwrap_or(d.solver),
            standardize: self.standardize.unwrap_or(d.standardize),
            fit_intercept: self.fit_intercept.unwrap_or(d.fit_intercept),
            train_is_test: self.train_is_test.unwrap_or(d.train_is_test),
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct RecoverArgs {
    /// Bundled model names or model JSON paths, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub model: Option<Vec<String>>,
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub lang: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub recovery: RecoveryArgs,
}

pub fn recover(a: RecoverArgs, run: &mut Run) -> anyhow::Result<()> {
    let lang = a.lang.unwrap_or_else(|| "en".into());
    let data = load_models(run, a.model, a.concepts, a.vectors, &lang)?;
    let params = a.recovery.params(run.stage_seed("recover"));
    run.param("recovery", params);
    for spec in &data.specs {
        let model = resolve_model(spec, &data.lexicon, "external")?;
        let report = recoverable_information(&model, &data.concepts, &data.lexicon, &params)?;
        let name = slug(&model.name);
        run.write_json(&format!("recover_{name}.json"), &report)?;
        let mut csv = String::from("token,recovered\n");
        for (t, s) in &report.per_word {
            csv.push_str(&format!("{t},{s:?}\n"));
        }
        run.write(&format!("recover_{name}.csv"), csv)?;
        println!(
            "{}: mean recovered similarity {:.4} on {} held-out words",
            model.name,
            report.average_recovered,
            report.test.len()
        );
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct SuiteArgs {
    /// Bundled model names or model JSON paths, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Language tags, comma-separated; the first is the pivot
    #[arg(long, value_delimiter = ',')]
    pub langs: Option<Vec<String>>,
    /// Directory holding LANG.vec, LANG.concepts.txt and, for non-pivot
    /// languages, LANG.map.tsv (LANG token -> pivot token)
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// coverage, recovery, or both when omitted
    #[arg(long, value_parser = serde_name::<Metric>)]
    pub metric: Option<Metric>,
    /// Random-model sizes to add as baselines, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub random: Option<Vec<usize>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub recovery: RecoveryArgs,
}

/// Pivot-language labels expressed in another language through the inverse
/// of its map. The smallest source token wins when several map to one label.
fn localize(spec: &ModelSpec, map: Option<&TranslationMap>) -> anyhow::Result<ModelSpec> {
    let Some(map) = map else {
        return Ok(spec.clone());
    };
    let mut inverse: BTreeMap<&str, &str> = BTreeMap::new();
    for (src, dst) in &map.entries {
        inverse.entry(dst.as_str()).or_insert(src.as_str());
    }
    let components = spec
        .components
        .iter()
        .map(|c| {
            inverse.get(c.as_str()).map(|s| s.to_string()).ok_or_else(|| {
                emocov_core::Error::UnmappedToken { token: c.clone(), language: map.language_tag.clone() }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModelSpec { name: spec.name.clone(), components, notes: spec.notes.clone() })
}

pub fn suite(a: SuiteArgs, run: &mut Run) -> anyhow::Result<()> {
    let names = required(a.models, "models")?;
    let langs = required(a.langs, "langs")?;
    let dir = required(a.data_dir, "data-dir")?;
    if langs.is_empty() {
        return Err(UsageError("--langs is empty".into()).into());
    }
    let specs = names.iter().map(|m| run.model_spec(m)).collect::<anyhow::Result<Vec<_>>>()?;
    let sizes = a.random.unwrap_or_default();
    let mut inputs = Vec::new();
    for (li, lang) in langs.iter().enumerate() {
        let file = |suffix: &str| dir.join(format!("{lang}.{suffix}"));
        let concepts_path = file("concepts.txt");
        run.input(&concepts_path)?;
        let concepts = load_concepts(&concepts_path, lang)?;
        let map = if li == 0 {
            None
        } else {
            let path = file("map.tsv");
            if Path::new(&path).exists() {
                run.input(&path)?;
                Some(TranslationMap::load(&path, lang)?)
            } else {
                None
            }
        };
        let local = specs.iter().map(|s| localize(s, map.as_ref())).collect::<anyhow::Result<Vec<_>>>()?;
        let vectors = file("vec");
        run.input(&vectors)?;
        let lexicon = load_vec_file(&vectors, Some(&wanted_tokens(&concepts, &local)))?.set;
        let concepts = present(&concepts, &lexicon);
        let mut models = local.iter().map(|s| resolve_model(s, &lexicon, "external")).collect::<anyhow::Result<Vec<_>>>()?;
        for &size in &sizes {
            let seed = derive_indexed_seed(run.manifest.seed, &format!("random/{lang}"), size as u64);
            models.push(random_model(&concepts, &lexicon, size, seed)?);
        }
        inputs.push(LanguageInput { language: lang.clone(), concepts, lexicon, models });
    }
    for &size in &sizes {
        run.stage_seed(&format!("random/size{size}"));
    }
    let params = a.recovery.params(run.stage_seed("recover"));
    run.param("recovery", params);
    let metrics = match a.metric {
        Some(m) => vec![m],
        None => vec![Metric::Coverage, Metric::Recovery],
    };
    for metric in metrics {
        let table = evaluate_suite(&inputs, metric, &params)?;
        let stem = match metric {
            Metric::Coverage => "suite_coverage",
            Metric::Recovery => "suite_recovery",
        };
        run.write(&format!("{stem}.md"), table.to_markdown())?;
        run.write(&format!("{stem}.csv"), table.to_csv())?;
        println!("{}", stem.replace('_', " "));
        print!("{}", table.to_markdown());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn localize_inverts_map() {
        let map = TranslationMap::parse("xx_joy\tjoy\nxx_fear\tfear\nxx_dread\tfear\n", "xx", Path::new("m")).unwrap();
        let spec = ModelSpec { name: "m".into(), components: vec!["fear".into(), "joy".into()], notes: String::new() };
        let local = localize(&spec, Some(&map)).unwrap();
        assert_eq!(local.components, ["xx_dread", "xx_joy"]);
        let missing = ModelSpec { components: vec!["anger".into()], ..spec };
        assert!(localize(&missing, Some(&map)).is_err());
    }
}
