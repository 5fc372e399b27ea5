//! expand, reduce, cluster, summarize, aggregate.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use emocov_core::aggregation::{
    aggregate as aggregate_models, rename_components, top_summaries, AggregateParams, ClusterSpace,
    LanguageSummaries, SummaryParams, TranslationMap,
};
use emocov_core::clustering::{agglomerate, cut, default_k_range, distortion_curve, find_elbow, summarize as summary_words};
use emocov_core::embedding::load_concepts;
use emocov_core::expansion::{expand_pairwise, merge_candidates, ExpansionParams};
use emocov_core::reduction::{reduce_pca, reduce_svd, reduce_umap, Metric};
use emocov_core::{Linkage, Method, ReducedEmbedding, SummaryMode, UmapParams};
use serde::{Deserialize, Serialize};

use crate::run::{key_value, required, serde_name, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExpandArgs {
    /// Seed word list, one token per line
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    /// Word vectors in .vec text format
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Language tag [default: en]
    #[arg(long)]
    pub lang: Option<String>,
    /// Candidates kept per seed pair [default: 10]
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Minimum cosine similarity to the pair average [default: 0.5]
    #[arg(long)]
    pub min_sim: Option<f64>,
    /// Unit-normalize seed vectors before averaging
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
}

pub fn expand(a: ExpandArgs, run: &mut Run) -> anyhow::Result<()> {
    let lang = a.lang.unwrap_or_else(|| "en".into());
    let seeds = run.concepts(&required(a.seeds, "seeds")?, &lang)?;
    let lexicon = run.lexicon(&required(a.vectors, "vectors")?)?;
    let defaults = ExpansionParams::default();
    let params = ExpansionParams {
        top_k: a.top_k.unwrap_or(defaults.top_k),
        min_sim: a.min_sim.unwrap_or(defaults.min_sim),
        normalize: a.normalize.unwrap_or(defaults.normalize),
    };
    run.param("expansion", params);
    let report = expand_pairwise(&seeds, &lexicon, &params)?;
    let merged = merge_candidates(&report, &seeds);
    run.write_json("candidates.json", &report)?;
    run.write("candidates.tsv", report.to_tsv())?;
    run.write("concepts.txt", merged.entries().join("\n") + "\n")?;
    let found: usize = report.pairs.iter().map(|p| p.candidates.len()).sum();
    println!(
        "{} seeds, {} pairs, {found} candidates; expanded list has {} words",
        seeds.len(),
        report.pairs.len(),
        merged.len()
    );
    Ok(())
}

/// UMAP options shared by several commands.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct UmapArgs {
    /// UMAP neighbourhood size [default: 15]
    #[arg(long)]
    pub n_neighbors: Option<usize>,
    /// UMAP minimum embedded distance [default: 0.1]
    #[arg(long)]
    pub min_dist: Option<f64>,
    /// UMAP spread [default: 1.0]
    #[arg(long)]
    pub spread: Option<f64>,
    /// UMAP optimisation epochs [default: 500]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Negative samples per positive edge [default: 5]
    #[arg(long)]
    pub negative_sample_rate: Option<usize>,
    /// kNN metric: cosine_distance or euclidean [default: cosine_distance]
    #[arg(long, value_parser = serde_name::<Metric>)]
    pub metric: Option<Metric>,
    /// Lock-free parallel SGD; faster but not bit-reproducible
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub hogwild: Option<bool>,
}

impl UmapArgs {
    pub fn params(&self, dims: usize, seed: u64) -> UmapParams {
        let d = UmapParams::default();
        UmapParams {
            n_neighbors: self.n_neighbors.unwrap_or(d.n_neighbors),
            min_dist: self.min_dist.unwrap_or(d.min_dist),
            spread: self.spread.unwrap_or(d.spread),
            dims,
            epochs: self.epochs.unwrap_or(d.epochs),
            negative_sample_rate: self.negative_sample_rate.unwrap_or(d.negative_sample_rate),
            metric: self.metric.unwrap_or(d.metric),
            seed,
            deterministic: !self.hogwild.unwrap_or(false),
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReduceArgs {
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Concept list selecting the rows to reduce
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    #[arg(long)]
    pub lang: Option<String>,
    /// umap, pca or svd [default: umap]
    #[arg(long, value_parser = serde_name::<Method>)]
    pub method: Option<Method>,
    /// Output dimension [default: 2]
    #[arg(long)]
    pub dims: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub umap: UmapArgs,
}

pub fn reduce(a: ReduceArgs, run: &mut Run) -> anyhow::Result<()> {
    let lang = a.lang.unwrap_or_else(|| "en".into());
    let concepts = run.concepts(&required(a.concepts, "concepts")?, &lang)?;
    let set = run.lexicon_for(&required(a.vectors, "vectors")?, &concepts)?;
    let dims = a.dims.unwrap_or(2);
    let method = a.method.unwrap_or(Method::Umap);
    let reduced = match method {
        Method::Umap => {
            let params = a.umap.params(dims, run.stage_seed("reduce"));
            run.param("umap", params);
            reduce_umap(&set, &params)?
        }
        Method::Pca => reduce_pca(&set, dims)?,
        Method::Svd => reduce_svd(&set, dims)?,
    };
    run.param("method", method);
    run.param("reduced", &reduced.hyperparams);
    run.write("coords.tsv", reduced.to_tsv())?;
    println!("reduced {} tokens from {} to {} dimensions with {method}", set.len(), set.dim(), dims);
    Ok(())
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ClusterArgs {
    /// Coordinate table written by `reduce`
    #[arg(long)]
    pub coords: Option<PathBuf>,
    /// centroid, ward or average [default: centroid]
    #[arg(long, value_parser = serde_name::<Linkage>)]
    pub linkage: Option<Linkage>,
    /// Cluster count; defaults to the distortion elbow
    #[arg(long)]
    pub k: Option<usize>,
    /// Largest k on the distortion curve [default: 40]
    #[arg(long)]
    pub k_max: Option<usize>,
    /// centroid-medoid or median-medoid [default: centroid-medoid]
    #[arg(long, value_parser = serde_name::<SummaryMode>)]
    pub mode: Option<SummaryMode>,
}

pub fn cluster(a: ClusterArgs, run: &mut Run) -> anyhow::Result<()> {
    let path = required(a.coords, "coords")?;
    run.input(&path)?;
    let text = std::fs::read_to_string(&path).map_err(|e| emocov_core::Error::Io { path: path.clone(), source: e })?;
    let coords = ReducedEmbedding::from_tsv(&text, Method::Umap, 0)?;
    let linkage = a.linkage.unwrap_or_default();
    run.param("linkage", linkage);
    let tree = agglomerate(&coords.coords, linkage)?;
    let k_max = a.k_max.unwrap_or(40);
    let ks: Vec<usize> = default_k_range(coords.len()).into_iter().filter(|&k| k <= k_max).collect();
    let curve = distortion_curve(&tree, &coords.coords, &ks)?;
    let elbow = find_elbow(&curve);
    let k = match (a.k, &elbow) {
        (Some(k), _) => k,
        (None, Ok(e)) => e.k,
        (None, Err(_)) => return Err(anyhow::Error::new(elbow.unwrap_err()).context("cannot pick k; pass --k")),
    };
    run.param("k", k);
    let clustering = cut(&tree, &coords.coords, k)?;
    let summaries = summary_words(&clustering, &coords.coords, &coords.tokens, a.mode.unwrap_or_default())?;

    run.write("dendrogram.json", tree.to_json()?)?;
    run.write("distortion.csv", curve.to_csv())?;
    match &elbow {
        Ok(e) => run.write_json("elbow.json", e)?,
        Err(e) => run.write_json("elbow.json", &serde_json::json!({ "error": e.to_string() }))?,
    };
    run.write("clusters.tsv", clustering.to_tsv(&coords.tokens))?;
    run.write("cluster_summaries.txt", summaries.join("\n") + "\n")?;
    if coords.dims() >= 2 {
        let mut points = String::from("token\tx\ty\tcluster\n");
        for (i, t) in coords.tokens.iter().enumerate() {
            points.push_str(&format!(
                "{t}\t{:?}\t{:?}\t{}\n",
                coords.coords.get(i, 0),
                coords.coords.get(i, 1),
                clustering.assignment[i]
            ));
        }
        run.write("cluster_points.tsv", points)?;
    }
    match elbow {
        Ok(e) => println!(
            "{} points, elbow at k = {}{}; cut into {k} clusters",
            coords.len(),
            e.k,
            if e.degenerate { " (degenerate curve)" } else { "" }
        ),
        Err(_) => println!("{} points; cut into {k} clusters", coords.len()),
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    #[arg(long)]
    pub lang: Option<String>,
    /// Clusters to cut, one summary word each [default: 50]
    #[arg(long)]
    pub k: Option<usize>,
    /// Clustering space: umap or raw [default: umap]
    #[arg(long, value_parser = serde_name::<ClusterSpace>)]
    pub space: Option<ClusterSpace>,
    #[arg(long, value_parser = serde_name::<Linkage>)]
    pub linkage: Option<Linkage>,
    #[arg(long, value_parser = serde_name::<SummaryMode>)]
    pub mode: Option<SummaryMode>,
    #[command(flatten)]
    #[serde(flatten)]
    pub umap: UmapArgs,
}

pub fn summarize(a: SummarizeArgs, run: &mut Run) -> anyhow::Result<()> {
    let lang = a.lang.unwrap_or_else(|| "en".into());
    let concepts = run.concepts(&required(a.concepts, "concepts")?, &lang)?;
    let set = run.lexicon_for(&required(a.vectors, "vectors")?, &concepts)?;
    let d = SummaryParams::default();
    let params = SummaryParams {
        k_top: a.k.unwrap_or(d.k_top),
        space: a.space.unwrap_or(d.space),
        umap: a.umap.params(2, run.stage_seed("summarize")),
        linkage: a.linkage.unwrap_or(d.linkage),
        summary: a.mode.unwrap_or(d.summary),
    };
    run.param("summary", params);
    let summaries = top_summaries(&set, &params)?;
    run.write("summaries.txt", summaries.join("\n") + "\n")?;
    run.write_json("summaries.json", &LanguageSummaries { language: lang.clone(), summaries: summaries.clone() })?;
    println!("{lang}: {} summary words from {} concepts", summaries.len(), set.len());
    Ok(())
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct AggregateArgs {
    /// Per-language summary list, as LANG=PATH (repeatable)
    #[arg(long = "summaries", value_name = "LANG=PATH")]
    pub summaries: Option<Vec<String>>,
    /// Translation map into the pivot language, as LANG=PATH (repeatable)
    #[arg(long = "map", value_name = "LANG=PATH")]
    pub maps: Option<Vec<String>>,
    /// Pivot-language vectors
    #[arg(long)]
    pub pivot_vectors: Option<PathBuf>,
    /// Name of the resulting model [default: aggregate]
    #[arg(long)]
    pub name: Option<String>,
    /// Final component count [default: 15]
    #[arg(long)]
    pub k: Option<usize>,
    /// Clustering space: umap or raw [default: raw]
    #[arg(long, value_parser = serde_name::<ClusterSpace>)]
    pub space: Option<ClusterSpace>,
    #[arg(long, value_parser = serde_name::<Linkage>)]
    pub linkage: Option<Linkage>,
    #[arg(long, value_parser = serde_name::<SummaryMode>)]
    pub mode: Option<SummaryMode>,
    /// `old<TAB>new` label replacements applied to the final model
    #[arg(long)]
    pub renames: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub umap: UmapArgs,
}

pub fn aggregate(a: AggregateArgs, run: &mut Run) -> anyhow::Result<()> {
    let pivot = run.lexicon(&required(a.pivot_vectors, "pivot-vectors")?)?;
    let mut languages = Vec::new();
    for entry in required(a.summaries, "summaries")? {
        let (lang, path) = key_value(&entry)?;
        run.input(&path)?;
        let list = load_concepts(&path, &lang)?;
        languages.push(LanguageSummaries { language: lang, summaries: list.entries().to_vec() });
    }
    let mut maps = BTreeMap::new();
    for entry in a.maps.unwrap_or_default() {
        let (lang, path) = key_value(&entry)?;
        run.input(&path)?;
        maps.insert(lang.clone(), TranslationMap::load(&path, &lang)?);
    }
    let d = AggregateParams::default();
    let params = AggregateParams {
        k: a.k.unwrap_or(d.k),
        space: a.space.unwrap_or(d.space),
        umap: a.umap.params(2, run.stage_seed("aggregate")),
        linkage: a.linkage.unwrap_or(d.linkage),
        summary: a.mode.unwrap_or(d.summary),
    };
    run.param("aggregate", params);
    let name = a.name.unwrap_or_else(|| "aggregate".into());
    let mut model = aggregate_models(&name, &languages, &maps, &pivot, &params)?;
    if let Some(path) = a.renames {
        run.input(&path)?;
        let renames = TranslationMap::load(&path, "renames")?;
        model = rename_components(&model, &renames, &pivot)?;
    }
    let langs: Vec<&str> = languages.iter().map(|l| l.language.as_str()).collect();
    let spec = model.spec(&format!("aggregated from {}", langs.join(", ")));
    run.write("model.json", spec.to_json()?)?;
    run.write("components.txt", model.components.join("\n") + "\n")?;
    println!("{name}: {} components from {} languages: {}", model.len(), langs.len(), model.components.join(", "));
    Ok(())
}
