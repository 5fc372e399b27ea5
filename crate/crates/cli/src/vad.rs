//! analyze-vad.

use std::path::PathBuf;

use clap::Args;
use emocov_core::vad::{
    category_heatmap, category_stats, circumplex_projection, embed_scores, load_annotations, stats_correlation,
    synthetic_annotations, vad_correlation, AnnotationSchema, Grid, Membership, VadDim,
};
use serde::{Deserialize, Serialize};

use crate::pipeline::UmapArgs;
use crate::run::{required, slug, Run, UsageError};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct VadArgs {
    /// Annotation CSV
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// JSON schema mapping CSV columns to roles
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Generate a synthetic table with this many rows instead of reading one
    #[arg(long, conflicts_with_all = ["annotations", "schema"])]
    pub synthetic: Option<usize>,
    /// Score needed for category membership [default: 0.5]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Weight every sample by its score instead of thresholding
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub weighted: Option<bool>,
    /// Circumplex centre as VALENCE,AROUSAL [default: 0.5,0.5]
    #[arg(long, value_delimiter = ',')]
    pub center: Option<Vec<f64>>,
    /// Embed score vectors with UMAP and write a density map per category
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub embed: Option<bool>,
    /// Density map cells per side [default: 48]
    #[arg(long)]
    pub grid: Option<usize>,
    /// Kernel bandwidth in embedding units [default: 0.5]
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub umap: UmapArgs,
}

pub fn analyze(a: VadArgs, run: &mut Run) -> anyhow::Result<()> {
    let table = match a.synthetic {
        Some(n) => {
            let t = synthetic_annotations(n, run.stage_seed("synthetic"));
            run.write("annotations.csv", t.to_csv())?;
            run.write_json("annotations.schema.json", &t.default_schema())?;
            t
        }
        None => {
            let schema_path = required(a.schema, "schema")?;
            let data_path = required(a.annotations, "annotations")?;
            run.input(&schema_path)?;
            run.input(&data_path)?;
            let schema = AnnotationSchema::load(&schema_path)?;
            load_annotations(&data_path, &schema)?
        }
    };
    run.param("source_vad_range", table.source_vad_range);
    if table.clamped > 0 {
        let msg = format!("{} values fell outside [0, 1] and were clamped", table.clamped);
        eprintln!("warning: {msg}");
        run.note(msg);
    }
    let membership = if a.weighted.unwrap_or(false) {
        Membership::Weighted
    } else {
        Membership::Threshold(a.threshold.unwrap_or(0.5))
    };
    run.param("membership", membership);
    let center = match a.center.as_deref() {
        None => (0.5, 0.5),
        Some([v, ar]) => (*v, *ar),
        Some(other) => return Err(UsageError(format!("--center needs two numbers, got {}", other.len())).into()),
    };
    run.param("center", center);

    let stats = category_stats(&table, membership);
    for c in &stats.empty {
        eprintln!("warning: category {c:?} has no members");
    }
    let circ = circumplex_projection(&stats, center);
    run.write("category_stats.csv", stats.to_csv())?;
    let mut csv = String::from("category,x,y,count\n");
    for p in &circ.points {
        csv.push_str(&format!("{},{:?},{:?},{}\n", p.category, p.x, p.y, p.count));
    }
    run.write("circumplex.csv", csv)?;

    let pairs = [
        ("valence_arousal", VadDim::Valence, VadDim::Arousal),
        ("valence_dominance", VadDim::Valence, VadDim::Dominance),
        ("arousal_dominance", VadDim::Arousal, VadDim::Dominance),
    ];
    let mut correlations = serde_json::Map::new();
    for (name, x, y) in pairs {
        let sample = vad_correlation(&table, x, y).map_or(serde_json::Value::Null, serde_json::Value::from);
        let category = stats_correlation(&stats, x, y).map_or(serde_json::Value::Null, serde_json::Value::from);
        correlations.insert(name.into(), serde_json::json!({ "samples": sample, "category_means": category }));
    }
    let report = serde_json::json!({
        "samples": table.len(),
        "empty_categories": stats.empty,
        "degenerate_categories": circ.degenerate,
        "correlations": correlations,
    });
    run.write_json("vad_summary.json", &report)?;

    if a.embed.unwrap_or(false) {
        let params = a.umap.params(2, run.stage_seed("embed"));
        run.param("umap", params);
        let side = a.grid.unwrap_or(48);
        let bandwidth = a.bandwidth.unwrap_or(0.5);
        run.param("density", serde_json::json!({ "grid": side, "bandwidth": bandwidth }));
        let coords = embed_scores(&table, &params)?;
        run.write("score_embedding.tsv", coords.to_tsv())?;
        for cat in &table.categories {
            match category_heatmap(&table, cat, &coords, Grid { width: side, height: side }, bandwidth) {
                Ok(map) => {
                    run.write(&format!("density_{}.csv", slug(cat)), map.to_csv())?;
                }
                Err(emocov_core::Error::AllZeroWeights) => eprintln!("warning: category {cat:?} scores zero everywhere"),
                Err(e) => return Err(e.into()),
            }
        }
    }

    let vd = report["correlations"]["valence_dominance"]["samples"].as_f64();
    println!(
        "{} samples, {} categories ({} empty); valence-dominance r = {}",
        table.len(),
        table.categories.len(),
        stats.empty.len(),
        vd.map_or("undefined".into(), |r| format!("{r:.3}"))
    );
    Ok(())
}
