//! plot.

use std::path::{Component, Path, PathBuf};

use clap::Args;
use emocov_core::plot::{render, PlotInput, PlotKind};
use serde::{Deserialize, Serialize};

use crate::run::{required, Run, UsageError};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct PlotArgs {
    /// scatter, heatmap, histogram or curve
    #[arg(long)]
    pub kind: Option<String>,
    /// Input table (repeatable; histogram and curve draw one series each)
    #[arg(long)]
    pub data: Option<Vec<PathBuf>>,
    /// SVG file name, written inside the output directory
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub title: Option<String>,
}

pub fn plot(a: PlotArgs, run: &mut Run) -> anyhow::Result<()> {
    let kind: PlotKind = required(a.kind, "kind")?
        .parse()
        .map_err(|e: emocov_core::Error| UsageError(e.to_string()))?;
    let out = required(a.out, "out")?;
    let plain = matches!(Path::new(&out).components().collect::<Vec<_>>().as_slice(), [Component::Normal(_)]);
    if !plain || !out.ends_with(".svg") {
        return Err(UsageError(format!("--out must be a bare file name ending in .svg, got {out:?}")).into());
    }
    let stem = out.trim_end_matches(".svg").to_string();
    run.rename_manifest(&format!("plot.{stem}"));
    let mut inputs = Vec::new();
    for path in required(a.data, "data")? {
        run.input(&path)?;
        let text = std::fs::read_to_string(&path).map_err(|e| emocov_core::Error::Io { path: path.clone(), source: e })?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        inputs.push(PlotInput { name, text });
    }
    let svg = render(kind, &inputs, a.title.as_deref().unwrap_or(""))?;
    let path = run.write(&out, svg)?;
    println!("wrote {}", path.display());
    Ok(())
}
