//! Analysis of annotation tables that pair categorical emotion scores with
//! valence, arousal and dominance ratings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::CoverageReport;
use crate::linalg::MatDense;
use crate::reduction::{reduce_umap_rows, Metric, ReducedEmbedding, UmapParams};

/// Maps CSV columns to roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSchema {
    #[serde(default)]
    pub id_column: Option<String>,
    pub valence: String,
    pub arousal: String,
    pub dominance: String,
    pub categories: Vec<String>,
    /// Source scale of the VAD columns, rescaled to `[0, 1]` on load.
    #[serde(default = "unit_range")]
    pub vad_range: (f64, f64),
}

fn unit_range() -> (f64, f64) {
    (0.0, 1.0)
}

impl AnnotationSchema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VadDim {
    Valence,
    Arousal,
    Dominance,
}

impl VadDim {
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTable {
    pub ids: Vec<String>,
    pub categories: Vec<String>,
    /// `samples x categories`, each in `[0, 1]`.
    pub scores: MatDense,
    /// `samples x 3` (valence, arousal, dominance), each in `[0, 1]`.
    pub vad: MatDense,
    pub source_vad_range: (f64, f64),
    /// Number of values clamped into range while loading.
    pub clamped: usize,
}

impl AnnotationTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn column(&self, dim: VadDim) -> Vec<f64> {
        self.vad.row_iter().map(|r| r[dim.index()]).collect()
    }

    pub fn category_index(&self, name: &str) -> Result<usize> {
        self.categories
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    }

    /// Writes the table back out with columns `id, valence, arousal,
    /// dominance, <categories>` on the `[0, 1]` scale.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,valence,arousal,dominance");
        for c in &self.categories {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&self.ids[i]);
            for v in self.vad.row(i).iter().chain(self.scores.row(i)) {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn default_schema(&self) -> AnnotationSchema {
        AnnotationSchema {
            id_column: Some("id".into()),
            valence: "valence".into(),
            arousal: "arousal".into(),
            dominance: "dominance".into(),
            categories: self.categories.clone(),
            vad_range: unit_range(),
        }
    }
}

pub fn load_annotations(path: impl AsRef<Path>, schema: &AnnotationSchema) -> Result<AnnotationTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotations(file, schema)
}

pub fn read_annotations<R: Read>(reader: R, schema: &AnnotationSchema) -> Result<AnnotationTable> {
    if schema.categories.is_empty() {
        return Err(Error::InvalidParameter("schema lists no categories".into()));
    }
    let (lo, hi) = schema.vad_range;
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("empty VAD range ({lo}, {hi})")));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let id_col = schema.id_column.as_deref().map(find).transpose()?;
    let vad_cols = [find(&schema.valence)?, find(&schema.arousal)?, find(&schema.dominance)?];
    let cat_cols = schema.categories.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut ids = Vec::new();
    let mut scores = Vec::new();
    let mut vad = Vec::new();
    let mut clamped = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    row: row + 1,
                    column: headers[col].to_string(),
                    value: raw.to_string(),
                })
        };
        let mut clamp = |v: f64| {
            if (0.0..=1.0).contains(&v) {
                v
            } else {
                clamped += 1;
                v.clamp(0.0, 1.0)
            }
        };
        for &c in &vad_cols {
            vad.push(clamp((cell(c)? - lo) / (hi - lo)));
        }
        for &c in &cat_cols {
            scores.push(clamp(cell(c)?));
        }
        ids.push(match id_col {
            Some(c) => record.get(c).unwrap_or("").to_string(),
            None => format!("s{row}"),
        });
    }
    let n = ids.len();
    Ok(AnnotationTable {
        ids,
        categories: schema.categories.clone(),
        scores: MatDense::new(n, schema.categories.len(), scores)?,
        vad: MatDense::new(n, 3, vad)?,
        source_vad_range: schema.vad_range,
        clamped,
    })
}

/// How a sample's categorical score turns into membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// Samples scoring at least this much count fully.
    Threshold(f64),
    /// Every sample counts with its score as weight.
    Weighted,
}

impl Default for Membership {
    fn default() -> Self {
        Membership::Threshold(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub category: String,
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
    /// Contributing samples (nonzero weight).
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub stats: Vec<CategoryStat>,
    /// Categories with no contributing sample.
    pub empty: Vec<String>,
}

impl CategoryStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,valence,arousal,dominance,count\n");
        for s in &self.stats {
            let _ = writeln!(out, "{},{:?},{:?},{:?},{}", s.category, s.valence, s.arousal, s.dominance, s.count);
        }
        out
    }
}

pub fn category_stats(table: &AnnotationTable, membership: Membership) -> CategoryStats {
    let results: Vec<std::result::Result<CategoryStat, String>> = (0..table.categories.len())
        .into_par_iter()
        .map(|c| {
            let mut acc = [0.0; 3];
            let mut total = 0.0;
            let mut count = 0;
            for i in 0..table.len() {
                let s = table.scores.get(i, c);
                let w = match membership {
                    Membership::Threshold(t) if s >= t => 1.0,
                    Membership::Threshold(_) => 0.0,
                    Membership::Weighted => s,
                };
                if w > 0.0 {
                    count += 1;
                    total += w;
                    for (a, v) in acc.iter_mut().zip(table.vad.row(i)) {
                        *a += w * v;
                    }
                }
            }
            if count == 0 {
                return Err(table.categories[c].clone());
            }
            Ok(CategoryStat {
                category: table.categories[c].clone(),
                valence: acc[0] / total,
                arousal: acc[1] / total,
                dominance: acc[2] / total,
                count,
            })
        })
        .collect();
    let mut out = CategoryStats { stats: Vec::new(), empty: Vec::new() };
    for r in results {
        match r {
            Ok(s) => out.stats.push(s),
            Err(name) => out.empty.push(name),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircumplexPoint {
    pub category: String,
    pub x: f64,
    pub y: f64,
    /// Sample count, used for marker size.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circumplex {
    pub center: (f64, f64),
    pub points: Vec<CircumplexPoint>,
    /// Categories whose mean sits on the centre and have no direction.
    pub degenerate: Vec<String>,
}

/// Direction of `(valence, arousal) - center` as a unit vector.
pub fn project_point(category: &str, valence: f64, arousal: f64, center: (f64, f64)) -> Result<(f64, f64)> {
    let (dx, dy) = (valence - center.0, arousal - center.1);
    let len = dx.hypot(dy);
    if len < 1e-12 {
        return Err(Error::DegenerateCenterCategory(category.into()));
    }
    Ok((dx / len, dy / len))
}

pub fn circumplex_projection(stats: &CategoryStats, center: (f64, f64)) -> Circumplex {
    let mut out = Circumplex { center, points: Vec::new(), degenerate: Vec::new() };
    for s in &stats.stats {
        match project_point(&s.category, s.valence, s.arousal, center) {
            Ok((x, y)) => out.points.push(CircumplexPoint { category: s.category.clone(), x, y, count: s.count }),
            Err(_) => out.degenerate.push(s.category.clone()),
        }
    }
    out
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::TooFewPoints(x.len()));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between two VAD dimensions over all samples.
pub fn vad_correlation(table: &AnnotationTable, a: VadDim, b: VadDim) -> Result<f64> {
    pearson(&table.column(a), &table.column(b))
}

/// Correlation between two VAD dimensions over category means.
pub fn stats_correlation(stats: &CategoryStats, a: VadDim, b: VadDim) -> Result<f64> {
    let pick = |s: &CategoryStat, d: VadDim| match d {
        VadDim::Valence => s.valence,
        VadDim::Arousal => s.arousal,
        VadDim::Dominance => s.dominance,
    };
    let x: Vec<f64> = stats.stats.iter().map(|s| pick(s, a)).collect();
    let y: Vec<f64> = stats.stats.iter().map(|s| pick(s, b)).collect();
    pearson(&x, &y)
}

/// 2-d UMAP of the samples' categorical score vectors. Euclidean distance is
/// used because all-zero score rows are common.
pub fn embed_scores(table: &AnnotationTable, params: &UmapParams) -> Result<ReducedEmbedding> {
    let params = UmapParams {
        dims: 2,
        metric: Metric::Euclidean,
        n_neighbors: params.n_neighbors.min(table.len().saturating_sub(1)).max(1),
        ..*params
    };
    reduce_umap_rows(table.ids.clone(), &table.scores, &params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
}

/// Row-major raster over `[x0, x1] x [y0, y1]`; row 0 is the lowest `y`.
/// Cells with no data hold `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub values: Vec<Option<f64>>,
}

impl Heatmap {
    pub fn get(&self, col: usize, row: usize) -> Option<f64> {
        self.values[row * self.width + col]
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        let cw = (self.x_range.1 - self.x_range.0) / self.width as f64;
        let ch = (self.y_range.1 - self.y_range.0) / self.height as f64;
        (self.x_range.0 + (col as f64 + 0.5) * cw, self.y_range.0 + (row as f64 + 0.5) * ch)
    }

    /// Mean over filled cells.
    pub fn mean(&self) -> Option<f64> {
        let vals: Vec<f64> = self.values.iter().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("col,row,x,y,value\n");
        for row in 0..self.height {
            for col in 0..self.width {
                let (x, y) = self.cell_center(col, row);
                let v = self.get(col, row).map(|v| format!("{v:?}")).unwrap_or_default();
                let _ = writeln!(out, "{col},{row},{x:?},{y:?},{v}");
            }
        }
        out
    }
}

fn bounds(points: &[(f64, f64)]) -> ((f64, f64), (f64, f64)) {
    let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        xr = (xr.0.min(x), xr.1.max(x));
        yr = (yr.0.min(y), yr.1.max(y));
    }
    // keep a nonzero extent for collapsed point sets
    for r in [&mut xr, &mut yr] {
        if r.1 - r.0 < 1e-9 {
            *r = (r.0 - 0.5, r.1 + 0.5);
        }
    }
    (xr, yr)
}

/// Score-weighted Gaussian kernel density of one category over the sample
/// embedding, scaled so the largest cell is 1.
///
/// The extent is the bounding box of all samples plus three bandwidths, so
/// maps of different categories share one frame.
pub fn category_heatmap(
    table: &AnnotationTable,
    category: &str,
    coords: &ReducedEmbedding,
    grid: Grid,
    bandwidth: f64,
) -> Result<Heatmap> {
    if grid.width == 0 || grid.height == 0 || table.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if coords.dims() != 2 || coords.len() != table.len() {
        return Err(Error::ShapeMismatch(format!(
            "need {} two-dimensional points, got {} of dimension {}",
            table.len(),
            coords.len(),
            coords.dims()
        )));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let c = table.category_index(category)?;
    // canonical order makes the sums independent of sample order
    let mut samples: Vec<(f64, f64, f64)> = (0..table.len())
        .map(|i| (coords.coords.get(i, 0), coords.coords.get(i, 1), table.scores.get(i, c)))
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    if samples.iter().all(|s| s.2 == 0.0) {
        return Err(Error::AllZeroWeights);
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.0, s.1)).collect();
    let (xr, yr) = bounds(&pts);
    let m = 3.0 * bandwidth;
    let mut map = Heatmap {
        width: grid.width,
        height: grid.height,
        x_range: (xr.0 - m, xr.1 + m),
        y_range: (yr.0 - m, yr.1 + m),
        values: Vec::new(),
    };
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let dens: Vec<f64> = (0..grid.width * grid.height)
        .into_par_iter()
        .map(|cell| {
            let (x, y) = map.cell_center(cell % grid.width, cell / grid.width);
            samples
                .iter()
                .filter(|s| s.2 > 0.0)
                .map(|s| s.2 * (-((x - s.0).powi(2) + (y - s.1).powi(2)) * inv).exp())
                .sum()
        })
        .collect();
    let max = dens.iter().cloned().fold(0.0, f64::max);
    map.values = dens
        .into_iter()
        .map(|d| Some(if max > 0.0 { d / max } else { 0.0 }))
        .collect();
    Ok(map)
}

pub const LOG_FLOOR: f64 = 1e-6;

/// Rasterizes `ln(max(1e-6, min(similarity, ceiling)))` for every covered
/// concept into the cell nearest its coordinates, keeping the maximum per
/// cell. The extent is the bounding box of the plotted concepts.
pub fn coverage_heatmap(coords: &ReducedEmbedding, report: &CoverageReport, grid: Grid, ceiling: f64) -> Result<Heatmap> {
    if grid.width == 0 || grid.height == 0 || report.records.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if coords.dims() != 2 {
        return Err(Error::ShapeMismatch(format!("need 2-d coordinates, got {}", coords.dims())));
    }
    let index: BTreeMap<&str, usize> = coords.tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut points = Vec::with_capacity(report.records.len());
    for r in &report.records {
        let i = index
            .get(r.token.as_str())
            .ok_or_else(|| Error::TokenSetMismatch(format!("{:?} has no coordinates", r.token)))?;
        let v = r.max_similarity.min(ceiling).max(LOG_FLOOR).ln();
        points.push((coords.coords.get(*i, 0), coords.coords.get(*i, 1), v));
    }
    let (xr, yr) = bounds(&points.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>());
    let mut map = Heatmap {
        width: grid.width,
        height: grid.height,
        x_range: xr,
        y_range: yr,
        values: vec![None; grid.width * grid.height],
    };
    let cell = |v: f64, (lo, hi): (f64, f64), n: usize| (((v - lo) / (hi - lo) * n as f64).floor().max(0.0) as usize).min(n - 1);
    for (x, y, v) in points {
        let idx = cell(y, yr, grid.height) * grid.width + cell(x, xr, grid.width);
        map.values[idx] = Some(map.values[idx].map_or(v, |old: f64| old.max(v)));
    }
    Ok(map)
}

pub const FIXTURE_CATEGORIES: [&str; 4] = ["happiness", "sadness", "anger", "peace"];

/// Synthetic annotation table. Dominance follows valence with slope 0.9
/// plus small noise; each category scores high near its own corner of the
/// valence-arousal square.
pub fn synthetic_annotations(n: usize, seed: u64) -> AnnotationTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.03).expect("valid sd");
    let corners = [(0.85, 0.7), (0.15, 0.25), (0.15, 0.8), (0.8, 0.2)];
    let mut vad = Vec::with_capacity(n * 3);
    let mut scores = Vec::with_capacity(n * corners.len());
    for _ in 0..n {
        let v: f64 = rng.random_range(0.05..0.95);
        let a: f64 = rng.random_range(0.05..0.95);
        let d = (0.5 + 0.9 * (v - 0.5) + noise.sample(&mut rng)).clamp(0.0, 1.0);
        vad.extend([v, a, d]);
        for &(cv, ca) in &corners {
            let dist2 = (v - cv).powi(2) + (a - ca).powi(2);
            let s = (-dist2 / 0.08).exp() + 0.05 * rng.random::<f64>();
            scores.push((s * 1000.0).round().clamp(0.0, 1000.0) / 1000.0);
        }
    }
    AnnotationTable {
        ids: (0..n).map(|i| format!("s{i:03}")).collect(),
        categories: FIXTURE_CATEGORIES.iter().map(|c| c.to_string()).collect(),
        scores: MatDense::new(n, corners.len(), scores).expect("shape"),
        vad: MatDense::new(n, 3, vad).expect("shape"),
        source_vad_range: unit_range(),
        clamped: 0,
    }
}
