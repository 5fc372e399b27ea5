//! Static SVG charts. Output depends only on the input: no timestamps, no
//! random ids, and every number is printed with at most 6 significant digits.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vad::Heatmap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Scatter,
    Heatmap,
    Histogram,
    Curve,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scatter" => Ok(PlotKind::Scatter),
            "heatmap" => Ok(PlotKind::Heatmap),
            "histogram" => Ok(PlotKind::Histogram),
            "curve" => Ok(PlotKind::Curve),
            other => Err(Error::UnknownKind(other.into())),
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const LEGEND_W: f64 = 130.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Formats a number with at most 6 significant digits.
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        return "0".into();
    }
    let r: f64 = format!("{v:.5e}").parse().unwrap_or(0.0);
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Maps data ranges onto the plot area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    right: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), legend: bool) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi - lo > 1e-12 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let right = if legend { WIDTH - MARGIN - LEGEND_W } else { WIDTH - MARGIN };
        Frame { x: widen(x), y: widen(y), right }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (self.right - MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = num(WIDTH),
        h = num(HEIGHT)
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##, num(WIDTH), num(HEIGHT));
    if !title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            num(WIDTH / 2.0),
            escape(title)
        );
    }
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, r, b, t) = (MARGIN, f.right, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r##"<path d="M{} {}H{}M{} {}V{}" stroke="#000000" fill="none"/>"##,
        num(l),
        num(b),
        num(r),
        num(l),
        num(b),
        num(t)
    );
    for i in 0..=4 {
        let fx = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 4.0;
        let fy = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
        let (x, y) = (f.px(fx), f.py(fy));
        let _ = writeln!(
            out,
            r##"<path d="M{x} {b}v4M{l} {y}h-4" stroke="#000000"/><text x="{x}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{}" text-anchor="end">{}</text>"##,
            num(b + 16.0),
            num(fx),
            num(l - 6.0),
            num(y + 4.0),
            num(fy),
            x = num(x),
            y = num(y),
            b = num(b),
            l = num(l),
        );
    }
    if !xlabel.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num((l + r) / 2.0),
            num(HEIGHT - 14.0),
            escape(xlabel)
        );
    }
    if !ylabel.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="14" y="{y}" text-anchor="middle" transform="rotate(-90 14 {y})">{}</text>"#,
            escape(ylabel),
            y = num(HEIGHT / 2.0)
        );
    }
}

fn legend(out: &mut String, names: &[String]) {
    let x = WIDTH - MARGIN - LEGEND_W + 16.0;
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            num(x),
            num(y),
            PALETTE[i % PALETTE.len()],
            num(x + 14.0),
            num(y + 9.0),
            escape(name)
        );
    }
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
    /// Index into the colour palette and legend.
    pub group: usize,
    /// Marker scale; 1 is the default radius.
    pub weight: f64,
}

/// Points are `<circle>` elements; the legend uses `<rect>` swatches so that
/// circle counts equal point counts.
pub fn scatter_svg(points: &[ScatterPoint], groups: &[String], show_labels: bool, title: &str) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let f = Frame::new(
        extent(points.iter().map(|p| p.x)),
        extent(points.iter().map(|p| p.y)),
        groups.len() > 1,
    );
    axes(&mut out, &f, "", "");
    for p in points {
        let (x, y) = (f.px(p.x), f.py(p.y));
        let _ = write!(
            out,
            r#"<circle cx="{}" cy="{}" r="{}" fill="{}" fill-opacity="0.8"><title>{}</title></circle>"#,
            num(x),
            num(y),
            num(3.0 * p.weight),
            PALETTE[p.group % PALETTE.len()],
            escape(&p.label)
        );
        if show_labels {
            let _ = write!(out, r#"<text x="{}" y="{}">{}</text>"#, num(x + 4.0), num(y - 4.0), escape(&p.label));
        }
        out.push('\n');
    }
    if groups.len() > 1 {
        legend(&mut out, groups);
    }
    out.push_str("</svg>\n");
    out
}

fn colormap(t: f64) -> String {
    // five-stop approximation of viridis
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = t.clamp(0.0, 1.0) * 4.0;
    let i = (t.floor() as usize).min(3);
    let u = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

pub fn heatmap_svg(map: &Heatmap, title: &str) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let f = Frame::new(map.x_range, map.y_range, true);
    let (lo, hi) = extent(map.values.iter().flatten().copied());
    let span = if hi - lo > 1e-12 { hi - lo } else { 1.0 };
    let cw = (f.right - MARGIN) / map.width as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / map.height as f64;
    for row in 0..map.height {
        for col in 0..map.width {
            if let Some(v) = map.get(col, row) {
                let _ = writeln!(
                    out,
                    r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                    num(MARGIN + col as f64 * cw),
                    num(HEIGHT - MARGIN - (row + 1) as f64 * ch),
                    num(cw),
                    num(ch),
                    colormap((v - lo) / span)
                );
            }
        }
    }
    axes(&mut out, &f, "", "");
    // colour bar
    let x = WIDTH - MARGIN - LEGEND_W + 24.0;
    let h = (HEIGHT - 2.0 * MARGIN) / 20.0;
    for i in 0..20 {
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="14" height="{}" fill="{}"/>"#,
            num(x),
            num(HEIGHT - MARGIN - (i + 1) as f64 * h),
            num(h),
            colormap((i as f64 + 0.5) / 20.0)
        );
    }
    for (y, v) in [(HEIGHT - MARGIN, lo), (MARGIN + 8.0, if hi >= lo { hi } else { lo })] {
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, num(x + 18.0), num(y), num(if v.is_finite() { v } else { 0.0 }));
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series<T> {
    pub name: String,
    pub data: Vec<T>,
}

/// Overlaid step outlines, one per series, over shared bins.
pub fn histogram_svg(series: &[Series<f64>], bins: usize, range: (f64, f64), title: &str) -> Result<String> {
    if bins == 0 || !(range.1 > range.0) {
        return Err(Error::MalformedData(format!("histogram needs bins > 0 and a non-empty range, got {bins} over {range:?}")));
    }
    let counts: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let h = crate::evaluation::Histogram::new(&s.data, bins, range.0, range.1);
            let total = s.data.len().max(1) as f64;
            h.counts.iter().map(|&c| c as f64 / total).collect()
        })
        .collect();
    let top = counts.iter().flatten().cloned().fold(0.0, f64::max);
    let f = Frame::new(range, (0.0, if top > 0.0 { top } else { 1.0 }), series.len() > 1);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, "value", "fraction");
    let width = (range.1 - range.0) / bins as f64;
    for (i, c) in counts.iter().enumerate() {
        let mut d = format!("M{} {}", num(f.px(range.0)), num(f.py(0.0)));
        for (b, v) in c.iter().enumerate() {
            let x0 = range.0 + b as f64 * width;
            let _ = write!(d, "V{}H{}", num(f.py(*v)), num(f.px(x0 + width)));
        }
        let _ = write!(d, "V{}", num(f.py(0.0)));
        let _ = writeln!(
            out,
            r#"<path d="{d}" stroke="{}" stroke-width="1.5" fill="{}" fill-opacity="0.15"/>"#,
            PALETTE[i % PALETTE.len()],
            PALETTE[i % PALETTE.len()]
        );
    }
    if series.len() > 1 {
        legend(&mut out, &series.iter().map(|s| s.name.clone()).collect::<Vec<_>>());
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Line chart with square markers, one polyline per series.
pub fn curve_svg(series: &[Series<(f64, f64)>], xlabel: &str, ylabel: &str, title: &str) -> String {
    let all = || series.iter().flat_map(|s| s.data.iter());
    let f = Frame::new(extent(all().map(|p| p.0)), extent(all().map(|p| p.1)), series.len() > 1);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, xlabel, ylabel);
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.data.iter().map(|p| format!("{},{}", num(f.px(p.0)), num(f.py(p.1)))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" stroke="{colour}" stroke-width="1.5" fill="none"/>"#, pts.join(" "));
        for p in &s.data {
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="5" height="5" fill="{colour}"/>"#,
                num(f.px(p.0) - 2.5),
                num(f.py(p.1) - 2.5)
            );
        }
    }
    if series.len() > 1 {
        legend(&mut out, &series.iter().map(|s| s.name.clone()).collect::<Vec<_>>());
    }
    out.push_str("</svg>\n");
    out
}

/// A parsed delimited table (tab if the header has a tab, else comma).
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str, name: &str) -> Result<Self> {
        let first = text.lines().next().unwrap_or("");
        let delim = if first.contains('\t') { b'\t' } else { b',' };
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delim)
            .flexible(false)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::MalformedData(format!("{name}: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for r in rdr.records() {
            let r = r.map_err(|e| Error::MalformedData(format!("{name}: {e}")))?;
            rows.push(r.iter().map(str::to_string).collect());
        }
        if headers.is_empty() || rows.is_empty() {
            return Err(Error::MalformedData(format!("{name}: no data rows")));
        }
        Ok(Table { headers, rows })
    }

    fn col(&self, names: &[&str]) -> Option<usize> {
        names.iter().find_map(|n| self.headers.iter().position(|h| h == n))
    }

    fn numeric(&self, c: usize, name: &str) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[c].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::MalformedData(format!("{name}: row {}, column {:?}: {:?} is not a number", i + 2, self.headers[c], r[c]))
                })
            })
            .collect()
    }

    fn is_numeric(&self, c: usize) -> bool {
        self.rows.iter().all(|r| r[c].parse::<f64>().is_ok())
    }

    /// Named column if present, else the `nth` all-numeric column.
    fn pick(&self, names: &[&str], nth: usize, name: &str) -> Result<Vec<f64>> {
        let c = match self.col(names) {
            Some(c) => c,
            None => (0..self.headers.len())
                .filter(|&c| self.is_numeric(c))
                .nth(nth)
                .ok_or_else(|| Error::MalformedData(format!("{name}: needs {} numeric columns", nth + 1)))?,
        };
        self.numeric(c, name)
    }
}

/// One named input table.
#[derive(Debug, Clone)]
pub struct PlotInput {
    pub name: String,
    pub text: String,
}

/// Renders module-emitted tables.
///
/// * scatter: `x,y` (or `c1,c2`, or `valence,arousal`, or the first two
///   numeric columns), optional `cluster`/`group` colouring and `count`
///   marker size. Several inputs become several colours.
/// * heatmap: `col,row,x,y,value`.
/// * histogram: `max_similarity` (or `value`, or the last numeric column);
///   one series per input, 40 bins over `[-1, 1]` unless the data leave it.
/// * curve: first two numeric columns; one series per input.
pub fn render(kind: PlotKind, inputs: &[PlotInput], title: &str) -> Result<String> {
    if inputs.is_empty() {
        return Err(Error::MalformedData("no input tables".into()));
    }
    let tables = inputs
        .iter()
        .map(|i| Table::parse(&i.text, &i.name))
        .collect::<Result<Vec<_>>>()?;
    match kind {
        PlotKind::Scatter => {
            let mut points = Vec::new();
            let mut groups: Vec<String> = Vec::new();
            for (input, t) in inputs.iter().zip(&tables) {
                let xs = t.pick(&["x", "c1", "valence"], 0, &input.name)?;
                let ys = t.pick(&["y", "c2", "arousal"], 1, &input.name)?;
                let labels: Vec<String> = match (0..t.headers.len()).find(|&c| !t.is_numeric(c)) {
                    Some(c) => t.rows.iter().map(|r| r[c].clone()).collect(),
                    None => (0..t.rows.len()).map(|i| i.to_string()).collect(),
                };
                let weights = match t.col(&["count"]) {
                    Some(c) => {
                        let w = t.numeric(c, &input.name)?;
                        let max = w.iter().cloned().fold(0.0, f64::max);
                        w.iter().map(|v| if max > 0.0 { 0.7 + 1.3 * (v / max).sqrt() } else { 1.0 }).collect()
                    }
                    None => vec![1.0; t.rows.len()],
                };
                let group_col = t.col(&["cluster", "group"]);
                for i in 0..t.rows.len() {
                    let g = match group_col {
                        Some(c) => t.rows[i][c].clone(),
                        None => input.name.clone(),
                    };
                    let gi = match groups.iter().position(|x| *x == g) {
                        Some(gi) => gi,
                        None => {
                            groups.push(g);
                            groups.len() - 1
                        }
                    };
                    points.push(ScatterPoint { label: labels[i].clone(), x: xs[i], y: ys[i], group: gi, weight: weights[i] });
                }
            }
            Ok(scatter_svg(&points, &groups, points.len() <= 60, title))
        }
        PlotKind::Heatmap => {
            let t = &tables[0];
            let name = &inputs[0].name;
            let need = |n: &str| t.col(&[n]).ok_or_else(|| Error::MalformedData(format!("{name}: missing column {n:?}")));
            let (cc, rc, xc, yc, vc) = (need("col")?, need("row")?, need("x")?, need("y")?, need("value")?);
            let cols = t.numeric(cc, name)?;
            let rows = t.numeric(rc, name)?;
            let xs = t.numeric(xc, name)?;
            let ys = t.numeric(yc, name)?;
            let width = cols.iter().cloned().fold(0.0, f64::max) as usize + 1;
            let height = rows.iter().cloned().fold(0.0, f64::max) as usize + 1;
            if t.rows.len() != width * height {
                return Err(Error::MalformedData(format!("{name}: {} cells for a {width}x{height} grid", t.rows.len())));
            }
            let mut values = vec![None; width * height];
            for (i, r) in t.rows.iter().enumerate() {
                let cell = &r[vc];
                if !cell.is_empty() {
                    let v = cell
                        .parse::<f64>()
                        .map_err(|_| Error::MalformedData(format!("{name}: row {}: bad value {cell:?}", i + 2)))?;
                    values[rows[i] as usize * width + cols[i] as usize] = Some(v);
                }
            }
            let half = |v: &[f64], n: usize| {
                let (lo, hi) = extent(v.iter().copied());
                let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 1.0 };
                (lo - step / 2.0, hi + step / 2.0)
            };
            let map = Heatmap { width, height, x_range: half(&xs, width), y_range: half(&ys, height), values };
            Ok(heatmap_svg(&map, title))
        }
        PlotKind::Histogram => {
            let mut series = Vec::new();
            for (input, t) in inputs.iter().zip(&tables) {
                let c = t
                    .col(&["max_similarity", "value"])
                    .or_else(|| (0..t.headers.len()).rev().find(|&c| t.is_numeric(c)))
                    .ok_or_else(|| Error::MalformedData(format!("{}: no numeric column", input.name)))?;
                series.push(Series { name: input.name.clone(), data: t.numeric(c, &input.name)? });
            }
            let (lo, hi) = extent(series.iter().flat_map(|s| s.data.iter().copied()));
            let range = if lo >= -1.0 && hi <= 1.0 { (-1.0, 1.0) } else if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
            histogram_svg(&series, crate::evaluation::HISTOGRAM_BINS, range, title)
        }
        PlotKind::Curve => {
            let mut series = Vec::new();
            let (mut xl, mut yl) = (String::new(), String::new());
            for (input, t) in inputs.iter().zip(&tables) {
                let numeric: Vec<usize> = (0..t.headers.len()).filter(|&c| t.is_numeric(c)).collect();
                if numeric.len() < 2 {
                    return Err(Error::MalformedData(format!("{}: needs two numeric columns", input.name)));
                }
                let xs = t.numeric(numeric[0], &input.name)?;
                let ys = t.numeric(numeric[1], &input.name)?;
                xl = t.headers[numeric[0]].clone();
                yl = t.headers[numeric[1]].clone();
                series.push(Series { name: input.name.clone(), data: xs.into_iter().zip(ys).collect() });
            }
            Ok(curve_svg(&series, &xl, &yl, title))
        }
    }
}
