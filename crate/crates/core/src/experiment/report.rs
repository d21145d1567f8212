//! Ratio-sweep plots as standalone SVG files.
//!
//! One plot per (experiment, metric). Random masking draws a curve over
//! its ratios; strategies without a ratio are flat lines across the whole
//! x range. Colour identifies (regime, predictor), dash style the strategy.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::results::{ResultRow, ResultsTable};
use super::ExperimentError;
use crate::metrics::METRIC_NAMES;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 250.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn dash(strategy: &str) -> &'static str {
    match strategy {
        "random" => "",
        "stopwords" => "8,4",
        "punctuation" => "2,3",
        "stopwords_punctuation" => "8,3,2,3",
        _ => "12,4,2,4",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

type Points = Vec<(Option<f64>, f64)>;

/// SVG for the rows of one experiment and metric. Error rows are skipped.
pub fn render_plot(title: &str, rows: &[&ResultRow]) -> String {
    let rows: Vec<&&ResultRow> = rows.iter().filter(|r| r.value.is_finite()).collect();
    let y_min = rows
        .iter()
        .map(|r| r.value)
        .fold(0.0f64, f64::min)
        .floor()
        .max(-1.0);
    let y_max = 1.0;
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x = |r: f64| LEFT + r * pw;
    let y = |v: f64| TOP + (y_max - v) / (y_max - y_min) * ph;

    // (regime, predictor) -> strategy -> points
    let mut series: BTreeMap<(String, String), BTreeMap<String, Points>> = BTreeMap::new();
    for r in &rows {
        series
            .entry((r.regime.clone(), r.predictor_id.clone()))
            .or_default()
            .entry(r.strategy.clone())
            .or_default()
            .push((r.ratio, r.value));
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    // Axes, ticks and grid.
    for i in 0..=10 {
        let r = i as f64 / 10.0;
        let _ = writeln!(
            s,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#ddd"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle">{4:.1}</text>"##,
            x(r),
            TOP,
            TOP + ph,
            TOP + ph + 16.0,
            r
        );
    }
    let steps = ((y_max - y_min) / 0.2).round() as i32;
    for i in 0..=steps {
        let v = y_min + i as f64 * 0.2;
        let _ = writeln!(
            s,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="#ddd"/><text x="{3:.1}" y="{4:.1}" text-anchor="end">{5:.1}</text>"##,
            LEFT,
            y(v),
            LEFT + pw,
            LEFT - 6.0,
            y(v) + 4.0,
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">masking ratio</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );

    let mut legend = Vec::new();
    for (ci, ((regime, predictor), strategies)) in series.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        for (strategy, points) in strategies {
            let style = match dash(strategy) {
                "" => String::new(),
                d => format!(r#" stroke-dasharray="{d}""#),
            };
            let mut curve: Vec<(f64, f64)> = points
                .iter()
                .filter_map(|(r, v)| r.map(|r| (r, *v)))
                .collect();
            if curve.is_empty() {
                // Ratio-free strategy: a flat line at its score.
                let v = points[0].1;
                let _ = writeln!(
                    s,
                    r#"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="{color}" stroke-width="1.5"{style}/>"#,
                    x(0.0),
                    y(v),
                    x(1.0)
                );
            } else {
                curve.sort_by(|a, b| a.0.total_cmp(&b.0));
                let pts: Vec<String> = curve
                    .iter()
                    .map(|(r, v)| format!("{:.1},{:.1}", x(*r), y(*v)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{style}/>"#,
                    pts.join(" ")
                );
                for (r, v) in &curve {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                        x(*r),
                        y(*v)
                    );
                }
            }
            legend.push((format!("{regime} {predictor} {strategy}"), color, style));
        }
    }
    for (i, (label, color, style)) in legend.iter().enumerate() {
        let ly = TOP + 10.0 + i as f64 * 18.0;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{style}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 28.0,
            lx + 34.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes one SVG per (experiment, metric) under `outdir/plots`.
pub fn emit_report(table: &ResultsTable, outdir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    if table.rows.is_empty() {
        return Err(ExperimentError::Results("table is empty".into()));
    }
    let dir = outdir.join("plots");
    std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
    let mut groups: BTreeMap<(&str, &str), Vec<&ResultRow>> = BTreeMap::new();
    for r in &table.rows {
        if METRIC_NAMES.contains(&r.metric_name.as_str()) {
            groups
                .entry((&r.experiment_id, &r.metric_name))
                .or_default()
                .push(r);
        }
    }
    let mut files = Vec::new();
    for ((exp, metric), rows) in groups {
        let path = dir.join(format!("{}_{}.svg", file_stem(exp), metric));
        let svg = render_plot(&format!("{exp}: {metric}"), &rows);
        std::fs::write(&path, svg).map_err(|e| ExperimentError::io(&path, e))?;
        files.push(path);
    }
    Ok(files)
}
