//! Multi-panel SVG line charts of telemetry, one series per run variant.
//!
//! Output is plain text built with fixed-precision formatting, so identical
//! input always renders to identical bytes.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::telemetry::{format_significant, TelemetryRecord};

/// Series colours by variant order.
pub const SERIES_COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"];

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 44.0;
const COLUMNS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum XAxis {
    /// Row number within the telemetry.
    Index,
    Column(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x: XAxis,
    pub y: String,
    pub x_label: String,
    pub y_label: String,
}

impl Panel {
    fn over_time(title: &str, y: &str, y_label: &str) -> Self {
        Self {
            title: title.to_string(),
            x: XAxis::Column("time_s".to_string()),
            y: y.to_string(),
            x_label: "time (s)".to_string(),
            y_label: y_label.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub panels: Vec<Panel>,
}

impl Default for PlotSpec {
    fn default() -> Self {
        let mut panels = vec![
            Panel {
                title: "Path curvature".to_string(),
                x: XAxis::Index,
                y: "k".to_string(),
                x_label: "sample index".to_string(),
                y_label: "K (1/m)".to_string(),
            },
            Panel::over_time("Blood flow", "vblood", "|V| (m/s)"),
        ];
        for axis in ["x", "y", "z"] {
            let upper = axis.to_uppercase();
            panels.push(Panel::over_time(
                &format!("Gradient {upper}"),
                &format!("g{axis}"),
                &format!("G{axis} (T/m)"),
            ));
        }
        for axis in ["x", "y", "z"] {
            let upper = axis.to_uppercase();
            panels.push(Panel::over_time(
                &format!("dB/dt {upper}"),
                &format!("dbdt_{axis}"),
                &format!("dB/dt {axis} (T/s)"),
            ));
        }
        Self {
            title: "Simulation telemetry".to_string(),
            panels,
        }
    }
}

/// One run variant, e.g. a Tp setting.
#[derive(Debug, Clone, Copy)]
pub struct Variant<'a> {
    pub label: &'a str,
    pub records: &'a [TelemetryRecord],
}

fn column(records: &[TelemetryRecord], x: &XAxis, name: &str) -> Result<Vec<(f64, f64)>> {
    let missing = |c: &str| Error::Plot(format!("missing column {c:?}"));
    let first = records.first().ok_or_else(|| Error::Plot("empty telemetry".to_string()))?;
    first.column(name).ok_or_else(|| missing(name))?;
    if let XAxis::Column(c) = x {
        first.column(c).ok_or_else(|| missing(c))?;
    }
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let xv = match x {
                XAxis::Index => i as f64,
                XAxis::Column(c) => r.column(c).unwrap_or(f64::NAN),
            };
            (xv, r.column(name).unwrap_or(f64::NAN))
        })
        .collect())
}

/// Tick positions on a 1-2-5 grid covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64, target: usize) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    };
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).floor();
    let end = (hi / step).ceil();
    let ticks = (0..=(end - start) as i64)
        .map(|i| {
            let v = (start + i as f64) * step;
            if v.abs() < step * 1e-9 {
                0.0
            } else {
                v
            }
        })
        .collect();
    (start * step, end * step, ticks)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

// Pixel column, first point, lowest point, highest point.
type Bucket = (i64, (f64, f64), (f64, f64), (f64, f64));

/// Keep the extremes of each horizontal pixel so long traces stay small
/// without hiding spikes.
fn decimate(points: &[(f64, f64)], to_px: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut bucket: Option<Bucket> = None;
    let flush = |b: &Option<Bucket>, out: &mut Vec<(f64, f64)>| {
        if let Some((_, first, lo, hi)) = b {
            out.push(*first);
            let (a, b) = if lo.0 <= hi.0 { (lo, hi) } else { (hi, lo) };
            for p in [a, b] {
                if out.last() != Some(p) {
                    out.push(*p);
                }
            }
        }
    };
    for &p in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let px = to_px(p.0).floor() as i64;
        match &mut bucket {
            Some((cur, _, lo, hi)) if *cur == px => {
                if p.1 < lo.1 {
                    *lo = p;
                }
                if p.1 > hi.1 {
                    *hi = p;
                }
            }
            _ => {
                flush(&bucket, &mut out);
                bucket = Some((px, p, p, p));
            }
        }
    }
    flush(&bucket, &mut out);
    if let Some(&last) = points.iter().rev().find(|p| p.0.is_finite() && p.1.is_finite()) {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

/// Render every panel of `spec` for all variants as one SVG document.
pub fn render_plots(variants: &[Variant<'_>], spec: &PlotSpec) -> Result<String> {
    if variants.is_empty() {
        return Err(Error::Plot("no telemetry to plot".to_string()));
    }
    if let Some(v) = variants.iter().find(|v| v.records.is_empty()) {
        return Err(Error::Plot(format!("telemetry {:?} is empty", v.label)));
    }
    if spec.panels.is_empty() {
        return Err(Error::Plot("plot spec has no panels".to_string()));
    }
    let rows = spec.panels.len().div_ceil(COLUMNS);
    let cols = spec.panels.len().min(COLUMNS);
    let legend_h = 22.0;
    let width = cols as f64 * PANEL_W;
    let height = 36.0 + legend_h + rows as f64 * PANEL_H;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        width / 2.0,
        escape(&spec.title)
    );
    let mut lx = MARGIN_L;
    for (i, v) in variants.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="44" x2="{:.1}" y2="44" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="48">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            escape(v.label)
        );
        lx += 40.0 + 7.0 * v.label.chars().count() as f64;
    }

    for (p, panel) in spec.panels.iter().enumerate() {
        let series = variants
            .iter()
            .map(|v| column(v.records, &panel.x, &panel.y))
            .collect::<Result<Vec<_>>>()?;
        let ox = (p % COLUMNS) as f64 * PANEL_W;
        let oy = 36.0 + legend_h + (p / COLUMNS) as f64 * PANEL_H;
        render_panel(&mut svg, panel, &series, ox, oy);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn render_panel(svg: &mut String, panel: &Panel, series: &[Vec<(f64, f64)>], ox: f64, oy: f64) {
    let finite = || series.iter().flatten().filter(|p| p.0.is_finite() && p.1.is_finite());
    let fold = |f: fn(&(f64, f64)) -> f64| {
        finite().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let (xmin, xmax) = fold(|p| p.0);
    let (ymin, ymax) = fold(|p| p.1);
    let (xmin, xmax) = if xmin.is_finite() { (xmin, xmax) } else { (0.0, 1.0) };
    let (ymin, ymax) = if ymin.is_finite() { (ymin, ymax) } else { (0.0, 1.0) };
    let (x0, x1, xt) = nice_ticks(xmin, xmax, 5);
    let (y0, y1, yt) = nice_ticks(ymin, ymax, 4);

    let left = ox + MARGIN_L;
    let top = oy + MARGIN_T;
    let pw = PANEL_W - MARGIN_L - MARGIN_R;
    let ph = PANEL_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let _ = writeln!(svg, r#"<g>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        left + pw / 2.0,
        oy + 18.0,
        escape(&panel.title)
    );
    for &t in &xt {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{top:.1}" x2="{x:.1}" y2="{:.1}" stroke="#e0e0e0"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 14.0,
            format_significant(t, 4)
        );
    }
    for &t in &yt {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e0e0e0"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 4.0,
            y + 4.0,
            format_significant(t, 4)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.1}" y="{top:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        top + ph + 32.0,
        escape(&panel.x_label)
    );
    let (lx, ly) = (ox + 14.0, top + ph / 2.0);
    let _ = writeln!(
        svg,
        r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
        escape(&panel.y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let pts = decimate(s, sx);
        if pts.is_empty() {
            continue;
        }
        let mut d = String::with_capacity(pts.len() * 14);
        for (j, (x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.1},{:.1}", if j == 0 { "" } else { " " }, sx(*x), sy(*y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{d}"/>"#
        );
    }
    let _ = writeln!(svg, "</g>");
}
