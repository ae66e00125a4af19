//! Static SVG charts: heatmaps, line charts and bar charts.
//!
//! Output depends only on the input values; coordinates are printed with two
//! decimals. Missing values are drawn hatched (heatmap cells, bars) or as gaps
//! (lines).

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChartError {
    #[error("nothing to plot: every value is missing")]
    NothingToPlot,
    #[error("inconsistent chart data: {0}")]
    Shape(String),
}

const HATCH: &str = r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><rect width="6" height="6" fill="#ffffff"/><line x1="0" y1="0" x2="0" y2="6" stroke="#999999" stroke-width="2"/></pattern></defs>"##;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn open(width: f64, height: f64, title: &str) -> String {
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    s.push_str(HATCH);
    let _ = write!(s, r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title));
    s
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// White-to-blue ramp over `t` in [0, 1].
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(247.0, 8.0), mix(251.0, 48.0), mix(255.0, 107.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// One row per row label, one cell per column label.
    pub values: Vec<Vec<Option<f64>>>,
}

impl Heatmap {
    pub fn render(&self) -> Result<String, ChartError> {
        if self.values.len() != self.row_labels.len() || self.values.iter().any(|r| r.len() != self.col_labels.len()) {
            return Err(ChartError::Shape("heatmap values do not match labels".into()));
        }
        let (lo, hi) = range(self.values.iter().flatten().flatten().copied()).ok_or(ChartError::NothingToPlot)?;
        let (cell_w, cell_h, left, top) = (28.0, 18.0, 90.0, 40.0);
        let width = left + cell_w * self.col_labels.len() as f64 + 20.0;
        let height = top + cell_h * self.row_labels.len() as f64 + 40.0;
        let mut s = open(width, height, &self.title);
        for (r, (label, row)) in self.row_labels.iter().zip(&self.values).enumerate() {
            let y = top + cell_h * r as f64;
            let _ = write!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 4.0, y + cell_h * 0.7, escape(label));
            for (c, v) in row.iter().enumerate() {
                let x = left + cell_w * c as f64;
                let fill = match v {
                    Some(v) if hi > lo => ramp((v - lo) / (hi - lo)),
                    Some(_) => ramp(0.5),
                    None => "url(#hatch)".to_string(),
                };
                let _ = write!(s, r#"<rect x="{x:.2}" y="{y:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="{fill}">"#);
                let _ = write!(s, "<title>{}</title></rect>", v.map_or("missing".to_string(), |v| format!("{v:.4}")));
            }
        }
        let label_y = top + cell_h * self.row_labels.len() as f64 + 14.0;
        for (c, label) in self.col_labels.iter().enumerate() {
            let x = left + cell_w * (c as f64 + 0.5);
            let _ = write!(s, r#"<text x="{x:.2}" y="{label_y:.2}" text-anchor="middle">{}</text>"#, escape(label));
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_labels: Vec<String>,
    pub series: Vec<Series>,
}

const PLOT_W: f64 = 560.0;
const PLOT_H: f64 = 260.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;

fn y_axis(s: &mut String, lo: f64, hi: f64) {
    let _ = write!(
        s,
        r##"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}" stroke="#333333"/><line x1="{LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333333"/>"##,
        TOP + PLOT_H,
        TOP + PLOT_H,
        LEFT + PLOT_W,
        TOP + PLOT_H
    );
    for (v, y) in [(hi, TOP), (lo, TOP + PLOT_H)] {
        let _ = write!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, LEFT - 4.0, y + 4.0);
    }
}

fn x_labels(s: &mut String, labels: &[String], x_of: impl Fn(usize) -> f64) {
    for (i, label) in labels.iter().enumerate() {
        let _ = write!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x_of(i),
            TOP + PLOT_H + 14.0,
            escape(label)
        );
    }
}

/// Value range padded so a constant series still spans the axis.
fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

impl LineChart {
    pub fn render(&self) -> Result<String, ChartError> {
        let n = self.x_labels.len();
        if self.series.iter().any(|s| s.values.len() != n) {
            return Err(ChartError::Shape("series length differs from x labels".into()));
        }
        let (lo, hi) = range(self.series.iter().flat_map(|s| s.values.iter().flatten().copied()))
            .ok_or(ChartError::NothingToPlot)?;
        let (lo, hi) = padded_range(lo, hi);
        let x_of = |i: usize| LEFT + if n > 1 { PLOT_W * i as f64 / (n - 1) as f64 } else { PLOT_W / 2.0 };
        let y_of = |v: f64| TOP + PLOT_H * (1.0 - (v - lo) / (hi - lo));
        let mut s = open(LEFT + PLOT_W + 140.0, TOP + PLOT_H + 40.0, &self.title);
        y_axis(&mut s, lo, hi);
        x_labels(&mut s, &self.x_labels, x_of);
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut d = String::new();
            let mut pen_down = false;
            for (i, v) in series.values.iter().enumerate() {
                match v {
                    Some(v) => {
                        let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, x_of(i), y_of(*v));
                        pen_down = true;
                    }
                    None => pen_down = false,
                }
            }
            if !d.is_empty() {
                let _ = write!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.trim_end());
            }
            for (i, v) in series.values.iter().enumerate() {
                if let Some(v) = v {
                    let _ = write!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, x_of(i), y_of(*v));
                }
            }
            let ly = TOP + 14.0 * k as f64;
            let _ = write!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                LEFT + PLOT_W + 12.0,
                ly,
                LEFT + PLOT_W + 26.0,
                ly + 9.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub labels: Vec<String>,
    pub values: Vec<Option<f64>>,
}

impl BarChart {
    pub fn render(&self) -> Result<String, ChartError> {
        let n = self.labels.len();
        if self.values.len() != n {
            return Err(ChartError::Shape("bar values differ from labels".into()));
        }
        let (lo, hi) = range(self.values.iter().flatten().copied()).ok_or(ChartError::NothingToPlot)?;
        let (lo, hi) = padded_range(lo.min(0.0), hi.max(0.0));
        let slot = PLOT_W / n as f64;
        let y_of = |v: f64| TOP + PLOT_H * (1.0 - (v - lo) / (hi - lo));
        let mut s = open(LEFT + PLOT_W + 20.0, TOP + PLOT_H + 40.0, &self.title);
        y_axis(&mut s, lo, hi);
        x_labels(&mut s, &self.labels, |i| LEFT + slot * (i as f64 + 0.5));
        for (i, v) in self.values.iter().enumerate() {
            let x = LEFT + slot * i as f64 + slot * 0.1;
            let w = slot * 0.8;
            match v {
                Some(v) => {
                    let (a, b) = (y_of(*v), y_of(0.0));
                    let _ = write!(
                        s,
                        r##"<rect x="{x:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="#1f77b4"><title>{v:.4}</title></rect>"##,
                        a.min(b),
                        (a - b).abs()
                    );
                }
                None => {
                    let _ = write!(
                        s,
                        r##"<rect x="{x:.2}" y="{TOP:.2}" width="{w:.2}" height="{PLOT_H:.2}" fill="url(#hatch)" stroke="#999999"><title>missing</title></rect>"##
                    );
                }
            }
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}
