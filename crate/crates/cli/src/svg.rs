//! Minimal standalone SVG line plots: axes, ticks, labels and polylines.
//! Output depends only on the input numbers, so identical data gives
//! identical bytes.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

impl Scale {
    fn map(self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Log10 => v.log10(),
        }
    }

    fn unmap(self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Log10 => 10f64.powf(v),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub colour: &'static str,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
    /// Horizontal reference line at a data value.
    pub reference: Option<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlotError {
    Empty,
}

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlotError::Empty => write!(f, "no finite data points to plot"),
        }
    }
}

impl std::error::Error for PlotError {}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo > 0.0 {
        Some((lo, hi))
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        Some((lo - pad, hi + pad))
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

pub fn render(plot: &Plot) -> Result<String, PlotError> {
    let (xs, ys) = (plot.x_scale, plot.y_scale);
    let mapped: Vec<Vec<(f64, f64)>> = plot
        .series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .map(|&(x, y)| (xs.map(x), ys.map(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let all = || mapped.iter().flatten();
    let reference = plot
        .reference
        .as_ref()
        .map(|(v, l)| (ys.map(*v), l))
        .filter(|(v, _)| v.is_finite());
    let (x0, x1) = extent(all().map(|p| p.0)).ok_or(PlotError::Empty)?;
    let (y0, y1) = extent(all().map(|p| p.1).chain(reference.iter().map(|r| r.0))).ok_or(PlotError::Empty)?;

    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (tx, ty) = (px(xv), py(yv));
        let bottom = MARGIN_TOP + ph;
        let _ = writeln!(
            out,
            r#"<line x1="{tx:.2}" y1="{bottom:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 18.0,
            tick_label(xs.unmap(xv))
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ty:.2}" x2="{MARGIN_LEFT:.2}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            ty + 4.0,
            tick_label(ys.unmap(yv))
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(&plot.y_label)
    );
    if let Some((v, label)) = reference {
        let y = py(v);
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN_LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="gray" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}" text-anchor="end" fill="gray">{}</text>"#,
            MARGIN_LEFT + pw,
            MARGIN_LEFT + pw - 4.0,
            y - 4.0,
            escape(label)
        );
    }
    for (series, pts) in plot.series.iter().zip(&mapped) {
        if pts.is_empty() {
            continue;
        }
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            series.colour,
            coords.join(" "),
            escape(&series.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Plot {
        Plot {
            title: "w1 <trajectory>".into(),
            x_label: "s".into(),
            y_label: "w1".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            series: vec![Series {
                label: "w1".into(),
                points: (0..50).map(|i| (i as f64 * 0.1, (i as f64 * 0.1).sin())).collect(),
                colour: "steelblue",
            }],
            reference: Some((0.5, "level".into())),
        }
    }

    #[test]
    fn deterministic_and_escaped() {
        let a = render(&sample()).unwrap();
        assert_eq!(a, render(&sample()).unwrap());
        assert!(a.starts_with("<svg"));
        assert!(a.contains("&lt;trajectory&gt;"));
        assert_eq!(a.matches("<polyline").count(), 1);
    }

    #[test]
    fn empty_and_log_filtering() {
        let mut p = sample();
        p.series[0].points.clear();
        assert_eq!(render(&p), Err(PlotError::Empty));
        let mut p = sample();
        p.y_scale = Scale::Log10;
        p.series[0].points = vec![(0.0, -1.0), (1.0, 0.0)];
        p.reference = None;
        assert_eq!(render(&p), Err(PlotError::Empty));
    }
}
