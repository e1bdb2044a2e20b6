//! Self-contained SVG figures of a trajectory.
//!
//! Every panel is a `<g class="panel">` holding one `<g class="axis">`, an
//! optional `<polyline class="series">` (two or more points) and one
//! `<circle class="point">` per plotted value.

use std::fmt::Write;

use isocluster::trajectory::Trajectory;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 44.0;
const TICKS: usize = 5;

#[derive(Debug, PartialEq)]
pub enum PlotError {
    EmptyTrajectory,
    NothingToPlot(&'static str),
}

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlotError::EmptyTrajectory => f.write_str("trajectory has no rows"),
            PlotError::NothingToPlot(what) => write!(f, "no plottable {what} values"),
        }
    }
}

impl std::error::Error for PlotError {}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() {
            return None;
        }
        if lo == hi {
            // a flat series still needs a non-empty range
            let pad = if lo == 0.0 { 0.5 } else { lo.abs() * 0.05 };
            return Some(Self { lo: lo - pad, hi: hi + pad });
        }
        Some(Self { lo, hi })
    }

    fn frac(self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

struct Panel<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    points: Vec<(f64, f64)>,
    connect: bool,
}

fn fmt_tick(v: f64, range: Range) -> String {
    let span = range.hi - range.lo;
    let decimals = if span >= 100.0 {
        0
    } else {
        (2.0 - span.log10().floor()).clamp(0.0, 8.0) as usize
    };
    format!("{v:.decimals$}")
}

fn render_panel(out: &mut String, panel: &Panel, dx: f64, dy: f64) {
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let xr = Range::of(panel.points.iter().map(|p| p.0)).expect("panel has points");
    let yr = Range::of(panel.points.iter().map(|p| p.1)).expect("panel has points");
    let sx = |x: f64| MARGIN_L + xr.frac(x) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - yr.frac(y)) * plot_h;

    let _ = writeln!(out, r#"<g class="panel" transform="translate({dx},{dy})">"#);
    let _ = writeln!(
        out,
        r#"<text class="title" x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        PANEL_W / 2.0,
        panel.title
    );
    let _ = writeln!(out, r#"<g class="axis" stroke="black" fill="none">"#);
    let (x0, y0) = (MARGIN_L, MARGIN_T + plot_h);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}"/>"#, x0 + plot_w);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}"/>"#);
    for i in 0..TICKS {
        let t = i as f64 / (TICKS - 1) as f64;
        let xv = xr.lo + t * (xr.hi - xr.lo);
        let yv = yr.lo + t * (yr.hi - yr.lo);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}"/>"#, y0 + 4.0);
        let _ = writeln!(out, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}"/>"#, x0 - 4.0);
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle" font-size="10" stroke="none" fill="black">{}</text>"#,
            y0 + 16.0,
            fmt_tick(xv, xr)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="10" stroke="none" fill="black">{}</text>"#,
            x0 - 6.0,
            py + 3.0,
            fmt_tick(yv, yr)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11" stroke="none" fill="black">{}</text>"#,
        x0 + plot_w / 2.0,
        PANEL_H - 8.0,
        panel.x_label
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" font-size="11" stroke="none" fill="black" transform="rotate(-90 14 {:.2})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        panel.y_label
    );
    let _ = writeln!(out, "</g>");

    if panel.connect && panel.points.len() >= 2 {
        let coords: Vec<String> = panel
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline class="series" fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
            coords.join(" ")
        );
    }
    let radius = if panel.connect { 1.5 } else { 2.5 };
    for &(x, y) in &panel.points {
        let _ = writeln!(
            out,
            r##"<circle class="point" cx="{:.3}" cy="{:.3}" r="{radius}" fill="#1f77b4"/>"##,
            sx(x),
            sy(y)
        );
    }
    let _ = writeln!(out, "</g>");
}

fn document(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, i as f64 * PANEL_W, 0.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Silhouette against step, and log10 IsoScore against step. Missing and
/// non-positive IsoScore values are skipped in the log panel.
pub fn line_figure(t: &Trajectory) -> Result<String, PlotError> {
    if t.is_empty() {
        return Err(PlotError::EmptyTrajectory);
    }
    let sil: Vec<(f64, f64)> = t
        .records()
        .iter()
        .filter_map(|r| Some((r.step as f64, r.silhouette?)))
        .collect();
    let iso: Vec<(f64, f64)> = t
        .records()
        .iter()
        .filter_map(|r| r.isoscore.filter(|v| *v > 0.0).map(|v| (r.step as f64, v.log10())))
        .collect();
    if sil.is_empty() {
        return Err(PlotError::NothingToPlot("silhouette"));
    }
    if iso.is_empty() {
        return Err(PlotError::NothingToPlot("IsoScore"));
    }
    Ok(document(&[
        Panel {
            title: "Silhouette score",
            x_label: "step",
            y_label: "mean silhouette",
            points: sil,
            connect: true,
        },
        Panel {
            title: "IsoScore (log10)",
            x_label: "step",
            y_label: "log10 IsoScore",
            points: iso,
            connect: true,
        },
    ]))
}

/// IsoScore (y) against silhouette (x), one point per row with both values.
pub fn scatter_figure(t: &Trajectory) -> Result<String, PlotError> {
    if t.is_empty() {
        return Err(PlotError::EmptyTrajectory);
    }
    let points: Vec<(f64, f64)> = t
        .records()
        .iter()
        .filter_map(|r| Some((r.silhouette?, r.isoscore?)))
        .collect();
    if points.is_empty() {
        return Err(PlotError::NothingToPlot("(silhouette, IsoScore)"));
    }
    Ok(document(&[Panel {
        title: "Silhouette vs IsoScore",
        x_label: "mean silhouette",
        y_label: "IsoScore",
        points,
        connect: false,
    }]))
}
