//! Hand-emitted SVG trajectory plots: one 800x500 panel per quantity
//! (survival, hazard) with 10-tick axes, one polyline per prediction group,
//! optional shaded pointwise confidence bands, and a legend.

use crate::error::{Error, Result};
use crate::predict::TrajectoryCurve;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 10;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Copy)]
pub enum PlotKind {
    Survival,
    Hazard,
}

struct Series<'a> {
    label: &'a str,
    times: &'a [f64],
    point: &'a [f64],
    lower: Option<&'a [f64]>,
    upper: Option<&'a [f64]>,
}

fn series_of<'a>(curve: &'a TrajectoryCurve, kind: PlotKind, bands: bool) -> Series<'a> {
    match kind {
        PlotKind::Survival => Series {
            label: &curve.group,
            times: &curve.times,
            point: &curve.survival,
            lower: bands.then(|| curve.survival_lower.as_deref()).flatten(),
            upper: bands.then(|| curve.survival_upper.as_deref()).flatten(),
        },
        PlotKind::Hazard => Series {
            label: &curve.group,
            times: &curve.times,
            point: &curve.hazard,
            lower: bands.then(|| curve.hazard_lower.as_deref()).flatten(),
            upper: bands.then(|| curve.hazard_upper.as_deref()).flatten(),
        },
    }
}

/// Render one panel. `bands` shades the pointwise intervals when the curves
/// carry them. At least two ticks per curve are required.
pub fn render_plot(curves: &[TrajectoryCurve], kind: PlotKind, bands: bool) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::Predict("no curves to plot".to_string()));
    }
    for c in curves {
        if c.times.len() < 2 {
            return Err(Error::Predict(
                "a trajectory plot needs at least 2 points per curve".to_string(),
            ));
        }
    }
    let series: Vec<Series> = curves.iter().map(|c| series_of(c, kind, bands)).collect();
    let (y_label, title) = match kind {
        PlotKind::Survival => ("survival probability", "Predicted survival"),
        PlotKind::Hazard => ("hazard rate", "Predicted hazard"),
    };

    let x_max = series
        .iter()
        .flat_map(|s| s.times.iter().copied())
        .fold(0.0_f64, f64::max);
    let mut y_max = series
        .iter()
        .flat_map(|s| {
            s.point
                .iter()
                .copied()
                .chain(s.upper.into_iter().flatten().copied())
        })
        .fold(0.0_f64, f64::max);
    if matches!(kind, PlotKind::Survival) || y_max <= 0.0 {
        y_max = 1.0;
    } else {
        y_max *= 1.05;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |t: f64| MARGIN_LEFT + t / x_max * plot_w;
    let y_of = |v: f64| MARGIN_TOP + (1.0 - (v / y_max).clamp(0.0, 1.0)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>"#,
        MARGIN_LEFT + plot_w / 2.0
    ));
    svg.push('\n');

    // axes with 10 ticks and light grid lines
    for i in 0..=TICKS {
        let frac = i as f64 / TICKS as f64;
        let x = MARGIN_LEFT + frac * plot_w;
        let y = MARGIN_TOP + plot_h - frac * plot_h;
        svg.push_str(&format!(
            r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#dddddd" stroke-width="1"/>"##,
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        ));
        svg.push_str(&format!(
            r##"<line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#dddddd" stroke-width="1"/>"##,
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        ));
        svg.push_str(&format!(
            r#"<text x="{x:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + plot_h + 18.0,
            trim_tick(frac * x_max)
        ));
        svg.push_str(&format!(
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            y + 4.0,
            trim_tick(frac * y_max)
        ));
        svg.push('\n');
    }
    svg.push_str(&format!(
        r#"<rect x="{}" y="{}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black" stroke-width="1"/>"#,
        MARGIN_LEFT, MARGIN_TOP
    ));
    svg.push('\n');
    // axis labels
    svg.push_str(&format!(
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">time</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 18.0
    ));
    svg.push_str(&format!(
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{y_label}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));
    svg.push('\n');

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if let (Some(lower), Some(upper)) = (s.lower, s.upper) {
            let mut d = String::from("M");
            for (t, v) in s.times.iter().zip(upper.iter()) {
                d.push_str(&format!(" {:.2},{:.2}", x_of(*t), y_of(*v)));
            }
            for (t, v) in s.times.iter().rev().zip(lower.iter().rev()) {
                d.push_str(&format!(" L {:.2},{:.2}", x_of(*t), y_of(*v)));
            }
            d.push_str(" Z");
            svg.push_str(&format!(
                r#"<path d="{d}" fill="{color}" fill-opacity="0.18" stroke="none" class="band"/>"#
            ));
            svg.push('\n');
        }
        let points: Vec<String> = s
            .times
            .iter()
            .zip(s.point.iter())
            .map(|(t, v)| format!("{:.2},{:.2}", x_of(*t), y_of(*v)))
            .collect();
        svg.push_str(&format!(
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        ));
        svg.push('\n');
        // legend entry
        let ly = MARGIN_TOP + 14.0 + idx as f64 * 20.0;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        svg.push_str(&format!(
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        ));
        svg.push_str(&format!(
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            xml_escape(s.label)
        ));
        svg.push('\n');
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn trim_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
