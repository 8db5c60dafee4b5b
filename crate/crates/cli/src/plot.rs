//! Line charts of measure series as standalone SVG.

use std::fmt::Write;

use suspense::{zscore, MeasureSeries};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const LEGEND_WIDTH: f64 = 140.0;
const COLORS: [&str; 9] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#17becf",
];

/// Z-scored values, or mean-centred ones when the series is constant or has
/// a single defined point.
fn standardize(values: &[Option<f64>]) -> Vec<Option<f64>> {
    zscore(values).unwrap_or_else(|_| {
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        let mean = present.iter().sum::<f64>() / present.len().max(1) as f64;
        values.iter().map(|v| v.map(|x| x - mean)).collect()
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One polyline per series, x = sentence index, y = standardized value.
pub fn render(story_id: &str, series: &[&MeasureSeries]) -> String {
    let curves: Vec<(String, Vec<(usize, f64)>)> = series
        .iter()
        .map(|s| {
            let pts = standardize(&s.values)
                .into_iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|y| (i, y)))
                .collect();
            (s.measure.to_string(), pts)
        })
        .collect();

    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let (mut lo, mut hi) = curves
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
            (a.min(y), b.max(y))
        });
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo, hi) = (lo - 1.0, hi + 1.0);
    }
    let plot_w = WIDTH - 2.0 * MARGIN - LEGEND_WIDTH;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x = |i: usize| MARGIN + plot_w * i as f64 / (n.max(2) - 1) as f64;
    let y = |v: f64| MARGIN + plot_h * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="14">{}</text>"#,
        MARGIN / 2.0,
        escape(story_id)
    );
    let (x0, x1, yb) = (MARGIN, MARGIN + plot_w, MARGIN + plot_h);
    let _ = writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1"><line x1="{x0}" y1="{MARGIN}" x2="{x0}" y2="{yb}"/><line x1="{x0}" y1="{yb}" x2="{x1}" y2="{yb}"/></g>"#
    );
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y0:.2}" x2="{x1}" y2="{y0:.2}" stroke="#cccccc" stroke-dasharray="4 3"/>"##,
            y0 = y(0.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">sentence</text>"#,
        MARGIN + plot_w / 2.0,
        HEIGHT - MARGIN / 3.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{hi:.2}</text><text x="{:.1}" y="{yb:.1}" text-anchor="end">{lo:.2}</text>"#,
        MARGIN - 4.0,
        MARGIN + 4.0,
        MARGIN - 4.0
    );

    for (k, (name, pts)) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|&(i, v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(name)
        );
        let ly = MARGIN + 18.0 * k as f64;
        let lx = WIDTH - MARGIN - LEGEND_WIDTH + 16.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
