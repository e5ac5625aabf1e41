//! Static log-log line plot of runtime against grid size, as SVG.

use std::collections::BTreeMap;
use std::fmt::Write;

use face_core::sim::BenchRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn series_label(row: &BenchRow) -> String {
    match row.knots {
        Some(k) => format!("{} ({k} knots)", row.method.name()),
        None => row.method.name().to_string(),
    }
}

/// One polyline per (method, knots, I); refused or failed sizes are skipped.
pub fn runtime_svg(rows: &[BenchRow]) -> String {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows {
        if let Some(s) = row.seconds.filter(|s| *s > 0.0) {
            let label = format!("{}, I = {}", series_label(row), row.n_curves);
            series.entry(label).or_default().push(((row.grid_len as f64).log10(), s.log10()));
        }
    }
    let points: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if points.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}">no timings</text>"#, WIDTH / 2.0 - 30.0, HEIGHT / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{b}" x2="{m}" y2="{m}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for d in x0 as i32..=x1 as i32 {
        let x = px(d as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{b}" x2="{x:.1}" y2="{t}" stroke="black"/><text x="{x:.1}" y="{l}" text-anchor="middle">1e{d}</text>"#,
            b = HEIGHT - MARGIN,
            t = HEIGHT - MARGIN + 5.0,
            l = HEIGHT - MARGIN + 20.0
        );
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(d as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{a}" y1="{y:.1}" x2="{m}" y2="{y:.1}" stroke="black"/><text x="{l}" y="{y:.1}" text-anchor="end" dominant-baseline="middle">1e{d}</text>"#,
            a = MARGIN - 5.0,
            m = MARGIN,
            l = MARGIN - 8.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">grid points J</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">seconds</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut sorted = pts.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = sorted.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in &sorted {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{a}" y1="{ly}" x2="{b}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{c}" y="{ly}" dominant-baseline="middle">{}</text>"#,
            escape(label),
            a = MARGIN + 10.0,
            b = MARGIN + 30.0,
            c = MARGIN + 36.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
