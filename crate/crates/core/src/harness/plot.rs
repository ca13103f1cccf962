//! Hand-written SVG line chart of relative accuracy against fraction removed.

use std::fmt::Write as _;

use super::csvio::SweepRecord;
use super::HarnessError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 760.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 520.0;
pub const X_MAX: f64 = 1.0;
pub const Y_MAX: f64 = 1.05;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn px(x: f64) -> f64 {
    LEFT + x.clamp(0.0, X_MAX) / X_MAX * (RIGHT - LEFT)
}

fn py(y: f64) -> f64 {
    BOTTOM - y.clamp(0.0, Y_MAX) / Y_MAX * (BOTTOM - TOP)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One chart with a polyline per series, points sorted by fraction removed.
///
/// Values outside `[0, 1] × [0, 1.05]` are clamped onto the axes.
pub fn render_svg(series: &[(String, Vec<SweepRecord>)]) -> Result<String, HarnessError> {
    if series.is_empty() {
        return Err(HarnessError::Usage("nothing to plot".into()));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="14">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="18">Relative accuracy vs. spikes removed</text>"#,
        (LEFT + RIGHT) / 2.0
    );

    // axes and ticks every 0.2
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{LEFT}" y1="{BOTTOM}" x2="{RIGHT}" y2="{BOTTOM}"/><line x1="{LEFT}" y1="{BOTTOM}" x2="{LEFT}" y2="{TOP}"/></g>"#
    );
    for i in 0..=5 {
        let v = i as f64 * 0.2;
        let (x, y) = (px(v), py(v));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{BOTTOM}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{v:.1}</text>"##,
            BOTTOM + 6.0,
            BOTTOM + 24.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/><line x1="{LEFT}" y1="{y:.1}" x2="{RIGHT}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            LEFT - 6.0,
            LEFT - 10.0,
            y + 5.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">Fraction of spikes removed</text>"#,
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 30.0
    );
    let _ = writeln!(
        s,
        r#"<text x="25" y="{0}" text-anchor="middle" transform="rotate(-90 25 {0})">Relative accuracy</text>"#,
        (TOP + BOTTOM) / 2.0
    );

    for (i, (name, rows)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.fraction_removed, r.relative_accuracy)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let points: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = TOP + 20.0 + 22.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            RIGHT - 150.0,
            RIGHT - 120.0,
            RIGHT - 112.0,
            ly + 5.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
