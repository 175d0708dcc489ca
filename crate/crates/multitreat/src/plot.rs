//! Boxplots of replication biases as standalone SVG.

use std::fmt::Write;

use multitreat_core::stats;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
}

/// Quartiles (type 7) and Tukey whiskers at 1.5 IQR.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let s = stats::sorted(values);
    let q1 = stats::quantile_linear(&s, 0.25);
    let q3 = stats::quantile_linear(&s, 0.75);
    let iqr = q3 - q1;
    let whisker_lo = *s.iter().find(|&&v| v >= q1 - 1.5 * iqr).unwrap_or(&s[0]);
    let whisker_hi = *s.iter().rev().find(|&&v| v <= q3 + 1.5 * iqr).unwrap_or(&s[s.len() - 1]);
    Some(BoxStats {
        q1,
        median: stats::quantile_linear(&s, 0.5),
        q3,
        whisker_lo,
        whisker_hi,
    })
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One box per group with a dashed line at zero bias.
pub fn boxplot_svg(title: &str, groups: &[(String, Vec<f64>)]) -> String {
    let all: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).filter(|v| v.is_finite()).collect();
    let (mut lo, mut hi) = all.iter().fold((0.0f64, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let y = |v: f64| MARGIN_T + (hi - v) / (hi - lo) * plot_h;
    let slot = plot_w / groups.len().max(1) as f64;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, esc(title)).unwrap();
    writeln!(s, r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{}" stroke="black"/>"#, MARGIN_T + plot_h).unwrap();
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let yy = y(v);
        writeln!(s, r#"<line x1="{}" y1="{yy:.2}" x2="{MARGIN_L}" y2="{yy:.2}" stroke="black"/>"#, MARGIN_L - 4.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{:.4}</text>"#, MARGIN_L - 6.0, yy + 4.0, v).unwrap();
    }
    let zero = y(0.0);
    writeln!(s, r#"<line x1="{MARGIN_L}" y1="{zero:.2}" x2="{}" y2="{zero:.2}" stroke="grey" stroke-dasharray="4 3"/>"#, WIDTH - MARGIN_R).unwrap();
    for (g, (name, values)) in groups.iter().enumerate() {
        let cx = MARGIN_L + slot * (g as f64 + 0.5);
        let half = (slot * 0.3).min(30.0);
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if let Some(b) = box_stats(&finite) {
            writeln!(s, r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#, y(b.whisker_hi), y(b.q3)).unwrap();
            writeln!(s, r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#, y(b.q1), y(b.whisker_lo)).unwrap();
            writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="black"/>"##,
                cx - half,
                y(b.q3),
                2.0 * half,
                (y(b.q1) - y(b.q3)).max(0.5)
            )
            .unwrap();
            writeln!(s, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#, cx - half, y(b.median), cx + half, y(b.median)).unwrap();
            for &v in finite.iter().filter(|&&v| v < b.whisker_lo || v > b.whisker_hi) {
                writeln!(s, r#"<circle cx="{cx:.2}" cy="{:.2}" r="2" fill="none" stroke="black"/>"#, y(v)).unwrap();
            }
        }
        let ty = MARGIN_T + plot_h + 12.0;
        writeln!(s, r#"<text x="{cx:.2}" y="{ty:.2}" text-anchor="end" transform="rotate(-40 {cx:.2} {ty:.2})">{}</text>"#, esc(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
