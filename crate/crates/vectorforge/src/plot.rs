//! Mean MSE against shape count as a standalone SVG line chart.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::metrics::BenchRecord;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// (target, mean mse in gray levels^2, mean seconds), by target.
pub fn aggregate(records: &[BenchRecord]) -> Vec<(usize, f64, f64)> {
    let mut by: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        let e = by.entry(r.target).or_default();
        e.0 += r.mse_gray;
        e.1 += r.seconds;
        e.2 += 1;
    }
    by.into_iter()
        .map(|(t, (m, s, n))| (t, m / n as f64, s / n as f64))
        .collect()
}

pub fn mse_chart(records: &[BenchRecord]) -> String {
    let pts = aggregate(records);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Mean MSE vs number of shapes</text>"#,
        W / 2.0
    );
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">shapes</text>"#,
        (x0 + x1) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">MSE (gray levels²)</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    // shape counts are spaced evenly; they are usually powers of two
    let n = pts.len();
    let xs: Vec<f64> = (0..n)
        .map(|i| if n == 1 { (x0 + x1) / 2.0 } else { x0 + 30.0 + (x1 - x0 - 60.0) * i as f64 / (n - 1) as f64 })
        .collect();
    let max = pts.iter().map(|p| p.1).fold(0.0_f64, f64::max).max(1e-12) * 1.1;
    let y = |v: f64| y0 - (y0 - y1) * v / max;
    for k in 0..=4 {
        let v = max * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
            x0 - 6.0,
            y(v) + 4.0,
            v
        );
    }
    let line: Vec<String> = pts.iter().zip(&xs).map(|(p, x)| format!("{x:.2},{:.2}", y(p.1))).collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, line.join(" "));
    for ((t, m, secs), x) in pts.iter().zip(&xs) {
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{:.2}" r="4" fill="#1f77b4"/>"##, y(*m));
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{t}</text>"#, y0 + 18.0);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="gray">{secs:.1} s</text>"#,
            y(*m) - 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}
