//! Timeline plot: the series, regime color bands and one gray posterior strip per regime.

use std::fmt::Write;

use ndarray::Array2;

const WIDTH: f64 = 1000.0;
const MARGIN: f64 = 60.0;
const TRACE_H: f64 = 120.0;
const BAND_H: f64 = 14.0;
const GAP: f64 = 6.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Timeline<'a> {
    pub title: &'a str,
    pub values: Option<&'a [f64]>,
    pub estimate: &'a [usize],
    pub truth: Option<&'a [usize]>,
    pub gamma: Option<&'a Array2<f64>>,
}

/// Merges equal neighbours into `(start, len, value)` runs.
fn runs<T: PartialEq + Copy>(xs: impl Iterator<Item = T>) -> Vec<(usize, usize, T)> {
    let mut out: Vec<(usize, usize, T)> = Vec::new();
    for (i, x) in xs.enumerate() {
        match out.last_mut() {
            Some(r) if r.2 == x => r.1 += 1,
            _ => out.push((i, 1, x)),
        }
    }
    out
}

fn band(out: &mut String, y: f64, step: f64, labels: &[usize], name: &str) {
    let _ = writeln!(out, r#"<text x="4" y="{:.2}" font-size="10">{name}</text>"#, y + BAND_H - 3.0);
    for (a, n, r) in runs(labels.iter().copied()) {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{BAND_H}" fill="{}"/>"#,
            MARGIN + a as f64 * step,
            n as f64 * step,
            PALETTE[r % PALETTE.len()]
        );
    }
}

pub fn render(p: &Timeline) -> String {
    let n = p.estimate.len().max(1);
    let step = WIDTH / n as f64;
    let s_n = p.gamma.map_or(0, |g| g.ncols());
    let mut y = 24.0;
    let mut body = String::new();
    if let Some(v) = p.values {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut pts = String::new();
        for (t, x) in v.iter().enumerate() {
            let px = MARGIN + (t as f64 + 0.5) * step;
            let py = y + TRACE_H * (1.0 - (x - lo) / span);
            let _ = write!(pts, "{px:.2},{py:.2} ");
        }
        let _ = writeln!(body, r#"<polyline points="{}" fill="none" stroke="black" stroke-width="0.8"/>"#, pts.trim_end());
        y += TRACE_H + GAP;
    }
    if let Some(truth) = p.truth {
        band(&mut body, y, step, truth, "truth");
        y += BAND_H + GAP;
    }
    band(&mut body, y, step, p.estimate, "estimate");
    y += BAND_H + GAP;
    if let Some(g) = p.gamma {
        for s in 0..s_n {
            let _ = writeln!(body, r#"<text x="4" y="{:.2}" font-size="10">p(s={s})</text>"#, y + BAND_H - 3.0);
            let shades = (0..g.nrows()).map(|t| (255.0 * (1.0 - g[[t, s]].clamp(0.0, 1.0))).round() as u8);
            for (a, len, c) in runs(shades) {
                let _ = writeln!(
                    body,
                    r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{BAND_H}" fill="rgb({c},{c},{c})"/>"#,
                    MARGIN + a as f64 * step,
                    len as f64 * step
                );
            }
            y += BAND_H + 2.0;
        }
    }
    let height = y + GAP;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{height:.0}" viewBox="0 0 {:.0} {height:.0}">"#,
        WIDTH + MARGIN + 10.0,
        WIDTH + MARGIN + 10.0
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="16" font-size="12">{}</text>"#, escape(p.title));
    out.push_str(&body);
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
