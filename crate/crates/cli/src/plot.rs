//! Standalone SVG histogram and TSV export of per-bin values.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// `bin\tj` header followed by one row per value, bins counted from 0.
pub fn tsv(values: &[f64]) -> String {
    let mut out = String::from("bin\tj\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{i}\t{v}");
    }
    out
}

/// Sturges bin count.
fn bin_count(n: usize) -> usize {
    (n.max(1) as f64).log2().ceil() as usize + 1
}

/// Histogram of `values` with the `mean +- sem` band and a dashed line at 0
/// when it falls inside the plotted range.
pub fn svg_histogram(values: &[f64], mean: f64, sem: f64) -> String {
    let mut lo = values.iter().copied().fold(mean - sem, f64::min);
    let mut hi = values.iter().copied().fold(mean + sem, f64::max);
    if !(hi > lo) {
        let pad = 0.5 + 0.05 * lo.abs();
        lo -= pad;
        hi += pad;
    }
    let k = bin_count(values.len());
    let width = (hi - lo) / k as f64;
    let mut counts = vec![0usize; k];
    for v in values {
        let i = (((v - lo) / width) as usize).min(k - 1);
        counts[i] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(0).max(1) as f64;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |v: f64| LEFT + (v - lo) / (hi - lo) * plot_w;
    let y = |c: f64| TOP + plot_h - c / peak * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.2}" y="22" text-anchor="middle" font-size="14">per-bin J (n = {}), mean {mean:.6e} +- SEM {sem:.3e}</text>"#,
        WIDTH / 2.0,
        values.len()
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{TOP:.2}" width="{:.2}" height="{plot_h:.2}" fill="#f4a261" fill-opacity="0.35"/>"##,
        x(mean - sem),
        (x(mean + sem) - x(mean - sem)).max(1.0)
    );
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let x0 = x(lo + i as f64 * width);
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#457b9d" stroke="white"/>"##,
            y(c as f64),
            plot_w / k as f64,
            plot_h - (y(c as f64) - TOP)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{0:.2}" y1="{TOP:.2}" x2="{0:.2}" y2="{1:.2}" stroke="#e63946" stroke-width="2"/>"##,
        x(mean),
        TOP + plot_h
    );
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{TOP:.2}" x2="{0:.2}" y2="{1:.2}" stroke="black" stroke-dasharray="4 3"/>"##,
            x(0.0),
            TOP + plot_h
        );
    }
    let base = TOP + plot_h;
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>
<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base:.2}" stroke="black"/>
<text x="{LEFT}" y="{:.2}" text-anchor="start">{lo:.4e}</text>
<text x="{:.2}" y="{:.2}" text-anchor="end">{hi:.4e}</text>
<text x="{:.2}" y="{:.2}" text-anchor="middle">J per bin</text>
<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>
<text x="{:.2}" y="{:.2}" text-anchor="end">0</text>
</svg>"#,
        LEFT + plot_w,
        base + 18.0,
        LEFT + plot_w,
        base + 18.0,
        LEFT + plot_w / 2.0,
        base + 38.0,
        LEFT - 6.0,
        TOP + 4.0,
        peak,
        LEFT - 6.0,
        base
    );
    s
}
