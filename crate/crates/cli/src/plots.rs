//! Static SVG diagnostics.

use std::collections::BTreeMap;
use std::fmt::Write;

use cohere_core::assoc::TrackSet;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn header(out: &mut String, title: &str) {
    let _ =
        writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{title}</text>"#);
}

/// Top-down view of track centers, one polyline per track; ground-truth
/// trajectories, when given, are drawn dashed underneath.
pub fn track_overlay(pred: &TrackSet, gt: Option<&TrackSet>) -> String {
    let all = pred.tracks.iter().chain(gt.iter().flat_map(|g| g.tracks.iter()));
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for e in all.flat_map(|t| t.entries.iter()) {
        for k in 0..2 {
            lo[k] = lo[k].min(e.center[k]);
            hi[k] = hi[k].max(e.center[k]);
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let map = |x: f64, y: f64| (MARGIN + (x - lo[0]) * scale, SIZE - MARGIN - (y - lo[1]) * scale);

    let mut out = String::new();
    header(&mut out, "track centers (world x, y)");
    let draw = |set: &TrackSet, dashed: bool, out: &mut String| {
        for t in &set.tracks {
            let color = if dashed { "#999999" } else { PALETTE[t.id % PALETTE.len()] };
            let pts: Vec<String> = t
                .entries
                .iter()
                .map(|e| {
                    let (x, y) = map(e.center[0], e.center[1]);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
            let _ =
                writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, pts.join(" "));
            if !dashed {
                if let Some(first) = pts.first() {
                    let (x, y) = first.split_once(',').expect("formatted pair");
                    let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
                }
            }
        }
    };
    if let Some(g) = gt {
        draw(g, true, &mut out);
    }
    draw(pred, false, &mut out);
    out.push_str("</svg>\n");
    out
}

/// Track count per track length.
pub fn length_histogram(lengths: &BTreeMap<usize, usize>) -> String {
    let mut out = String::new();
    header(&mut out, "track length histogram");
    let max_len = lengths.keys().copied().max().unwrap_or(1).max(1);
    let max_count = lengths.values().copied().max().unwrap_or(1).max(1);
    let bar = (SIZE - 2.0 * MARGIN) / max_len as f64;
    let height = SIZE - 2.0 * MARGIN;
    let base = SIZE - MARGIN;
    let _ = writeln!(out, r##"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="#333333"/>"##, SIZE - MARGIN);
    for (&len, &count) in lengths {
        let h = height * count as f64 / max_count as f64;
        let x = MARGIN + (len - 1) as f64 * bar;
        let _ =
            writeln!(out, r##"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="#1f77b4"/>"##, base - h, bar * 0.9);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{count}</text>"#,
            x + bar * 0.45,
            base - h - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{len}</text>"#,
            x + bar * 0.45,
            base + 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}
