//! Text renderings of library artifacts — CSV, PGM and SVG — plus parsers
//! for the two formats the CLI reads back (flow series and image
//! embeddings). Every emitted file starts with a `#` comment recording
//! the run's seed/variant/normalization where applicable. Floats are
//! written with Rust's shortest round-trip formatting, so emit-parse is
//! lossless.

use std::fmt::Write as _;

use crate::analysis::{DecaySeries, FlowMap};
use crate::maskgen::{AttentionMask, MaskKind};
use crate::posindex::{triplet_indices, MultiViewLayout, TokenPosition};
use crate::rotary::FrequencyAllocation;
use crate::{Error, Result};

/// Triplet table: `view,row,col,m,x,y`. Text tokens carry view=row=col=0.
pub fn indices_csv(layout: &MultiViewLayout) -> String {
    let mut out = format!(
        "# grid={} views={} text={}\nview,row,col,m,x,y\n",
        layout.grid(),
        layout.views(),
        layout.text_len()
    );
    for (p, t) in triplet_indices(layout).iter().enumerate() {
        let (view, row, col) = match layout.position(p) {
            TokenPosition::Image { view, row, col } => (view, row, col),
            TokenPosition::Text { .. } => (0, 0, 0),
        };
        writeln!(out, "{view},{row},{col},{},{},{}", t.m, t.x, t.y).unwrap();
    }
    out
}

/// Allocation table: `pair,component,theta` (pair is 1-based).
pub fn freq_csv(alloc: &FrequencyAllocation) -> String {
    let mut out = format!(
        "# variant={} head_dim={} base={}\npair,component,theta\n",
        alloc.variant(),
        alloc.head_dim(),
        crate::rotary::DEFAULT_BASE
    );
    for (p, (comp, theta)) in alloc.pairs().iter().enumerate() {
        writeln!(out, "{},{},{theta}", p + 1, comp.name()).unwrap();
    }
    out
}

/// Mask as a 0/1 matrix, one query row per line.
pub fn mask_csv(mask: &AttentionMask, kind: MaskKind, layout: &MultiViewLayout) -> String {
    let mut out = format!(
        "# kind={kind} grid={} views={} text={} visible={}\n",
        layout.grid(),
        layout.views(),
        layout.text_len(),
        mask.count_visible()
    );
    for q in 0..mask.len() {
        let row: Vec<&str> = mask
            .row(q)
            .iter()
            .map(|v| if *v { "1" } else { "0" })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Mask as an ASCII PGM image, white = visible.
pub fn mask_pgm(mask: &AttentionMask) -> String {
    let n = mask.len();
    let mut out = format!("P2\n# visible={}\n{n} {n}\n255\n", mask.count_visible());
    for q in 0..n {
        let row: Vec<&str> = mask
            .row(q)
            .iter()
            .map(|v| if *v { "255" } else { "0" })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Decay sweep: `variant,delta,mean_abs_score,stderr,samples`.
pub fn decay_csv(series: &DecaySeries) -> String {
    let mut out = format!(
        "# seed={} variant={} component={} normalization=none\nvariant,delta,mean_abs_score,stderr,samples\n",
        series.seed,
        series.variant,
        series.component.name()
    );
    for b in &series.bins {
        writeln!(
            out,
            "{},{},{},{},{}",
            series.variant, b.delta, b.mean_abs_score, b.stderr, b.samples
        )
        .unwrap();
    }
    out
}

fn map_comment(map: &FlowMap, seed: u64, variant: &str) -> String {
    let mut c = format!(
        "# seed={seed} variant={variant} normalization={}",
        map.normalization
    );
    if let Some(w) = &map.warning {
        write!(c, "\n# warning: {w}").unwrap();
    }
    c.push('\n');
    c
}

/// Flow map: `view,row,col,value` (views are already averaged; the view
/// column is fixed at 1).
pub fn flow_map_csv(map: &FlowMap, seed: u64, variant: &str) -> String {
    let mut out = map_comment(map, seed, variant);
    out.push_str("view,row,col,value\n");
    for r in 1..=map.grid.rows() {
        for c in 1..=map.grid.cols() {
            writeln!(out, "1,{r},{c},{}", map.get(r, c)).unwrap();
        }
    }
    out
}

/// Flow map as an 8-bit min-max scaled PGM heatmap.
pub fn map_pgm(map: &FlowMap, seed: u64, variant: &str) -> String {
    let (rows, cols) = (map.grid.rows(), map.grid.cols());
    let mut out = String::from("P2\n");
    out.push_str(&map_comment(map, seed, variant)); // every line is a # comment
    writeln!(out, "{cols} {rows}\n255").unwrap();
    for r in 1..=rows {
        let row: Vec<String> = (1..=cols)
            .map(|c| shade(map.get(r, c), map).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn min_max(map: &FlowMap) -> (f64, f64) {
    let min = map.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = map.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

fn shade(v: f64, map: &FlowMap) -> u8 {
    let (min, max) = min_max(map);
    if max > min {
        (255.0 * (v - min) / (max - min)).round() as u8
    } else {
        0
    }
}

/// Flow map as a standalone SVG heatmap with a min/max legend.
pub fn map_svg(map: &FlowMap, seed: u64, variant: &str) -> String {
    const CELL: usize = 24;
    let (rows, cols) = (map.grid.rows(), map.grid.cols());
    let (min, max) = min_max(map);
    let grid_w = cols * CELL;
    let grid_h = rows * CELL;
    let width = grid_w + 120;
    let height = grid_h.max(80) + 20;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n\
         <!-- seed={seed} variant={variant} normalization={} -->\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n",
        map.normalization
    );
    for r in 1..=rows {
        for c in 1..=cols {
            let g = shade(map.get(r, c), map);
            writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"rgb({g},{g},{g})\" stroke=\"gray\" stroke-width=\"0.5\"/>",
                10 + (c - 1) * CELL,
                10 + (r - 1) * CELL
            )
            .unwrap();
        }
    }
    // legend: vertical gradient bar, max on top
    let bar_x = grid_w + 30;
    let bar_h = grid_h.max(60);
    for step in 0..bar_h {
        let g = 255 - (255 * step / bar_h.max(1));
        writeln!(
            out,
            "<rect x=\"{bar_x}\" y=\"{}\" width=\"14\" height=\"1.5\" fill=\"rgb({g},{g},{g})\"/>",
            10 + step
        )
        .unwrap();
    }
    writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"10\" font-family=\"monospace\">{max:.4e}</text>",
        bar_x + 18,
        14
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"10\" font-family=\"monospace\">{min:.4e}</text>",
        bar_x + 18,
        10 + bar_h
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

/// Per-position flow series: `m,mean_flow`.
pub fn flow_series_csv(series: &[(i64, f64)], seed: u64, variant: &str) -> String {
    let mut out = format!("# seed={seed} variant={variant} normalization=none\nm,mean_flow\n");
    for (m, v) in series {
        writeln!(out, "{m},{v}").unwrap();
    }
    out
}

/// Parses a flow series CSV back into (m, mean_flow) pairs. Comment and
/// blank lines are skipped; the header must be `m,mean_flow`; values must
/// be finite. parse(emit(s)) reproduces s.
pub fn parse_flow_series_csv(text: &str) -> Result<Vec<(i64, f64)>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !saw_header {
            if t != "m,mean_flow" {
                return Err(Error::parse(
                    line,
                    format!("expected header m,mean_flow, got {t:?}"),
                ));
            }
            saw_header = true;
            continue;
        }
        let (m_str, v_str) = t
            .split_once(',')
            .ok_or_else(|| Error::parse(line, "expected two comma-separated fields"))?;
        let m: i64 = m_str
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("bad position {m_str:?}")))?;
        let v = parse_finite(v_str.trim()).map_err(|msg| Error::parse(line, msg))?;
        rows.push((m, v));
    }
    if !saw_header {
        return Err(Error::parse(
            text.lines().count().max(1),
            "missing m,mean_flow header",
        ));
    }
    Ok(rows)
}

/// Parses image embeddings: one comma-separated row of finite floats per
/// token, `#` comments and blank lines skipped, all rows equally wide.
pub fn parse_embeddings_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|f| parse_finite(f.trim()))
            .collect::<std::result::Result<Vec<f64>, String>>()
            .map_err(|msg| Error::parse(line, msg))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(
                    line,
                    format!("row has {} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_finite(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad number {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value {s:?}"));
    }
    Ok(v)
}
