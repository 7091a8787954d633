//! Runtime invariant suite: `selfcheck` re-verifies the library's core
//! properties on fresh draws and prints one pass/fail line per property.
//! Gate checks decide the exit status; informational entries record
//! trends (flow-mass distribution) without gating.

use crate::analysis::{
    bottom_top_row_ratio, decay_curve, fitted_trend, info_flow, spatial_decay_map,
};
use crate::maskgen::{build_mask, chebyshev_causal_mask, MaskKind};
use crate::numkit::{finite_diff_check, norm, SeededRng};
use crate::posindex::{
    chebyshev_ring, triplet_indices, GridShape, MultiViewLayout, TokenPosition, TripletIndex,
};
use crate::rotary::{
    apply_rotary, make_allocation, offset_score, relative_score, rotary_adjoint, Component, Variant,
};
use crate::toynet::{forward, ModelConfig, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Failing this fails the suite.
    Gate,
    /// Recorded trend; never fails the suite.
    Info,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub kind: CheckKind,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = fn(u64) -> std::result::Result<String, String>;

const CHECKS: &[(&str, CheckKind, CheckFn)] = &[
    (
        "triplet-golden-indices",
        CheckKind::Gate,
        check_triplet_golden,
    ),
    (
        "relative-position-identity",
        CheckKind::Gate,
        check_relative_identity,
    ),
    ("text-path-equivalence", CheckKind::Gate, check_text_path),
    ("chebyshev-mask-oracle", CheckKind::Gate, check_mask_oracle),
    (
        "column-continuity",
        CheckKind::Gate,
        check_column_continuity,
    ),
    ("rotary-adjoint", CheckKind::Gate, check_adjoint),
    (
        "isometry-and-trace-conservation",
        CheckKind::Gate,
        check_trace_conservation,
    ),
    (
        "temporal-decay-trend",
        CheckKind::Gate,
        check_temporal_decay,
    ),
    (
        "spatial-decay-variation",
        CheckKind::Gate,
        check_spatial_decay,
    ),
    ("flow-mass-distribution", CheckKind::Info, info_flow_mass),
];

/// Runs every check; MC checks derive their draws from `seed`.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, kind, f)| match f(seed) {
            Ok(detail) => CheckOutcome {
                name,
                kind: *kind,
                passed: true,
                detail,
            },
            Err(detail) => CheckOutcome {
                name,
                kind: *kind,
                passed: false,
                detail,
            },
        })
        .collect()
}

/// True when every gate check passed.
pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes
        .iter()
        .all(|o| o.passed || o.kind == CheckKind::Info)
}

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn check_triplet_golden(_seed: u64) -> std::result::Result<String, String> {
    let grid = GridShape::new(4, 4).map_err(|e| e.to_string())?;
    let layout = MultiViewLayout::new(grid, 1, 0).map_err(|e| e.to_string())?;
    let idx = triplet_indices(&layout);
    let corners = [
        (0usize, (1i64, -1i64, 1i64)),
        (3, (4, 1, 1)),
        (12, (13, -1, -1)),
        (15, (16, 1, -1)),
    ];
    for (p, (m, x, y)) in corners {
        let t = idx[p];
        ensure(
            (t.m, t.x, t.y) == (m, x, y),
            format!("corner {p}: got ({}, {}, {})", t.m, t.x, t.y),
        )?;
    }
    for m in [6i64, 7, 10, 11] {
        let t = idx[(m - 1) as usize];
        ensure(
            t.m == m && t.x == 0 && t.y == 0,
            format!("center m={m}: got ({}, {}, {})", t.m, t.x, t.y),
        )?;
    }
    let two = MultiViewLayout::new(GridShape::new(2, 2).unwrap(), 2, 0).unwrap();
    let t = triplet_indices(&two)[4];
    ensure(
        (t.m, t.x, t.y) == (5, 0, 0),
        format!("view-2 first token: got ({}, {}, {})", t.m, t.x, t.y),
    )?;
    Ok("4 corners, 4 centers and multi-view continuation verified".into())
}

fn check_relative_identity(seed: u64) -> std::result::Result<String, String> {
    let mut rng = SeededRng::new(seed).stream(201);
    let mut max_dev: f64 = 0.0;
    let mut draws = 0usize;
    for variant in Variant::ALL {
        for d in [16usize, 64] {
            let alloc = make_allocation(variant, d).map_err(|e| e.to_string())?;
            for _ in 0..125 {
                let q = rng.gaussian(d);
                let k = rng.gaussian(d);
                let iq = rand_triplet(&mut rng);
                let ik = rand_triplet(&mut rng);
                let two = relative_score(&q, &k, iq, ik, &alloc).unwrap();
                let rel = offset_score(&q, &k, iq - ik, &alloc).unwrap();
                max_dev = max_dev.max((two - rel).abs());
                draws += 1;
            }
        }
    }
    ensure(
        max_dev <= 1e-9,
        format!("two-sided vs relative form deviate by {max_dev:.3e}"),
    )?;
    Ok(format!("max deviation {max_dev:.3e} over {draws} draws"))
}

fn check_text_path(seed: u64) -> std::result::Result<String, String> {
    let mut rng = SeededRng::new(seed).stream(202);
    let q = rng.gaussian(16);
    let k = rng.gaussian(16);
    let vanilla = make_allocation(Variant::Vanilla, 16).unwrap();
    let c2 = make_allocation(Variant::C2Rope, 16).unwrap();
    for m in 1..=256i64 {
        let (iq, ik) = (TripletIndex::text(m + 64), TripletIndex::text(m));
        let a = relative_score(&q, &k, iq, ik, &c2).unwrap();
        let b = relative_score(&q, &k, iq, ik, &vanilla).unwrap();
        ensure(a == b, format!("scores split at m={m}: {a} vs {b}"))?;
    }

    let mk = |encoding| ModelConfig {
        layers: 1,
        heads: 2,
        head_dim: 16,
        vocab: 17,
        seed,
        encoding,
        mask_kind: MaskKind::Causal,
    };
    let layout = MultiViewLayout::new(GridShape::new(1, 1).unwrap(), 0, 6).unwrap();
    let seq = TokenSequence::synthetic(layout, 32, 17, seed).map_err(|e| e.to_string())?;
    let (lv, _) = forward(&mk(Variant::Vanilla), &seq).map_err(|e| e.to_string())?;
    let (lc, _) = forward(&mk(Variant::C2Rope), &seq).map_err(|e| e.to_string())?;
    let max_dev = lv
        .data()
        .iter()
        .zip(lc.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(
        max_dev <= 1e-9,
        format!("text-only logits deviate by {max_dev:.3e}"),
    )?;
    Ok(format!(
        "256 exact score matches; text-only logits deviate by {max_dev:.3e}"
    ))
}

fn check_mask_oracle(_seed: u64) -> std::result::Result<String, String> {
    let mut entries = 0usize;
    for rows in 1..=4 {
        for cols in 1..=4 {
            for views in 1..=2 {
                for text in [0usize, 2] {
                    let grid = GridShape::new(rows, cols).unwrap();
                    let layout = MultiViewLayout::new(grid, views, text).unwrap();
                    let mask = chebyshev_causal_mask(&layout).map_err(|e| e.to_string())?;
                    let ring = |row: usize, col: usize| {
                        chebyshev_ring(grid.x_coord(col), grid.y_coord(row))
                    };
                    for q in 0..layout.len() {
                        for k in 0..layout.len() {
                            use TokenPosition::*;
                            let want = match (layout.position(q), layout.position(k)) {
                                (
                                    Image {
                                        view: vq,
                                        row: rq,
                                        col: cq,
                                    },
                                    Image {
                                        view: vk,
                                        row: rk,
                                        col: ck,
                                    },
                                ) => vk < vq || (vk == vq && ring(rk, ck) <= ring(rq, cq)),
                                (Image { .. }, Text { .. }) => false,
                                (Text { .. }, Image { .. }) => true,
                                (Text { .. }, Text { .. }) => k <= q,
                            };
                            ensure(
                                mask.visible(q, k) == want,
                                format!("{rows}x{cols} v{views} t{text}: entry ({q},{k})"),
                            )?;
                            entries += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{entries} entries match the per-entry rule"))
}

fn check_column_continuity(_seed: u64) -> std::result::Result<String, String> {
    let mut pairs = 0usize;
    for (rows, cols) in [(4usize, 4usize), (5, 3), (6, 2), (3, 3)] {
        let layout = MultiViewLayout::new(GridShape::new(rows, cols).unwrap(), 1, 0).unwrap();
        let idx = triplet_indices(&layout);
        for i in 1..rows {
            for j in 0..cols {
                let upper = idx[(i - 1) * cols + j];
                let lower = idx[i * cols + j];
                ensure(
                    lower.m - upper.m == cols as i64,
                    format!("{rows}x{cols}: m step {}", lower.m - upper.m),
                )?;
                ensure(lower.x == upper.x, format!("{rows}x{cols}: x drifted"))?;
                let want_dy = if rows % 2 == 0 && i == rows / 2 { 0 } else { 1 };
                ensure(
                    upper.y - lower.y == want_dy,
                    format!("{rows}x{cols} row {i}: dy {}", upper.y - lower.y),
                )?;
                pairs += 1;
            }
        }
    }
    Ok(format!(
        "{pairs} vertical pairs: m steps by cols, x fixed, y steps by 1 (0 across an even grid's shared center)"
    ))
}

fn check_adjoint(seed: u64) -> std::result::Result<String, String> {
    let mut rng = SeededRng::new(seed).stream(203);
    let mut worst: f64 = 0.0;
    for variant in Variant::ALL {
        let alloc = make_allocation(variant, 16).unwrap();
        for _ in 0..25 {
            let idx = rand_triplet(&mut rng);
            let a1 = alloc.clone();
            let a2 = alloc.clone();
            let f = move |u: &[f64]| apply_rotary(u, idx, &a1).unwrap();
            let adj = move |u: &[f64]| rotary_adjoint(u, idx, &a2).unwrap();
            let report = finite_diff_check(&f, &adj, 16, 1e-8);
            ensure(
                report.passed,
                format!(
                    "{variant}: finite-difference deviation {:.3e}",
                    report.max_deviation
                ),
            )?;
            worst = worst.max(report.max_deviation);
        }
    }
    Ok(format!("100 cases pass at tol 1e-8 (worst {worst:.3e})"))
}

fn check_trace_conservation(seed: u64) -> std::result::Result<String, String> {
    let mut rng = SeededRng::new(seed).stream(204);
    for variant in Variant::ALL {
        let alloc = make_allocation(variant, 32).unwrap();
        for _ in 0..125 {
            let v = rng.gaussian(32);
            let out = apply_rotary(&v, rand_triplet(&mut rng), &alloc).unwrap();
            let dev = (norm(&out) - norm(&v)).abs();
            ensure(dev <= 1e-9, format!("{variant}: norm drifts by {dev:.3e}"))?;
        }
    }

    let cfg = ModelConfig {
        layers: 2,
        heads: 2,
        head_dim: 16,
        vocab: 32,
        seed,
        encoding: Variant::C2Rope,
        mask_kind: MaskKind::Chebyshev,
    };
    let layout = MultiViewLayout::new(GridShape::new(4, 4).unwrap(), 2, 4).unwrap();
    let seq = TokenSequence::synthetic(layout, cfg.model_dim(), cfg.vocab, seed)
        .map_err(|e| e.to_string())?;
    let (_, trace) = forward(&cfg, &seq).map_err(|e| e.to_string())?;
    let mask = build_mask(&layout, MaskKind::Chebyshev).unwrap();
    let mut worst_row: f64 = 0.0;
    for mat in trace.mats() {
        for i in 0..mat.rows() {
            let sum: f64 = mat.row(i).iter().sum();
            worst_row = worst_row.max((sum - 1.0).abs());
            ensure(
                (sum - 1.0).abs() <= 1e-6,
                format!("attention row {i} sums to {sum}"),
            )?;
            for j in 0..mat.cols() {
                if !mask.visible(i, j) {
                    ensure(
                        mat.get(i, j) == 0.0,
                        format!("masked entry ({i},{j}) reads {}", mat.get(i, j)),
                    )?;
                }
            }
        }
    }
    Ok(format!(
        "500 rotations norm-preserving; trace rows conserved (worst |sum-1| {worst_row:.3e}), masked entries exactly 0"
    ))
}

fn check_temporal_decay(seed: u64) -> std::result::Result<String, String> {
    let alloc = make_allocation(Variant::Vanilla, 64).unwrap();
    let series = decay_curve(&alloc, Component::M, 128, 500, seed).map_err(|e| e.to_string())?;
    let trend = fitted_trend(&series).map_err(|e| e.to_string())?;
    ensure(
        trend.slope < 0.0 && trend.t_stat < -3.0,
        format!("slope {:.4e}, t {:.2}", trend.slope, trend.t_stat),
    )?;
    Ok(format!(
        "vanilla slope {:.4e} with t {:.1} over {} offsets",
        trend.slope, trend.t_stat, trend.points
    ))
}

fn check_spatial_decay(seed: u64) -> std::result::Result<String, String> {
    // Spatial pairs carry the lowest frequencies, so the sweep must reach
    // offsets around 1/theta_min before the decay clears the noise floor.
    let c2 = make_allocation(Variant::C2Rope, 64).unwrap();
    let series = decay_curve(&c2, Component::X, 2048, 500, seed).map_err(|e| e.to_string())?;
    let means: Vec<f64> = series.bins.iter().map(|b| b.mean_abs_score).collect();
    let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - means.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_se = series.bins.iter().map(|b| b.stderr).fold(0.0, f64::max);
    ensure(
        spread > 3.0 * max_se,
        format!(
            "spatial spread {spread:.3e} vs 3x stderr {:.3e}",
            3.0 * max_se
        ),
    )?;

    let vanilla = make_allocation(Variant::Vanilla, 64).unwrap();
    let map = spatial_decay_map(&vanilla, GridShape::new(4, 4).unwrap(), 200, seed)
        .map_err(|e| e.to_string())?;
    ensure(
        map.warning.is_some(),
        "vanilla map missing its no-spatial-pairs warning",
    )?;
    ensure(
        map.values.iter().all(|v| *v == map.values[0]),
        "vanilla spatial map is not flat",
    )?;
    Ok(format!(
        "c2rope x-sweep spread {spread:.3e} > 3x stderr {:.3e}; vanilla map exactly flat",
        3.0 * max_se
    ))
}

fn info_flow_mass(seed: u64) -> std::result::Result<String, String> {
    let ratio_for = |encoding, mask_kind, s: u64| -> std::result::Result<f64, String> {
        let cfg = ModelConfig {
            layers: 2,
            heads: 2,
            head_dim: 16,
            vocab: 32,
            seed: s,
            encoding,
            mask_kind,
        };
        let layout = MultiViewLayout::new(GridShape::new(16, 16).unwrap(), 1, 8).unwrap();
        let seq = TokenSequence::synthetic(layout, cfg.model_dim(), cfg.vocab, s)
            .map_err(|e| e.to_string())?;
        let (_, trace) = forward(&cfg, &seq).map_err(|e| e.to_string())?;
        let map = info_flow(&trace, &layout).map_err(|e| e.to_string())?;
        Ok(bottom_top_row_ratio(&map))
    };
    let seeds = 20u64;
    let mut vanilla_sum = 0.0;
    let mut c2_sum = 0.0;
    for s in 0..seeds {
        vanilla_sum += ratio_for(Variant::Vanilla, MaskKind::Causal, seed + s)?;
        c2_sum += ratio_for(Variant::C2Rope, MaskKind::Chebyshev, seed + s)?;
    }
    let vanilla_mean = vanilla_sum / seeds as f64;
    let c2_mean = c2_sum / seeds as f64;
    let moved = (c2_mean - 1.0).abs() < (vanilla_mean - 1.0).abs();
    Ok(format!(
        "bottom/top row mass over {seeds} seeds: vanilla+causal {vanilla_mean:.3}, c2rope+chebyshev {c2_mean:.3} ({} toward 1)",
        if moved { "moved" } else { "did not move" }
    ))
}

fn rand_triplet(rng: &mut SeededRng) -> TripletIndex {
    TripletIndex::new(
        rng.next_below(512) as i64,
        rng.next_below(33) as i64 - 16,
        rng.next_below(33) as i64 - 16,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_default_seed() {
        let outcomes = run_all(0);
        assert_eq!(outcomes.len(), CHECKS.len());
        for o in &outcomes {
            assert!(
                o.passed || o.kind == CheckKind::Info,
                "{} failed: {}",
                o.name,
                o.detail
            );
        }
        assert!(all_passed(&outcomes));
        let info = outcomes.iter().find(|o| o.kind == CheckKind::Info).unwrap();
        assert!(info.detail.contains("bottom/top"));
    }

    #[test]
    fn suite_passes_on_another_seed() {
        assert!(all_passed(&run_all(314159)));
    }
}
