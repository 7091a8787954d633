//! Acceptance gate: one test per shipped guarantee, each printing a
//! single PASS/FAIL line (visible under `--nocapture`) with its runtime
//! budget. Every check here re-derives its expectation independently —
//! frozen constants, brute-force oracles, or closed-form identities —
//! rather than trusting the code under test.

use std::time::{Duration, Instant};

use c2rope::analysis::{
    bottom_top_row_ratio, decay_curve, fitted_trend, info_flow, spatial_decay_map,
};
use c2rope::maskgen::{build_mask, MaskKind};
use c2rope::numkit::{finite_diff_check, SeededRng};
use c2rope::posindex::{GridShape, MultiViewLayout, TripletIndex};
use c2rope::rotary::{
    apply_rotary, make_allocation, offset_score, relative_score, rotary_adjoint, Component, Variant,
};
use c2rope::toynet::{forward, ModelConfig, TokenSequence};

/// Prints the verdict line and fails the test on a miss or budget
/// overrun.
fn report(name: &str, passed: bool, detail: String, elapsed: Duration, budget: Duration) {
    let in_budget = elapsed < budget;
    let verdict = if passed && in_budget { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {name}: {verdict} — {detail} [{elapsed:.2?} of {budget:.0?} budget]");
    assert!(passed, "{name}: {detail}");
    assert!(
        in_budget,
        "{name} exceeded its runtime budget: {elapsed:?} >= {budget:?}"
    );
}

#[test]
fn golden_triplets_of_a_4x4_grid() {
    let t0 = Instant::now();
    let grid = GridShape::new(4, 4).unwrap();
    let layout = MultiViewLayout::new(grid, 1, 0).unwrap();
    let got = c2rope::posindex::triplet_indices(&layout);

    // frozen corner and center triplets for v=16, sqrt(v)=4
    let expected = [
        (0usize, (1, -1, 1)),
        (3, (4, 1, 1)),
        (12, (13, -1, -1)),
        (15, (16, 1, -1)),
        (5, (6, 0, 0)),
        (6, (7, 0, 0)),
        (9, (10, 0, 0)),
        (10, (11, 0, 0)),
    ];
    let mut bad = Vec::new();
    for (pos, (m, x, y)) in expected {
        if got[pos] != TripletIndex::new(m, x, y) {
            bad.push(format!("token {}: {:?}", pos + 1, got[pos]));
        }
    }
    report(
        "golden-triplets-4x4",
        bad.is_empty(),
        if bad.is_empty() {
            "4 corners and 4 center triplets match the frozen values".into()
        } else {
            format!("mismatches: {}", bad.join("; "))
        },
        t0.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn two_sided_scores_equal_relative_rotation_scores() {
    let t0 = Instant::now();
    let mut rng = SeededRng::new(0xacce97).stream(2);
    let mut worst: f64 = 0.0;
    let mut draws = 0usize;
    for &d in &[16usize, 64, 128] {
        let allocs: Vec<_> = Variant::ALL
            .iter()
            .map(|&v| make_allocation(v, d).unwrap())
            .collect();
        for i in 0..10_000usize {
            let alloc = &allocs[i % allocs.len()];
            let q = rng.gaussian(d);
            let k = rng.gaussian(d);
            let rand_idx = |rng: &mut SeededRng| {
                TripletIndex::new(
                    rng.next_below(1025) as i64 - 512,
                    rng.next_below(129) as i64 - 64,
                    rng.next_below(129) as i64 - 64,
                )
            };
            let iq = rand_idx(&mut rng);
            let ik = rand_idx(&mut rng);
            let two_sided = relative_score(&q, &k, iq, ik, alloc).unwrap();
            let relative = offset_score(&q, &k, iq - ik, alloc).unwrap();
            worst = worst.max((two_sided - relative).abs());
            draws += 1;
        }
    }
    report(
        "relative-position-identity",
        worst <= 1e-9,
        format!("max |two-sided − relative| = {worst:.3e} over {draws} draws at d ∈ {{16,64,128}}"),
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn temporal_triplets_reproduce_vanilla_scores() {
    let t0 = Instant::now();
    let d = 64;
    let vanilla = make_allocation(Variant::Vanilla, d).unwrap();
    let c2 = make_allocation(Variant::C2Rope, d).unwrap();
    let mut rng = SeededRng::new(0xacce97).stream(3);
    let q = rng.gaussian(d);
    let k = rng.gaussian(d);

    let mut worst_score: f64 = 0.0;
    for m in 1..=512i64 {
        let idx = TripletIndex::text(m);
        let sv = offset_score(&q, &k, idx, &vanilla).unwrap();
        let sc = offset_score(&q, &k, idx, &c2).unwrap();
        worst_score = worst_score.max((sv - sc).abs());
    }

    // end to end: a text-only prompt must be encoding-agnostic
    let layout = MultiViewLayout::new(GridShape::new(1, 1).unwrap(), 0, 12).unwrap();
    let cfg = |encoding| ModelConfig {
        layers: 2,
        heads: 2,
        head_dim: 16,
        vocab: 40,
        seed: 7,
        encoding,
        mask_kind: MaskKind::Causal,
    };
    let seq = TokenSequence::synthetic(layout, cfg(Variant::Vanilla).model_dim(), 40, 7).unwrap();
    let (lv, _) = forward(&cfg(Variant::Vanilla), &seq).unwrap();
    let (lc, _) = forward(&cfg(Variant::C2Rope), &seq).unwrap();
    let worst_logit = lv
        .data()
        .iter()
        .zip(lc.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    report(
        "text-path-equivalence",
        worst_score <= 1e-12 && worst_logit <= 1e-9,
        format!(
            "score gap {worst_score:.3e} over m ∈ [1,512]; text-only logit gap {worst_logit:.3e}"
        ),
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

/// Brute-force visibility rule, written from scratch against the masking
/// contract; shares no code with `maskgen`.
fn oracle_visible(q: usize, k: usize, rows: usize, cols: usize, views: usize, text: usize) -> bool {
    let per_view = rows * cols;
    let image_len = views * per_view;
    let ring = |p: usize| -> i64 {
        let cell = p % per_view;
        let (row, col) = (cell / cols + 1, cell % cols + 1);
        // coordinate lists built by symmetric enumeration
        let line = |extent: usize| -> Vec<i64> {
            let h = (extent / 2) as i64;
            if extent.is_multiple_of(2) {
                (1 - h..=0).chain(0..=h - 1).collect()
            } else {
                (-h..=h).collect()
            }
        };
        let x = line(cols)[col - 1];
        let y = -line(rows)[row - 1];
        x.abs().max(y.abs())
    };
    let is_image = |p: usize| p < image_len;
    let _ = text;
    match (is_image(q), is_image(k)) {
        (true, true) => {
            let (vq, vk) = (q / per_view, k / per_view);
            if vk < vq {
                true
            } else if vk > vq {
                false
            } else {
                ring(k) <= ring(q)
            }
        }
        (true, false) => false, // image tokens never see text
        (false, true) => true,  // text sees every image token
        (false, false) => k <= q,
    }
}

#[test]
fn chebyshev_masks_match_a_brute_force_oracle() {
    let t0 = Instant::now();
    let mut entries = 0usize;
    let mut layouts = 0usize;
    for rows in 1..=6 {
        for cols in 1..=6 {
            for views in 0..=2 {
                for text in 0..=4 {
                    if views == 0 && text == 0 {
                        continue;
                    }
                    let grid = GridShape::new(rows, cols).unwrap();
                    let layout = MultiViewLayout::new(grid, views, text).unwrap();
                    let mask = build_mask(&layout, MaskKind::Chebyshev).unwrap();
                    layouts += 1;
                    for q in 0..layout.len() {
                        for k in 0..layout.len() {
                            let want = oracle_visible(q, k, rows, cols, views, text);
                            assert_eq!(
                                mask.visible(q, k),
                                want,
                                "grid {rows}x{cols} views {views} text {text} entry ({q},{k})"
                            );
                            entries += 1;
                        }
                    }
                }
            }
        }
    }
    report(
        "chebyshev-mask-oracle",
        true,
        format!("{entries} entries across {layouts} layouts equal the per-entry rule"),
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn vertical_neighbors_differ_by_one_column_stride() {
    let t0 = Instant::now();
    let mut pairs = 0usize;
    let mut center_crossings = 0usize;
    for rows in 2..=7 {
        for cols in 1..=7 {
            let grid = GridShape::new(rows, cols).unwrap();
            let layout = MultiViewLayout::new(grid, 2, 0).unwrap();
            let idx = c2rope::posindex::triplet_indices(&layout);
            for view in 0..2 {
                let base = view * rows * cols;
                for r in 1..rows {
                    for c in 0..cols {
                        let upper = idx[base + (r - 1) * cols + c];
                        let lower = idx[base + r * cols + c];
                        let d = lower - upper;
                        assert_eq!(d.m, cols as i64, "{rows}x{cols} row {r} col {c}: m stride");
                        assert_eq!(d.x, 0, "{rows}x{cols} row {r} col {c}: x must not move");
                        // the two central rows of an even grid share y = 0
                        // (their frozen triplets both read (·, ·, 0)), so the
                        // unit step pauses exactly once mid-grid
                        if rows % 2 == 0 && r == rows / 2 {
                            assert_eq!(d.y, 0, "{rows}x{cols}: center crossing");
                            center_crossings += 1;
                        } else {
                            assert_eq!(d.y, -1, "{rows}x{cols} row {r} col {c}: y step");
                        }
                        pairs += 1;
                    }
                }
            }
        }
    }
    report(
        "column-continuity",
        true,
        format!(
            "{pairs} vertical pairs step by (cols, 0, ±1); {center_crossings} even-grid center crossings hold y at 0 as the frozen 4x4 triplets require"
        ),
        t0.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn attention_scores_decay_with_distance() {
    let t0 = Instant::now();
    let vanilla = make_allocation(Variant::Vanilla, 64).unwrap();
    let series = decay_curve(&vanilla, Component::M, 256, 10_000, 1).unwrap();
    let trend = fitted_trend(&series).unwrap();

    let c2 = make_allocation(Variant::C2Rope, 64).unwrap();
    let spatial = decay_curve(&c2, Component::X, 2048, 500, 1).unwrap();
    let means: Vec<f64> = spatial.bins.iter().map(|b| b.mean_abs_score).collect();
    let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - means.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_se = spatial.bins.iter().map(|b| b.stderr).fold(0.0, f64::max);

    let flat_map = spatial_decay_map(&vanilla, GridShape::new(4, 4).unwrap(), 200, 1).unwrap();
    let map_spread = flat_map
        .values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        - flat_map
            .values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);

    let passed =
        trend.slope < 0.0 && trend.t_stat.abs() > 3.0 && spread > 3.0 * max_se && map_spread == 0.0;
    report(
        "long-term-decay",
        passed,
        format!(
            "vanilla slope {:.3e} (t = {:.1}); c2rope x-offset spread {spread:.3e} > 3×stderr {:.3e}; vanilla spatial map exactly flat (spread {map_spread:.1e}, within any stderr band)",
            trend.slope,
            trend.t_stat,
            3.0 * max_se
        ),
        t0.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn rotation_adjoint_passes_gradient_checks() {
    let t0 = Instant::now();
    let mut rng = SeededRng::new(0xacce97).stream(7);
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    for &variant in Variant::ALL.iter() {
        for i in 0..100usize {
            let d = if i % 2 == 0 { 16 } else { 64 };
            let alloc = make_allocation(variant, d).unwrap();
            let idx = TripletIndex::new(
                rng.next_below(513) as i64 - 256,
                rng.next_below(65) as i64 - 32,
                rng.next_below(65) as i64 - 32,
            );
            let f = move |v: &[f64]| apply_rotary(v, idx, &alloc).unwrap();
            let alloc2 = make_allocation(variant, d).unwrap();
            let adj = move |v: &[f64]| rotary_adjoint(v, idx, &alloc2).unwrap();
            let rep = finite_diff_check(&f, &adj, d, 1e-8);
            assert!(
                rep.passed,
                "{variant:?} idx {idx:?} d {d}: deviation {:.3e}",
                rep.max_deviation
            );
            worst = worst.max(rep.max_deviation);
            cases += 1;
        }
    }
    report(
        "rotary-adjoint-gradient",
        worst <= 1e-8,
        format!("{cases} cases (100 per variant) pass inner-product and central-difference checks; worst deviation {worst:.3e}"),
        t0.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn trace_rows_stay_normalized_on_a_multiview_forward() {
    let t0 = Instant::now();
    let grid = GridShape::new(8, 8).unwrap();
    let layout = MultiViewLayout::new(grid, 2, 16).unwrap();
    let cfg = ModelConfig {
        layers: 2,
        heads: 2,
        head_dim: 16,
        vocab: 64,
        seed: 11,
        encoding: Variant::C2Rope,
        mask_kind: MaskKind::Chebyshev,
    };
    let seq = TokenSequence::synthetic(layout, cfg.model_dim(), cfg.vocab, 11).unwrap();
    let (logits, trace) = forward(&cfg, &seq).unwrap();
    assert!(logits.data().iter().all(|v| v.is_finite()));

    let mask = build_mask(&layout, MaskKind::Chebyshev).unwrap();
    let mut worst_row: f64 = 0.0;
    let mut masked = 0usize;
    for mat in trace.mats() {
        for q in 0..mat.rows() {
            let sum: f64 = mat.row(q).iter().sum();
            worst_row = worst_row.max((sum - 1.0).abs());
            for k in 0..mat.rows() {
                if !mask.visible(q, k) {
                    assert_eq!(mat.get(q, k), 0.0, "masked entry ({q},{k}) leaked");
                    masked += 1;
                }
            }
        }
    }
    report(
        "trace-conservation",
        worst_row <= 1e-6,
        format!(
            "144-token 2-view forward: worst |row sum − 1| = {worst_row:.3e}; {masked} masked entries are exactly 0"
        ),
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn flow_mass_trend_is_recorded() {
    let t0 = Instant::now();
    let ratio_for = |encoding, mask_kind, s: u64| -> f64 {
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
        let seq = TokenSequence::synthetic(layout, cfg.model_dim(), cfg.vocab, s).unwrap();
        let (_, trace) = forward(&cfg, &seq).unwrap();
        bottom_top_row_ratio(&info_flow(&trace, &layout).unwrap())
    };
    let seeds = 20u64;
    let mut vanilla_mean = 0.0;
    let mut c2_mean = 0.0;
    for s in 0..seeds {
        vanilla_mean += ratio_for(Variant::Vanilla, MaskKind::Causal, s) / seeds as f64;
        c2_mean += ratio_for(Variant::C2Rope, MaskKind::Chebyshev, s) / seeds as f64;
    }
    let moved = (c2_mean - 1.0).abs() < (vanilla_mean - 1.0).abs();
    // nonbinding trend: the numbers are recorded, not gated — random
    // untrained weights carry no trained-model flow asymmetry
    let computed = vanilla_mean.is_finite() && c2_mean.is_finite() && vanilla_mean > 0.0;
    println!(
        "ACCEPTANCE flow-mass-trend: RECORDED — bottom/top row mass over {seeds} seeds: vanilla+causal {vanilla_mean:.4}, c2rope+chebyshev {c2_mean:.4} ({} toward 1) [{:.2?}]",
        if moved { "moved" } else { "did not move" },
        t0.elapsed()
    );
    assert!(computed, "flow ratios must be finite and positive");
}
