//! Decay and information-flow diagnostics.
//!
//! Decay statistics use matched query/key pairs (k = q): for independent
//! isotropic Gaussian q and k the expected |score| is exactly invariant
//! under rotation offsets (rotating k re-draws it from the same
//! distribution), so independent sampling would measure a flat line at
//! every offset. With k = q the score becomes
//! sum_i (q_a^2 + q_b^2) cos(theta_i * delta_i), whose mean traces the
//! encoding's decay kernel. Every offset bin reuses the same draws
//! (common random numbers), so bin-to-bin differences are driven by the
//! offsets alone and the zero-offset bin equals the unrotated statistic
//! bit for bit.

use rayon::prelude::*;

use crate::numkit::SeededRng;
use crate::posindex::{GridShape, MultiViewLayout, TripletIndex};
use crate::rotary::{offset_score, Component, FrequencyAllocation};
use crate::toynet::AttentionTrace;
use crate::{Error, Result};

/// Samples per parallel shard; shard s draws from RNG stream s, and
/// shard results are reduced in shard order, so parallel scheduling never
/// changes the output.
const SHARD: usize = 200;

/// One Monte-Carlo bin of a decay sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayBin {
    pub delta: i64,
    pub mean_abs_score: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// |score| versus offset along one triplet component.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySeries {
    pub variant: String,
    pub component: Component,
    pub seed: u64,
    pub bins: Vec<DecayBin>,
}

/// Per-grid-cell nonnegative values (flow mass or score statistics).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub grid: GridShape,
    pub values: Vec<f64>, // row-major
    pub normalization: Normalization,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    Sum1,
}

impl Normalization {
    pub fn name(&self) -> &'static str {
        match self {
            Normalization::Raw => "none",
            Normalization::Sum1 => "sum1",
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FlowMap {
    /// Cell value at 1-based (row, col).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row - 1) * self.grid.cols() + (col - 1)]
    }

    /// Rescales the cells to sum to 1.
    pub fn normalized(mut self) -> Result<FlowMap> {
        let sum: f64 = self.values.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::input("flow map has no mass to normalize"));
        }
        for v in &mut self.values {
            *v /= sum;
        }
        self.normalization = Normalization::Sum1;
        Ok(self)
    }
}

/// Offset of `delta` along a single triplet component.
pub fn unit_offset(component: Component, delta: i64) -> TripletIndex {
    match component {
        Component::M => TripletIndex::new(delta, 0, 0),
        Component::X => TripletIndex::new(0, delta, 0),
        Component::Y => TripletIndex::new(0, 0, delta),
    }
}

/// Monte-Carlo sweep of mean |score| at offsets 0..=max_delta along one
/// component (the zero bin is the unrotated reference).
pub fn decay_curve(
    alloc: &FrequencyAllocation,
    component: Component,
    max_delta: usize,
    samples: usize,
    seed: u64,
) -> Result<DecaySeries> {
    if max_delta < 1 {
        return Err(Error::input("max_delta must be at least 1"));
    }
    if samples < 100 {
        return Err(Error::input("decay sweeps need at least 100 samples"));
    }
    let offsets: Vec<TripletIndex> = (0..=max_delta as i64)
        .map(|d| unit_offset(component, d))
        .collect();
    let (sums, sumsq) = sample_abs_scores(alloc, &offsets, samples, seed);
    let bins = (0..offsets.len())
        .map(|b| DecayBin {
            delta: b as i64,
            mean_abs_score: sums[b] / samples as f64,
            stderr: stderr_of_mean(sums[b], sumsq[b], samples),
            samples,
        })
        .collect();
    Ok(DecaySeries {
        variant: alloc.variant().name().to_string(),
        component,
        seed,
        bins,
    })
}

/// Mean |score| between a center-indexed query and a key at each cell's
/// (x, y) offset, m held fixed; a heatmap of spatial decay over the grid.
/// Variants with no spatial pairs yield a flat map and a warning.
pub fn spatial_decay_map(
    alloc: &FrequencyAllocation,
    grid: GridShape,
    samples: usize,
    seed: u64,
) -> Result<FlowMap> {
    if samples < 100 {
        return Err(Error::input("decay sweeps need at least 100 samples"));
    }
    let offsets: Vec<TripletIndex> = (1..=grid.rows())
        .flat_map(|i| (1..=grid.cols()).map(move |j| (i, j)))
        .map(|(i, j)| TripletIndex::new(0, grid.x_coord(j), grid.y_coord(i)))
        .collect();
    let (sums, _) = sample_abs_scores(alloc, &offsets, samples, seed);
    let values = sums.iter().map(|s| s / samples as f64).collect();
    let warning = if alloc.has_spatial() {
        None
    } else {
        Some(format!(
            "{} has no spatial pairs; map is flat by construction",
            alloc.variant()
        ))
    };
    Ok(FlowMap {
        grid,
        values,
        normalization: Normalization::Raw,
        warning,
    })
}

/// Shared sampler: per-sample matched pair q = k scored at every offset.
fn sample_abs_scores(
    alloc: &FrequencyAllocation,
    offsets: &[TripletIndex],
    samples: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let d = alloc.head_dim();
    let n_shards = samples.div_ceil(SHARD);
    let shards: Vec<(Vec<f64>, Vec<f64>)> = (0..n_shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = SeededRng::new(seed).stream(s as u64);
            let count = SHARD.min(samples - s * SHARD);
            let mut sums = vec![0.0; offsets.len()];
            let mut sumsq = vec![0.0; offsets.len()];
            for _ in 0..count {
                let q = rng.gaussian(d);
                for (b, &off) in offsets.iter().enumerate() {
                    let score = offset_score(&q, &q, off, alloc)
                        .expect("sampler vectors match alloc head_dim")
                        .abs();
                    sums[b] += score;
                    sumsq[b] += score * score;
                }
            }
            (sums, sumsq)
        })
        .collect();
    let mut sums = vec![0.0; offsets.len()];
    let mut sumsq = vec![0.0; offsets.len()];
    for (s, s2) in shards {
        for b in 0..offsets.len() {
            sums[b] += s[b];
            sumsq[b] += s2[b];
        }
    }
    (sums, sumsq)
}

fn stderr_of_mean(sum: f64, sumsq: f64, n: usize) -> f64 {
    let n = n as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    (var / n).sqrt()
}

/// Ordinary least squares y = a + b*delta over a series' bins.
#[derive(Debug, Clone)]
pub struct TrendReport {
    pub slope: f64,
    pub slope_stderr: f64,
    pub t_stat: f64,
    pub points: usize,
}

/// Fits a linear trend to (delta, mean_abs_score), skipping the
/// zero-offset reference bin.
pub fn fitted_trend(series: &DecaySeries) -> Result<TrendReport> {
    let pts: Vec<(f64, f64)> = series
        .bins
        .iter()
        .filter(|b| b.delta >= 1)
        .map(|b| (b.delta as f64, b.mean_abs_score))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::input(
            "trend fit needs at least 3 nonzero-offset bins",
        ));
    }
    let nf = n as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let slope_stderr = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(TrendReport {
        slope,
        slope_stderr,
        t_stat: slope / slope_stderr,
        points: n,
    })
}

/// Aggregates a forward trace into per-image-token attention mass from
/// text queries: mean over layers, heads and text rows, views averaged
/// into one grid.
pub fn info_flow(trace: &AttentionTrace, layout: &MultiViewLayout) -> Result<FlowMap> {
    if layout.text_len() == 0 {
        return Err(Error::input("information flow needs at least 1 text query"));
    }
    if trace.seq_len() != layout.len() {
        return Err(Error::shape(format!(
            "trace over {} tokens does not match layout of {}",
            trace.seq_len(),
            layout.len()
        )));
    }
    let v = layout.image_len();
    let n = layout.len();
    let cells = layout.grid().len();
    let mut values = vec![0.0; cells];
    let mut weight = 0usize;
    for mat in trace.mats() {
        for q in v..n {
            weight += 1;
            for p in 0..v {
                values[p % cells] += mat.get(q, p);
            }
        }
    }
    // mean over (layer, head, text row) and over views per cell
    let scale = 1.0 / (weight.max(1) * layout.views().max(1)) as f64;
    for val in &mut values {
        *val *= scale;
    }
    Ok(FlowMap {
        grid: layout.grid(),
        values,
        normalization: Normalization::Raw,
        warning: None,
    })
}

/// Bottom-quartile over top-quartile row-mass ratio of a flow map — the
/// "where does the attention mass sit vertically" summary.
pub fn bottom_top_row_ratio(map: &FlowMap) -> f64 {
    let rows = map.grid.rows();
    let band = rows.div_ceil(4);
    let row_mass = |r: usize| -> f64 { (1..=map.grid.cols()).map(|c| map.get(r, c)).sum() };
    let top: f64 = (1..=band).map(row_mass).sum();
    let bottom: f64 = (rows - band + 1..=rows).map(row_mass).sum();
    bottom / top
}

/// Mean attention from generated-token query rows to each image position
/// m = 1..=v, averaged over layers, heads, rows and steps.
pub fn flow_by_position(
    traces: &[AttentionTrace],
    layout: &MultiViewLayout,
) -> Result<Vec<(i64, f64)>> {
    if traces.is_empty() {
        return Err(Error::input("flow by position needs at least 1 step trace"));
    }
    let v = layout.image_len();
    let base = layout.len();
    let mut totals = vec![0.0; v];
    let mut weight = 0usize;
    for trace in traces {
        if trace.seq_len() <= base {
            return Err(Error::input(
                "step trace has no generated query rows beyond the prompt",
            ));
        }
        for mat in trace.mats() {
            for q in base..trace.seq_len() {
                weight += 1;
                for (p, total) in totals.iter_mut().enumerate() {
                    *total += mat.get(q, p);
                }
            }
        }
    }
    Ok(totals
        .iter()
        .enumerate()
        .map(|(p, t)| (p as i64 + 1, t / weight as f64))
        .collect())
}
