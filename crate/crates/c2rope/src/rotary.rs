//! Rotary position encoding: the geometric frequency ladder, allocation of
//! rotation pairs to triplet components under four variants, rotation of
//! query/key vectors, relative attention scores, and the exact adjoint.
//!
//! A head dimension d holds d/2 rotation pairs; pair i (1-based) always
//! carries angle theta_i = base^(-2(i-1)/d) — variants decide only which
//! triplet component (m, x or y) scales that angle.

use std::fmt;
use std::str::FromStr;

use crate::numkit;
use crate::posindex::TripletIndex;
use crate::{Error, Result};

pub const DEFAULT_BASE: f64 = 10000.0;

/// Which triplet component drives a rotation pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    M,
    X,
    Y,
}

impl Component {
    pub fn name(&self) -> &'static str {
        match self {
            Component::M => "m",
            Component::X => "x",
            Component::Y => "y",
        }
    }

    fn pick(&self, idx: TripletIndex) -> i64 {
        match self {
            Component::M => idx.m,
            Component::X => idx.x,
            Component::Y => idx.y,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Component> {
        match s {
            "m" => Ok(Component::M),
            "x" => Ok(Component::X),
            "y" => Ok(Component::Y),
            other => Err(Error::config(format!(
                "unknown component {other:?} (expected m, x or y)"
            ))),
        }
    }
}

/// Encoding variant: how the frequency ladder is split between the
/// temporal index and the two spatial coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Every pair rotates by m (plain rotary encoding).
    Vanilla,
    /// Low-frequency quarter on m, the rest alternating x, y.
    MRopeLike,
    /// High-frequency half on m, low-frequency half alternating x, y.
    VideoRopeLike,
    /// High-frequency 3/4 on m, low-frequency 1/4 alternating x, y.
    C2Rope,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Vanilla,
        Variant::MRopeLike,
        Variant::VideoRopeLike,
        Variant::C2Rope,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::MRopeLike => "mrope_like",
            Variant::VideoRopeLike => "videorope_like",
            Variant::C2Rope => "c2rope",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "vanilla" => Ok(Variant::Vanilla),
            "mrope_like" => Ok(Variant::MRopeLike),
            "videorope_like" => Ok(Variant::VideoRopeLike),
            "c2rope" => Ok(Variant::C2Rope),
            other => Err(Error::config(format!(
                "unknown encoding {other:?} (expected vanilla, mrope_like, videorope_like or c2rope)"
            ))),
        }
    }
}

/// Per-pair component assignment plus the shared frequency ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyAllocation {
    head_dim: usize,
    variant: Variant,
    pairs: Vec<(Component, f64)>,
}

impl FrequencyAllocation {
    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn pairs(&self) -> &[(Component, f64)] {
        &self.pairs
    }

    /// True when at least one pair rotates by x or y.
    pub fn has_spatial(&self) -> bool {
        self.pairs.iter().any(|(c, _)| *c != Component::M)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.head_dim {
            return Err(Error::shape(format!(
                "vector length {len} does not match head_dim {}",
                self.head_dim
            )));
        }
        Ok(())
    }
}

/// theta_i = base^(-2(i-1)/d) for i = 1..d/2; theta_1 = 1, strictly
/// decreasing.
pub fn base_frequencies(d: usize, base: f64) -> Result<Vec<f64>> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::shape(format!("head_dim {d} must be even and >= 2")));
    }
    if base.is_nan() || base <= 1.0 {
        return Err(Error::shape(format!("frequency base {base} must exceed 1")));
    }
    Ok((1..=d / 2)
        .map(|i| base.powf(-2.0 * (i - 1) as f64 / d as f64))
        .collect())
}

/// Builds the pair-to-component assignment for a variant at head dim d.
///
/// d must be divisible by 8 so every split lands on whole pairs; c2rope
/// additionally needs d >= 16 so its spatial block holds at least one x
/// and one y pair.
pub fn make_allocation(variant: Variant, d: usize) -> Result<FrequencyAllocation> {
    if d == 0 || !d.is_multiple_of(8) {
        return Err(Error::config(format!(
            "head_dim {d} must be a positive multiple of 8"
        )));
    }
    if variant == Variant::C2Rope && d < 16 {
        return Err(Error::config(format!(
            "c2rope needs head_dim >= 16 (got {d}): the spatial block must hold an x and a y pair"
        )));
    }
    let thetas = base_frequencies(d, DEFAULT_BASE)?;
    let n_pairs = d / 2;
    // Number of leading pairs assigned to m; the rest alternate x, y.
    // MRopeLike instead puts m on the *trailing* pairs.
    let components: Vec<Component> = match variant {
        Variant::Vanilla => vec![Component::M; n_pairs],
        Variant::C2Rope => split_m_then_xy(n_pairs, 3 * d / 8),
        Variant::VideoRopeLike => split_m_then_xy(n_pairs, d / 4),
        Variant::MRopeLike => {
            let spatial = 3 * d / 8;
            let mut c = split_m_then_xy(spatial, 0);
            c.extend(std::iter::repeat_n(Component::M, n_pairs - spatial));
            c
        }
    };
    let pairs = components.into_iter().zip(thetas).collect();
    Ok(FrequencyAllocation {
        head_dim: d,
        variant,
        pairs,
    })
}

fn split_m_then_xy(n_pairs: usize, m_pairs: usize) -> Vec<Component> {
    (0..n_pairs)
        .map(|p| {
            if p < m_pairs {
                Component::M
            } else if (p - m_pairs).is_multiple_of(2) {
                Component::X
            } else {
                Component::Y
            }
        })
        .collect()
}

/// Rotates each pair (components 2i-1, 2i) of `vec` by theta_i times the
/// triplet component the pair is allocated to. Norm-preserving.
pub fn apply_rotary(
    vec: &[f64],
    idx: TripletIndex,
    alloc: &FrequencyAllocation,
) -> Result<Vec<f64>> {
    alloc.check_len(vec.len())?;
    let mut out = Vec::with_capacity(vec.len());
    for (pair, (comp, theta)) in alloc.pairs().iter().enumerate() {
        let angle = theta * comp.pick(idx) as f64;
        let (sin, cos) = angle.sin_cos();
        let a = vec[2 * pair];
        let b = vec[2 * pair + 1];
        out.push(a * cos - b * sin);
        out.push(a * sin + b * cos);
    }
    Ok(out)
}

/// Attention score with both sides rotated at their own indices:
/// dot(rotate(q, idx_q), rotate(k, idx_k)). Depends only on idx_q - idx_k
/// (see [`offset_score`]).
pub fn relative_score(
    q: &[f64],
    k: &[f64],
    idx_q: TripletIndex,
    idx_k: TripletIndex,
    alloc: &FrequencyAllocation,
) -> Result<f64> {
    let rq = apply_rotary(q, idx_q, alloc)?;
    let rk = apply_rotary(k, idx_k, alloc)?;
    Ok(numkit::dot(&rq, &rk))
}

/// The single-rotation form of the same score: q rotated by the index
/// difference, dotted with an unrotated k. Equal to [`relative_score`] at
/// delta = idx_q - idx_k (rotation composition).
pub fn offset_score(
    q: &[f64],
    k: &[f64],
    delta: TripletIndex,
    alloc: &FrequencyAllocation,
) -> Result<f64> {
    alloc.check_len(k.len())?;
    let rq = apply_rotary(q, delta, alloc)?;
    Ok(numkit::dot(&rq, k))
}

/// Adjoint of [`apply_rotary`] at the same index: rotation by the negated
/// index, so <rotate(u), v> = <u, rotary_adjoint(v)>.
pub fn rotary_adjoint(
    cotangent: &[f64],
    idx: TripletIndex,
    alloc: &FrequencyAllocation,
) -> Result<Vec<f64>> {
    apply_rotary(cotangent, -idx, alloc)
}
