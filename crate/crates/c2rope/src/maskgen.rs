//! Attention-mask construction: plain causal, per-view Chebyshev-ring
//! causal over image tokens, and the combined multimodal mask.
//!
//! The Chebyshev rule orders each view's image tokens by their ring
//! (distance max(|x|, |y|) from the grid center): a query sees every key
//! on its own or an inner ring, i.e. attention points inward toward the
//! origin. Whole earlier views stay fully visible, image tokens never see
//! text, and text tokens see all images plus causally-preceding text.

use std::fmt;
use std::str::FromStr;

use crate::posindex::{cartesian_coords, chebyshev_ring, MultiViewLayout, TokenPosition};
use crate::{Error, Result};

/// Masks are materialized as dense n*n booleans; cap n to keep that sane.
pub const MAX_MASK_TOKENS: usize = 4096;

/// Query-by-key visibility matrix (row = query, column = key).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    n: usize,
    visible: Vec<bool>,
}

impl AttentionMask {
    /// Wraps a raw row-major visibility matrix. Only the shape is
    /// validated; generator functions guarantee the structural invariants
    /// (nonempty rows, visible diagonal).
    pub fn from_visible(n: usize, visible: Vec<bool>) -> Result<AttentionMask> {
        if visible.len() != n * n {
            return Err(Error::shape(format!(
                "mask data length {} does not match {n}x{n}",
                visible.len()
            )));
        }
        Ok(AttentionMask { n, visible })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn visible(&self, query: usize, key: usize) -> bool {
        self.visible[query * self.n + key]
    }

    pub fn row(&self, query: usize) -> &[bool] {
        &self.visible[query * self.n..(query + 1) * self.n]
    }

    pub fn count_visible(&self) -> usize {
        self.visible.iter().filter(|v| **v).count()
    }
}

/// Mask flavor selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Causal,
    Chebyshev,
}

impl MaskKind {
    pub const ALL: [MaskKind; 2] = [MaskKind::Causal, MaskKind::Chebyshev];

    pub fn name(&self) -> &'static str {
        match self {
            MaskKind::Causal => "causal",
            MaskKind::Chebyshev => "chebyshev",
        }
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<MaskKind> {
        match s {
            "causal" => Ok(MaskKind::Causal),
            "chebyshev" => Ok(MaskKind::Chebyshev),
            other => Err(Error::config(format!(
                "unknown mask kind {other:?} (expected causal or chebyshev)"
            ))),
        }
    }
}

/// Lower-triangular mask: query i sees keys 0..=i.
pub fn causal_mask(n: usize) -> AttentionMask {
    let mut visible = vec![false; n * n];
    for i in 0..n {
        visible[i * n..i * n + i + 1].fill(true);
    }
    AttentionMask { n, visible }
}

/// Chebyshev causal mask over a multiview layout; see the module docs for
/// the visibility rules.
pub fn chebyshev_causal_mask(layout: &MultiViewLayout) -> Result<AttentionMask> {
    let n = checked_len(layout)?;
    // Per position: Some((view, ring)) for image tokens, None for text.
    let rings: Vec<i64> = cartesian_coords(layout.grid())
        .iter()
        .map(|&(x, y)| chebyshev_ring(x, y))
        .collect();
    let info: Vec<Option<(usize, i64)>> = (0..n)
        .map(|p| match layout.position(p) {
            TokenPosition::Image { view, row, col } => {
                let cell = (row - 1) * layout.grid().cols() + (col - 1);
                Some((view, rings[cell]))
            }
            TokenPosition::Text { .. } => None,
        })
        .collect();

    let mut visible = vec![false; n * n];
    for q in 0..n {
        for k in 0..n {
            visible[q * n + k] = match (info[q], info[k]) {
                (Some((vq, rq)), Some((vk, rk))) => vk < vq || (vk == vq && rk <= rq),
                (Some(_), None) => false, // image never sees text
                (None, Some(_)) => true,  // text sees every image token
                (None, None) => k <= q,   // text block stays causal
            };
        }
    }
    Ok(AttentionMask { n, visible })
}

/// Dispatches on the mask kind; both kinds keep the text block causal.
pub fn build_mask(layout: &MultiViewLayout, kind: MaskKind) -> Result<AttentionMask> {
    match kind {
        MaskKind::Causal => Ok(causal_mask(checked_len(layout)?)),
        MaskKind::Chebyshev => chebyshev_causal_mask(layout),
    }
}

fn checked_len(layout: &MultiViewLayout) -> Result<usize> {
    let n = layout.len();
    if n > MAX_MASK_TOKENS {
        return Err(Error::input(format!(
            "sequence of {n} tokens exceeds the {MAX_MASK_TOKENS}-token mask limit"
        )));
    }
    Ok(n)
}
