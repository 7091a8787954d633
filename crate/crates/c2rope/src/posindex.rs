//! Positional indexing for multimodal token sequences: raster-scan order,
//! centered Cartesian coordinates, the (m, x, y) triplet index, and the
//! Chebyshev ring of a coordinate.
//!
//! Conventions: grid rows/cols and the temporal index m are 1-based; the
//! origin sits at the grid center with x growing rightward and y growing
//! upward. On even-sized grids the two central columns (rows) share
//! coordinate 0 so corners land on symmetric +/- values.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Hard cap on tokens per view and per sequence; keeps index arithmetic
/// well inside i64 and allocation sizes sane for untrusted inputs.
pub const MAX_TOKENS: usize = 1 << 24;

/// Rows x cols of image tokens in a single view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    rows: usize,
    cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Result<GridShape> {
        if rows == 0 || cols == 0 {
            return Err(Error::input("grid dimensions must be at least 1x1"));
        }
        match rows.checked_mul(cols) {
            Some(n) if n <= MAX_TOKENS => Ok(GridShape { rows, cols }),
            _ => Err(Error::input(format!(
                "grid {rows}x{cols} exceeds {MAX_TOKENS} tokens"
            ))),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects zero-sized grids
    }

    /// Raster-scan index of the cell at 1-based (row, col): (row-1)*cols + col.
    pub fn raster_m(&self, row: usize, col: usize) -> i64 {
        debug_assert!((1..=self.rows).contains(&row) && (1..=self.cols).contains(&col));
        ((row - 1) * self.cols + col) as i64
    }

    /// Signed x coordinate of a 1-based column, centered on the grid.
    pub fn x_coord(&self, col: usize) -> i64 {
        centered_coord(col, self.cols)
    }

    /// Signed y coordinate of a 1-based row; row 1 is the top (largest y).
    pub fn y_coord(&self, row: usize) -> i64 {
        -centered_coord(row, self.rows)
    }
}

/// Centered 1D coordinate: negative in the first half, positive in the
/// second. Even extents give the two central cells coordinate 0; odd
/// extents center on the single middle cell.
fn centered_coord(pos: usize, extent: usize) -> i64 {
    let (pos, extent) = (pos as i64, extent as i64);
    if extent % 2 == 0 {
        let half = extent / 2;
        if pos <= half {
            pos - half
        } else {
            pos - half - 1
        }
    } else {
        pos - (extent + 1) / 2
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for GridShape {
    type Err = Error;

    /// Parses "ROWSxCOLS", e.g. "4x4" or "16X9".
    fn from_str(s: &str) -> Result<GridShape> {
        let s = s.trim();
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::input(format!("grid {s:?} is not of the form ROWSxCOLS")))?;
        let rows: usize = r
            .parse()
            .map_err(|_| Error::input(format!("bad grid rows {r:?}")))?;
        let cols: usize = c
            .parse()
            .map_err(|_| Error::input(format!("bad grid cols {c:?}")))?;
        GridShape::new(rows, cols)
    }
}

/// Sequence geometry: `views` copies of `grid` image tokens followed by
/// `text_len` text tokens. `views` may be 0 for a text-only sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiViewLayout {
    grid: GridShape,
    views: usize,
    text_len: usize,
}

/// What occupies one sequence position. All fields 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenPosition {
    Image { view: usize, row: usize, col: usize },
    Text { ordinal: usize },
}

impl MultiViewLayout {
    pub fn new(grid: GridShape, views: usize, text_len: usize) -> Result<MultiViewLayout> {
        let image = views
            .checked_mul(grid.len())
            .filter(|v| *v <= MAX_TOKENS)
            .ok_or_else(|| Error::input("too many image tokens"))?;
        let total = image
            .checked_add(text_len)
            .filter(|t| *t <= MAX_TOKENS)
            .ok_or_else(|| Error::input("sequence too long"))?;
        if total == 0 {
            return Err(Error::input("layout has no tokens"));
        }
        Ok(MultiViewLayout {
            grid,
            views,
            text_len,
        })
    }

    pub fn grid(&self) -> GridShape {
        self.grid
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn text_len(&self) -> usize {
        self.text_len
    }

    /// Number of image tokens v = views * rows * cols.
    pub fn image_len(&self) -> usize {
        self.views * self.grid.len()
    }

    /// Total sequence length v + text_len.
    pub fn len(&self) -> usize {
        self.image_len() + self.text_len
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty layouts
    }

    /// Classifies the 0-based sequence position `p`.
    pub fn position(&self, p: usize) -> TokenPosition {
        debug_assert!(p < self.len());
        let per_view = self.grid.len();
        let v = self.image_len();
        if p < v {
            TokenPosition::Image {
                view: p / per_view + 1,
                row: (p % per_view) / self.grid.cols + 1,
                col: (p % per_view) % self.grid.cols + 1,
            }
        } else {
            TokenPosition::Text { ordinal: p - v + 1 }
        }
    }
}

/// The hybrid positional index of one token: raster/temporal order m plus
/// centered spatial coordinates (x, y). Text tokens carry (m, m, m).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripletIndex {
    pub m: i64,
    pub x: i64,
    pub y: i64,
}

impl TripletIndex {
    pub fn new(m: i64, x: i64, y: i64) -> TripletIndex {
        TripletIndex { m, x, y }
    }

    /// Text-token index: every component equals the temporal position.
    pub fn text(m: i64) -> TripletIndex {
        TripletIndex { m, x: m, y: m }
    }

    pub const ZERO: TripletIndex = TripletIndex { m: 0, x: 0, y: 0 };
}

impl std::ops::Sub for TripletIndex {
    type Output = TripletIndex;

    fn sub(self, rhs: TripletIndex) -> TripletIndex {
        TripletIndex::new(self.m - rhs.m, self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Neg for TripletIndex {
    type Output = TripletIndex;

    fn neg(self) -> TripletIndex {
        TripletIndex::new(-self.m, -self.x, -self.y)
    }
}

/// Raster-scan m for every cell of the grid, row-major.
pub fn raster_index(grid: GridShape) -> Vec<i64> {
    let mut out = Vec::with_capacity(grid.len());
    for i in 1..=grid.rows() {
        for j in 1..=grid.cols() {
            out.push(grid.raster_m(i, j));
        }
    }
    out
}

/// Centered (x, y) for every cell of the grid, row-major.
pub fn cartesian_coords(grid: GridShape) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(grid.len());
    for i in 1..=grid.rows() {
        for j in 1..=grid.cols() {
            out.push((grid.x_coord(j), grid.y_coord(i)));
        }
    }
    out
}

/// Triplet index for every sequence position of the layout.
///
/// Image tokens: m continues the raster order globally across views
/// (view k covers m in ((k-1)*rows*cols, k*rows*cols]) while every view
/// repeats the same per-view (x, y). Text tokens: (m, m, m) with
/// m = v+1 ... v+t.
pub fn triplet_indices(layout: &MultiViewLayout) -> Vec<TripletIndex> {
    let grid = layout.grid();
    let coords = cartesian_coords(grid);
    let per_view = grid.len() as i64;
    let mut out = Vec::with_capacity(layout.len());
    for view in 0..layout.views() as i64 {
        for (cell, &(x, y)) in coords.iter().enumerate() {
            out.push(TripletIndex::new(view * per_view + cell as i64 + 1, x, y));
        }
    }
    let v = layout.image_len() as i64;
    for t in 1..=layout.text_len() as i64 {
        out.push(TripletIndex::text(v + t));
    }
    out
}

/// Chebyshev ring of a coordinate: max(|x|, |y|).
pub fn chebyshev_ring(x: i64, y: i64) -> i64 {
    x.abs().max(y.abs())
}
