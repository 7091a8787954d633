//! Positional-encoding mechanics for multimodal decoder attention.
//!
//! The crate builds the full chain needed to study how rotary position
//! embeddings treat image tokens inside a decoder-only transformer:
//!
//! * [`numkit`] — dense matrices, masked row softmax, a seeded RNG, and a
//!   finite-difference gradient checker.
//! * [`posindex`] — raster indices, centered Cartesian coordinates, and the
//!   triplet hybrid positional index `(m, x, y)` for multi-view image grids.
//! * [`rotary`] — frequency ladders, per-variant frequency allocation
//!   (vanilla / M-RoPE-like / VideoRoPE-like / c2rope), rotary application,
//!   relative scores, and the exact adjoint.
//! * [`maskgen`] — causal and Chebyshev-ring attention masks.
//! * [`toynet`] — a small randomly-initialized decoder with pluggable
//!   encoding and mask, attention-trace capture, and greedy generation.
//! * [`analysis`] — long-term decay curves, spatial decay maps, and
//!   image-to-instruction information-flow aggregation.
//! * [`config`] / [`export`] — the key=value run-config and CSV/PGM/SVG
//!   formats used by the CLI.

pub mod analysis;
pub mod config;
pub mod export;
pub mod maskgen;
pub mod numkit;
pub mod posindex;
pub mod rotary;
pub mod selfcheck;
pub mod toynet;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
