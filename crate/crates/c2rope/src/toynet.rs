//! A small randomly-initialized decoder-only transformer with pluggable
//! positional encoding and mask. It exists to exercise indices, rotations
//! and masks end-to-end: weights are seeded Gaussians, there is no
//! training.
//!
//! Block topology (plumbing, not contractual): pre-norm residual blocks
//! with RMS-normalized inputs, multi-head attention whose Q/K are rotated
//! per head by the sequence's triplet indices, a ReLU MLP at 4x width,
//! and an RMS-normalized linear output head. Scores are scaled by
//! 1/sqrt(head_dim); attention rows are captured post-softmax.

use crate::maskgen::{build_mask, MaskKind};
use crate::numkit::{masked_softmax_rows, Matrix, SeededRng};
use crate::posindex::{triplet_indices, MultiViewLayout, TripletIndex};
use crate::rotary::{apply_rotary, make_allocation, FrequencyAllocation, Variant};
use crate::{Error, Result};

/// Hyperparameters plus the positional scheme under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub vocab: usize,
    pub seed: u64,
    pub encoding: Variant,
    pub mask_kind: MaskKind,
}

impl ModelConfig {
    pub fn model_dim(&self) -> usize {
        self.heads * self.head_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.vocab == 0 {
            return Err(Error::config(
                "layers, heads and vocab must all be at least 1",
            ));
        }
        make_allocation(self.encoding, self.head_dim).map(|_| ())
    }
}

/// Input sequence: per-view image embeddings (width = model_dim) followed
/// by text token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    layout: MultiViewLayout,
    image_embeddings: Vec<Vec<f64>>,
    text_ids: Vec<usize>,
}

impl TokenSequence {
    pub fn new(
        layout: MultiViewLayout,
        image_embeddings: Vec<Vec<f64>>,
        text_ids: Vec<usize>,
    ) -> Result<TokenSequence> {
        if image_embeddings.len() != layout.image_len() {
            return Err(Error::shape(format!(
                "{} image embeddings for a layout of {} image tokens",
                image_embeddings.len(),
                layout.image_len()
            )));
        }
        if text_ids.len() != layout.text_len() {
            return Err(Error::shape(format!(
                "{} text ids for a layout of {} text tokens",
                text_ids.len(),
                layout.text_len()
            )));
        }
        if let Some(w) = image_embeddings.first().map(Vec::len) {
            if image_embeddings.iter().any(|e| e.len() != w) {
                return Err(Error::shape("ragged image embeddings"));
            }
        }
        Ok(TokenSequence {
            layout,
            image_embeddings,
            text_ids,
        })
    }

    /// Seeded stand-in inputs: Gaussian image embeddings and uniform text
    /// ids, on RNG streams independent of the model weights.
    pub fn synthetic(
        layout: MultiViewLayout,
        model_dim: usize,
        vocab: usize,
        seed: u64,
    ) -> Result<TokenSequence> {
        if vocab == 0 {
            return Err(Error::config("vocab must be at least 1"));
        }
        let root = SeededRng::new(seed);
        let mut emb_rng = root.stream(STREAM_IMAGE_EMBED);
        let image_embeddings = (0..layout.image_len())
            .map(|_| emb_rng.gaussian(model_dim))
            .collect();
        let mut id_rng = root.stream(STREAM_TEXT_IDS);
        let text_ids = (0..layout.text_len())
            .map(|_| id_rng.next_below(vocab))
            .collect();
        TokenSequence::new(layout, image_embeddings, text_ids)
    }

    pub fn layout(&self) -> &MultiViewLayout {
        &self.layout
    }

    pub fn image_embeddings(&self) -> &[Vec<f64>] {
        &self.image_embeddings
    }

    pub fn text_ids(&self) -> &[usize] {
        &self.text_ids
    }
}

/// Post-softmax attention matrices for every (layer, head).
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    layers: usize,
    heads: usize,
    mats: Vec<Matrix>, // layer-major, then head
}

impl AttentionTrace {
    /// Assembles a trace from raw matrices (test/diagnostic use).
    #[cfg(test)]
    pub(crate) fn from_mats(layers: usize, heads: usize, mats: Vec<Matrix>) -> AttentionTrace {
        debug_assert_eq!(mats.len(), layers * heads);
        AttentionTrace {
            layers,
            heads,
            mats,
        }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn seq_len(&self) -> usize {
        self.mats[0].rows()
    }

    pub fn get(&self, layer: usize, head: usize) -> &Matrix {
        &self.mats[layer * self.heads + head]
    }

    /// All matrices in (layer, head) order.
    pub fn mats(&self) -> &[Matrix] {
        &self.mats
    }
}

// Weight-init and input RNG streams, all derived from one seed.
const STREAM_EMBED_TABLE: u64 = 10;
const STREAM_IMAGE_EMBED: u64 = 11;
const STREAM_TEXT_IDS: u64 = 12;
const STREAM_OUT_HEAD: u64 = 90;
const STREAM_BLOCK_BASE: u64 = 100;

pub struct Block {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub w_up: Matrix,
    pub w_down: Matrix,
}

/// The assembled model; immutable after construction, so one instance can
/// serve concurrent forward/generate calls.
pub struct Model {
    pub cfg: ModelConfig,
    pub alloc: FrequencyAllocation,
    pub embed: Matrix, // vocab x model_dim
    pub blocks: Vec<Block>,
    pub w_out: Matrix, // model_dim x vocab
}

fn gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = rng
        .gaussian(rows * cols)
        .iter()
        .map(|v| v * scale)
        .collect();
    Matrix::from_vec(rows, cols, data).expect("generated data matches shape")
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Model> {
        cfg.validate()?;
        let alloc = make_allocation(cfg.encoding, cfg.head_dim)?;
        let d = cfg.model_dim();
        let root = SeededRng::new(cfg.seed);
        let embed = gaussian_matrix(&mut root.stream(STREAM_EMBED_TABLE), cfg.vocab, d, 1.0);
        let w_out = gaussian_matrix(
            &mut root.stream(STREAM_OUT_HEAD),
            d,
            cfg.vocab,
            1.0 / (d as f64).sqrt(),
        );
        let blocks = (0..cfg.layers)
            .map(|l| {
                let base = STREAM_BLOCK_BASE + 8 * l as u64;
                let scale = 1.0 / (d as f64).sqrt();
                let mat = |off: u64, rows: usize, cols: usize, s: f64| {
                    gaussian_matrix(&mut root.stream(base + off), rows, cols, s)
                };
                Block {
                    wq: mat(0, d, d, scale),
                    wk: mat(1, d, d, scale),
                    wv: mat(2, d, d, scale),
                    wo: mat(3, d, d, scale),
                    w_up: mat(4, d, 4 * d, scale),
                    w_down: mat(5, 4 * d, d, 1.0 / (4.0 * d as f64).sqrt()),
                }
            })
            .collect();
        Ok(Model {
            cfg,
            alloc,
            embed,
            blocks,
            w_out,
        })
    }

    /// Standard forward pass: triplet indices derived from the layout.
    pub fn forward(&self, seq: &TokenSequence) -> Result<(Matrix, AttentionTrace)> {
        let triplets = triplet_indices(seq.layout());
        self.forward_core(seq, Some(&triplets))
    }

    /// Forward pass with caller-supplied triplet indices (one per token).
    pub fn forward_with_triplets(
        &self,
        seq: &TokenSequence,
        triplets: &[TripletIndex],
    ) -> Result<(Matrix, AttentionTrace)> {
        self.forward_core(seq, Some(triplets))
    }

    /// Forward pass with rotation bypassed entirely (no positional
    /// information reaches the attention scores).
    pub fn forward_unrotated(&self, seq: &TokenSequence) -> Result<(Matrix, AttentionTrace)> {
        self.forward_core(seq, None)
    }

    fn embed_sequence(&self, seq: &TokenSequence) -> Result<Matrix> {
        let n = seq.layout().len();
        let d = self.cfg.model_dim();
        let mut x = Matrix::zeros(n, d);
        for (p, emb) in seq.image_embeddings().iter().enumerate() {
            if emb.len() != d {
                return Err(Error::shape(format!(
                    "image embedding width {} does not match model_dim {d}",
                    emb.len()
                )));
            }
            x.row_mut(p).copy_from_slice(emb);
        }
        let v = seq.layout().image_len();
        for (t, &id) in seq.text_ids().iter().enumerate() {
            if id >= self.cfg.vocab {
                return Err(Error::input(format!(
                    "text id {id} outside vocab of {}",
                    self.cfg.vocab
                )));
            }
            x.row_mut(v + t).copy_from_slice(self.embed.row(id));
        }
        Ok(x)
    }

    fn forward_core(
        &self,
        seq: &TokenSequence,
        triplets: Option<&[TripletIndex]>,
    ) -> Result<(Matrix, AttentionTrace)> {
        let n = seq.layout().len();
        if let Some(t) = triplets {
            if t.len() != n {
                return Err(Error::shape(format!(
                    "{} triplet indices for {n} tokens",
                    t.len()
                )));
            }
        }
        let mask = build_mask(seq.layout(), self.cfg.mask_kind)?;
        let mut x = self.embed_sequence(seq)?;
        let hd = self.cfg.head_dim;
        let inv_sqrt_d = 1.0 / (hd as f64).sqrt();
        let mut mats = Vec::with_capacity(self.cfg.layers * self.cfg.heads);

        for block in &self.blocks {
            let xn = rms_norm_rows(&x);
            let q = xn.matmul(&block.wq)?;
            let k = xn.matmul(&block.wk)?;
            let val = xn.matmul(&block.wv)?;
            let mut attn = Matrix::zeros(n, self.cfg.model_dim());
            for h in 0..self.cfg.heads {
                let lo = h * hd;
                let rq = rotate_head_rows(&q, lo, hd, triplets, &self.alloc)?;
                let rk = rotate_head_rows(&k, lo, hd, triplets, &self.alloc)?;
                let mut scores = Matrix::zeros(n, n);
                for (i, rqi) in rq.iter().enumerate() {
                    for (j, rkj) in rk.iter().enumerate() {
                        if mask.visible(i, j) {
                            scores.set(i, j, crate::numkit::dot(rqi, rkj) * inv_sqrt_d);
                        }
                    }
                }
                let a = masked_softmax_rows(&scores, &mask)?;
                for i in 0..n {
                    for j in 0..n {
                        let w = a.get(i, j);
                        if w != 0.0 {
                            let vrow = &val.row(j)[lo..lo + hd];
                            let out = &mut attn.row_mut(i)[lo..lo + hd];
                            for (o, vv) in out.iter_mut().zip(vrow) {
                                *o += w * vv;
                            }
                        }
                    }
                }
                mats.push(a);
            }
            add_assign(&mut x, &attn.matmul(&block.wo)?);
            let hn = rms_norm_rows(&x);
            let mut up = hn.matmul(&block.w_up)?;
            for v in 0..up.rows() {
                for u in up.row_mut(v) {
                    *u = u.max(0.0);
                }
            }
            add_assign(&mut x, &up.matmul(&block.w_down)?);
        }

        let logits = rms_norm_rows(&x).matmul(&self.w_out)?;
        let trace = AttentionTrace {
            layers: self.cfg.layers,
            heads: self.cfg.heads,
            mats,
        };
        Ok((logits, trace))
    }

    /// Greedy autoregressive decoding. Each generated token is appended as
    /// a text token (triplet (m, m, m) continuing the sequence) and the
    /// trace captured after the append, so step s's trace covers
    /// v + t + s keys.
    pub fn generate(
        &self,
        seq: &TokenSequence,
        steps: usize,
    ) -> Result<(Vec<usize>, Vec<AttentionTrace>)> {
        if steps == 0 {
            return Err(Error::input("generation needs at least 1 step"));
        }
        let layout = *seq.layout();
        let mut text_ids = seq.text_ids().to_vec();
        let (logits, _) = self.forward(seq)?;
        let mut next = argmax_lowest(logits.row(layout.len() - 1));

        let mut out_ids = Vec::with_capacity(steps);
        let mut traces = Vec::with_capacity(steps);
        for step in 1..=steps {
            out_ids.push(next);
            text_ids.push(next);
            let grown = MultiViewLayout::new(layout.grid(), layout.views(), text_ids.len())?;
            let cur = TokenSequence::new(grown, seq.image_embeddings().to_vec(), text_ids.clone())?;
            let (logits, trace) = self.forward(&cur)?;
            if step < steps {
                next = argmax_lowest(logits.row(grown.len() - 1));
            }
            traces.push(trace);
        }
        Ok((out_ids, traces))
    }
}

/// One forward pass under a freshly built model.
pub fn forward(cfg: &ModelConfig, seq: &TokenSequence) -> Result<(Matrix, AttentionTrace)> {
    Model::new(cfg.clone())?.forward(seq)
}

/// Greedy generation under a freshly built model.
pub fn generate(
    cfg: &ModelConfig,
    seq: &TokenSequence,
    steps: usize,
) -> Result<(Vec<usize>, Vec<AttentionTrace>)> {
    Model::new(cfg.clone())?.generate(seq, steps)
}

/// Rotates the `hd`-wide head slice of every row by that row's triplet.
fn rotate_head_rows(
    m: &Matrix,
    lo: usize,
    hd: usize,
    triplets: Option<&[TripletIndex]>,
    alloc: &FrequencyAllocation,
) -> Result<Vec<Vec<f64>>> {
    (0..m.rows())
        .map(|i| {
            let slice = &m.row(i)[lo..lo + hd];
            match triplets {
                Some(t) => apply_rotary(slice, t[i], alloc),
                None => Ok(slice.to_vec()),
            }
        })
        .collect()
}

/// Row-wise RMS normalization (no learned scale).
fn rms_norm_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let ms = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
        let inv = 1.0 / (ms + 1e-8).sqrt();
        for v in row {
            *v *= inv;
        }
    }
    out
}

fn add_assign(a: &mut Matrix, b: &Matrix) {
    debug_assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    for i in 0..a.rows() {
        for (x, y) in a.row_mut(i).iter_mut().zip(b.row(i)) {
            *x += y;
        }
    }
}

/// Index of the largest value, ties broken toward the lowest index.
fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
