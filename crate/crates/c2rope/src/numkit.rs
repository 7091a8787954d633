//! Minimal deterministic numeric kernel: dense row-major matrices, masked
//! row softmax, seeded Gaussian sampling, and a finite-difference checker
//! for linear-map/adjoint pairs.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::maskgen::AttentionMask;
use crate::{Error, Result};

/// Dense matrix of `f64` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from row-major data. The length must be
    /// `rows * cols` and every value finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::shape(format!("non-finite matrix entry {v}")));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Standard matrix product. Accumulates in i-k-j order so each pass
    /// streams a full output row.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = out.row_mut(i);
                for (o, r) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * r;
                }
            }
        }
        Ok(out)
    }
}

/// Row-wise softmax restricted to mask-visible entries.
///
/// Masked entries are excluded before the max subtraction and come out as
/// exact zeros. A row with no visible entry is an error.
pub fn masked_softmax_rows(logits: &Matrix, mask: &AttentionMask) -> Result<Matrix> {
    if logits.rows() != mask.len() || logits.cols() != mask.len() {
        return Err(Error::shape(format!(
            "softmax logits {}x{} vs mask {n}x{n}",
            logits.rows(),
            logits.cols(),
            n = mask.len()
        )));
    }
    let n = mask.len();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for j in 0..n {
            if mask.visible(i, j) {
                max = max.max(logits.get(i, j));
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateRow { row: i });
        }
        let mut denom = 0.0;
        for j in 0..n {
            if mask.visible(i, j) {
                let e = (logits.get(i, j) - max).exp();
                out.set(i, j, e);
                denom += e;
            }
        }
        for j in 0..n {
            if mask.visible(i, j) {
                out.set(i, j, out.get(i, j) / denom);
            }
        }
    }
    Ok(out)
}

/// Deterministic seeded generator with explicit sub-streams.
///
/// Streams derived from the same root seed are independent, and the sample
/// sequence inside one stream is fixed by `(seed, stream)` alone, so
/// parallel Monte-Carlo shards reproduce regardless of scheduling.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    rng: ChaCha8Rng,
    spare_gaussian: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> SeededRng {
        SeededRng::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> SeededRng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        SeededRng {
            seed,
            rng,
            spare_gaussian: None,
        }
    }

    /// Derives an independent sub-stream of the root seed.
    pub fn stream(&self, id: u64) -> SeededRng {
        SeededRng::with_stream(self.seed, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`.
    pub fn next_below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        (self.next_f64() * bound as f64) as usize % bound
    }

    /// One standard-normal sample (Box-Muller, with the spare cached).
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(v) = self.spare_gaussian.take() {
            return v;
        }
        let u1 = self.next_f64().max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_gaussian = Some(r * theta.sin());
        r * theta.cos()
    }

    /// `n` standard-normal samples.
    pub fn gaussian(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_gaussian()).collect()
    }
}

/// Outcome of [`finite_diff_check`]; carries the worst deviation seen.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub passed: bool,
    pub max_deviation: f64,
    pub tol: f64,
}

/// Verifies that `adjoint` is the transpose of the linear map `f`.
///
/// Two routes are compared: the inner-product identity
/// `<f(u), v> = <u, adjoint(v)>` on random vectors, and the
/// central-difference Jacobian of `f` against the matrix assembled from
/// `adjoint` on basis vectors.
pub fn finite_diff_check(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    adjoint: &dyn Fn(&[f64]) -> Vec<f64>,
    dim: usize,
    tol: f64,
) -> GradCheckReport {
    let mut rng = SeededRng::new(0x5eed_c0de).stream(dim as u64);
    let mut max_dev: f64 = 0.0;

    for _ in 0..4 {
        let u = rng.gaussian(dim);
        let v = rng.gaussian(dim);
        let lhs = dot(&f(&u), &v);
        let rhs = dot(&u, &adjoint(&v));
        max_dev = max_dev.max((lhs - rhs).abs());
    }

    // J[i][j] = d f_i / d u_j by central differences at a random point.
    let x0 = rng.gaussian(dim);
    let h = 1e-4;
    let mut jac = vec![vec![0.0; dim]; dim];
    for j in 0..dim {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[j] += h;
        xm[j] -= h;
        let fp = f(&xp);
        let fm = f(&xm);
        for i in 0..dim {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    // adjoint(e_j) must reproduce row j of the Jacobian.
    for j in 0..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        let a = adjoint(&e);
        for i in 0..dim {
            max_dev = max_dev.max((a[i] - jac[j][i]).abs());
        }
    }

    GradCheckReport {
        passed: max_dev <= tol,
        max_deviation: max_dev,
        tol,
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskgen::{causal_mask, AttentionMask};

    fn full_mask(n: usize) -> AttentionMask {
        AttentionMask::from_visible(n, vec![true; n * n]).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let out = Matrix::identity(2).matmul(&m).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn matmul_hand_checked() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let out = a.matmul(&b).unwrap();
        assert_eq!(out.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::Shape(_))));
    }

    // Naive j-indexed oracle, independent of the i-k-j implementation order.
    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = SeededRng::new(7);
        for (r, k, c) in [(8, 8, 8), (1, 5, 3), (16, 16, 16), (4, 16, 2)] {
            let a = Matrix::from_vec(r, k, rng.gaussian(r * k)).unwrap();
            let b = Matrix::from_vec(k, c, rng.gaussian(k * c)).unwrap();
            let fast = a.matmul(&b).unwrap();
            let slow = matmul_oracle(&a, &b);
            for (x, y) in fast.data().iter().zip(slow.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_uniform_row() {
        let logits = Matrix::from_vec(4, 4, vec![1.0; 16]).unwrap();
        let out = masked_softmax_rows(&logits, &full_mask(4)).unwrap();
        for v in out.data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_single_visible() {
        let logits = Matrix::from_vec(2, 2, vec![5.0, 5.0, 5.0, 5.0]).unwrap();
        let mask = AttentionMask::from_visible(2, vec![true, false, true, true]).unwrap();
        let out = masked_softmax_rows(&logits, &mask).unwrap();
        assert_eq!(out.get(0, 0), 1.0);
        assert_eq!(out.get(0, 1), 0.0);
    }

    #[test]
    fn softmax_direct_evaluation() {
        // softmax([0, ln 3]) = [1/4, 3/4]
        let logits = Matrix::from_vec(2, 2, vec![0.0, 3.0_f64.ln(), 0.0, 0.0]).unwrap();
        let out = masked_softmax_rows(&logits, &full_mask(2)).unwrap();
        assert!((out.get(0, 0) - 0.25).abs() < 1e-12);
        assert!((out.get(0, 1) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = SeededRng::new(3);
        let n = 9;
        let logits = Matrix::from_vec(n, n, rng.gaussian(n * n)).unwrap();
        let mask = causal_mask(n);
        let out = masked_softmax_rows(&logits, &mask).unwrap();
        for i in 0..n {
            let sum: f64 = out.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            for j in 0..n {
                if !mask.visible(i, j) {
                    assert_eq!(out.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut rng = SeededRng::new(11);
        let n = 6;
        let base = rng.gaussian(n * n);
        let mask = causal_mask(n);
        let out1 =
            masked_softmax_rows(&Matrix::from_vec(n, n, base.clone()).unwrap(), &mask).unwrap();
        let mut shifted = base;
        for (idx, v) in shifted.iter_mut().enumerate() {
            if mask.visible(idx / n, idx % n) {
                *v += 37.5;
            }
        }
        let out2 = masked_softmax_rows(&Matrix::from_vec(n, n, shifted).unwrap(), &mask).unwrap();
        for (a, b) in out1.data().iter().zip(out2.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_fully_masked_row_errors() {
        let logits = Matrix::zeros(2, 2);
        let mask = AttentionMask::from_visible(2, vec![true, true, false, false]).unwrap();
        assert!(matches!(
            masked_softmax_rows(&logits, &mask),
            Err(Error::DegenerateRow { row: 1 })
        ));
    }

    #[test]
    fn gaussian_deterministic_per_seed() {
        let a = SeededRng::new(42).gaussian(4);
        let b = SeededRng::new(42).gaussian(4);
        assert_eq!(a, b);
        let c = SeededRng::new(43).gaussian(4);
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_streams_are_distinct() {
        let root = SeededRng::new(42);
        let a = root.stream(1).gaussian(8);
        let b = root.stream(2).gaussian(8);
        assert_ne!(a, b);
        assert_eq!(a, root.stream(1).gaussian(8));
    }

    #[test]
    fn gaussian_moments() {
        let samples = SeededRng::new(42).gaussian(100_000);
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn finite_diff_identity_passes() {
        let id = |v: &[f64]| v.to_vec();
        let report = finite_diff_check(&id, &id, 5, 1e-12);
        assert!(report.passed, "max dev {}", report.max_deviation);
    }

    #[test]
    fn finite_diff_mismatched_adjoint_fails() {
        let f = |v: &[f64]| v.iter().map(|x| 2.0 * x).collect::<Vec<_>>();
        let a = |v: &[f64]| v.iter().map(|x| 3.0 * x).collect::<Vec<_>>();
        let report = finite_diff_check(&f, &a, 5, 1e-8);
        assert!(!report.passed);
        assert!(report.max_deviation > 0.5);
    }
}
