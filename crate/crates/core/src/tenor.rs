//! Ordering-injection reference for text-image attention.
//!
//! Plain dot-product attention treats its keys as a set: permuting text
//! tokens permutes keys and values together and the attended output does not
//! move. Injecting absolute sinusoidal position encodings re-binds each
//! token to its place in the sequence. Two injection sites are modeled:
//! keys only (`UnetK`, cross-attention) and both text queries and keys
//! (`MmditQk`, joint attention).
//!
//! Nothing here trains. Projections are fixed seeded matrices; the point is
//! to measure the order-sensitivity properties, not to learn them.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, TenorError> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TenorError::RaggedRows);
        }
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            data.extend(r);
        }
        Ok(Self { rows: n, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Take the first `n` rows.
    pub fn top_rows(&self, n: usize) -> Matrix {
        assert!(n <= self.rows);
        Matrix {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, TenorError> {
        if self.cols != other.rows {
            return Err(TenorError::DimensionMismatch {
                left: (self.rows, self.cols),
                right: (other.rows, other.cols),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute elementwise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    /// Frobenius norm of the elementwise difference.
    pub fn diff_norm(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let sq: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        libm::sqrt(sq)
    }

    /// Reorder rows so output row `i` is input row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Matrix {
        assert_eq!(perm.len(), self.rows);
        let mut out = Matrix::zeros(self.rows, self.cols);
        for (i, &src) in perm.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(src));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TenorError {
    OddDimension(usize),
    RaggedRows,
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    EmptySequence,
}

impl core::fmt::Display for TenorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TenorError::OddDimension(d) => {
                write!(f, "sinusoidal encoding needs an even dimension, got {d}")
            }
            TenorError::RaggedRows => write!(f, "rows have unequal lengths"),
            TenorError::DimensionMismatch { left, right } => {
                write!(f, "incompatible shapes {left:?} x {right:?}")
            }
            TenorError::EmptySequence => write!(f, "token sequence is empty"),
        }
    }
}

impl core::error::Error for TenorError {}

/// Absolute sinusoidal position encoding.
///
/// Entry `2i` is `sin(pos / 10000^(2i/dim))`, entry `2i+1` the matching
/// cosine.
pub fn sinusoidal_pe(position: usize, dim: usize) -> Result<Vec<f64>, TenorError> {
    if !dim.is_multiple_of(2) {
        return Err(TenorError::OddDimension(dim));
    }
    let mut pe = Vec::with_capacity(dim);
    for i in 0..dim / 2 {
        let exponent = (2 * i) as f64 / dim as f64;
        let angle = position as f64 / libm::pow(10000.0, exponent);
        pe.push(libm::sin(angle));
        pe.push(libm::cos(angle));
    }
    Ok(pe)
}

/// PE rows for positions `0..n`.
pub fn sinusoidal_pe_rows(n: usize, dim: usize) -> Result<Matrix, TenorError> {
    let rows: Result<Vec<Vec<f64>>, TenorError> = (0..n).map(|p| sinusoidal_pe(p, dim)).collect();
    Matrix::from_rows(rows?)
}

/// A text token sequence; positions are implicit `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub embeddings: Matrix,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same tokens in a different order (positions stay `0..len`).
    pub fn permuted(&self, perm: &[usize]) -> TokenSequence {
        TokenSequence {
            embeddings: self.embeddings.permute_rows(perm),
        }
    }
}

/// Where position encodings enter the attention inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMode {
    /// No injection: vanilla attention.
    None,
    /// Add PE to the text keys (cross-attention site).
    UnetK,
    /// Add PE to both text queries and text keys (joint attention site).
    MmditQk,
}

impl InjectionMode {
    pub const ALL: [InjectionMode; 3] =
        [InjectionMode::None, InjectionMode::UnetK, InjectionMode::MmditQk];

    pub const fn name(&self) -> &'static str {
        match self {
            InjectionMode::None => "none",
            InjectionMode::UnetK => "unet_k",
            InjectionMode::MmditQk => "mmdit_qk",
        }
    }
}

/// Fixed seeded projection matrices for the text stream.
#[derive(Debug, Clone)]
pub struct Projections {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

impl Projections {
    /// Deterministic projections, entries uniform in [-1, 1) scaled by
    /// `1/sqrt(model_dim)`.
    pub fn seeded(seed: u64, model_dim: usize, head_dim: usize) -> Self {
        let scale = 1.0 / libm::sqrt(model_dim as f64);
        let mut stream = Stream::new(seed);
        let mut make = || {
            let mut m = Matrix::zeros(model_dim, head_dim);
            for r in 0..model_dim {
                for c in 0..head_dim {
                    m.row_mut(r)[c] = stream.next_signed() * scale;
                }
            }
            m
        };
        let wq = make();
        let wk = make();
        let wv = make();
        Projections { wq, wk, wv }
    }
}

fn add_rows(m: &mut Matrix, pe: &Matrix) {
    debug_assert_eq!(m.rows(), pe.rows());
    debug_assert_eq!(m.cols(), pe.cols());
    for r in 0..m.rows() {
        for (slot, p) in m.row_mut(r).iter_mut().zip(pe.row(r)) {
            *slot += *p;
        }
    }
}

/// Row-wise softmax of `scores`, in place.
fn softmax_rows(scores: &mut Matrix) {
    for r in 0..scores.rows() {
        let row = scores.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Attention with position encodings injected per `mode`.
///
/// `image_queries` are pre-projected image-side queries (`m x head_dim`).
/// The text sequence projects to `Q_text`, `K_text`, `V` through `proj`;
/// the PE table adds to `K_text` (`UnetK`, `MmditQk`) and `Q_text`
/// (`MmditQk`) after projection. All queries — image rows first, then text
/// rows — attend over the text keys:
///
/// ```text
/// softmax(Q K_text^T / sqrt(d)) V
/// ```
///
/// The output has `m + len` rows; callers interested in the cross-attention
/// view take the first `m`.
pub fn attention_with_injection(
    image_queries: &Matrix,
    text: &TokenSequence,
    proj: &Projections,
    mode: InjectionMode,
) -> Result<Matrix, TenorError> {
    let pe = sinusoidal_pe_rows(text.len(), proj.wk.cols())?;
    attention_with_custom_pe(image_queries, text, proj, mode, &pe)
}

/// [`attention_with_injection`] with an explicit PE table (one row per
/// token). A zero table makes every mode collapse to `None` exactly.
pub fn attention_with_custom_pe(
    image_queries: &Matrix,
    text: &TokenSequence,
    proj: &Projections,
    mode: InjectionMode,
    pe: &Matrix,
) -> Result<Matrix, TenorError> {
    let (weights, values) = attention_parts(image_queries, text, proj, mode, pe)?;
    weights.matmul(&values)
}

/// Attention weights only, for the row-stochasticity check.
pub fn attention_weights(
    image_queries: &Matrix,
    text: &TokenSequence,
    proj: &Projections,
    mode: InjectionMode,
) -> Result<Matrix, TenorError> {
    let pe = sinusoidal_pe_rows(text.len(), proj.wk.cols())?;
    let (weights, _) = attention_parts(image_queries, text, proj, mode, &pe)?;
    Ok(weights)
}

fn attention_parts(
    image_queries: &Matrix,
    text: &TokenSequence,
    proj: &Projections,
    mode: InjectionMode,
    pe: &Matrix,
) -> Result<(Matrix, Matrix), TenorError> {
    if text.is_empty() {
        return Err(TenorError::EmptySequence);
    }
    let head_dim = proj.wk.cols();
    if image_queries.cols() != head_dim || pe.rows() != text.len() || pe.cols() != head_dim {
        return Err(TenorError::DimensionMismatch {
            left: (image_queries.rows(), image_queries.cols()),
            right: (pe.rows(), pe.cols()),
        });
    }

    let mut q_text = text.embeddings.matmul(&proj.wq)?;
    let mut k_text = text.embeddings.matmul(&proj.wk)?;
    let v_text = text.embeddings.matmul(&proj.wv)?;

    match mode {
        InjectionMode::None => {}
        InjectionMode::UnetK => add_rows(&mut k_text, pe),
        InjectionMode::MmditQk => {
            add_rows(&mut k_text, pe);
            add_rows(&mut q_text, pe);
        }
    }

    // Stack image queries over text queries; everything attends to the text.
    let mut queries = Matrix::zeros(image_queries.rows() + q_text.rows(), head_dim);
    for r in 0..image_queries.rows() {
        queries.row_mut(r).copy_from_slice(image_queries.row(r));
    }
    for r in 0..q_text.rows() {
        queries
            .row_mut(image_queries.rows() + r)
            .copy_from_slice(q_text.row(r));
    }

    let scale = 1.0 / libm::sqrt(head_dim as f64);
    let mut scores = Matrix::zeros(queries.rows(), k_text.rows());
    for i in 0..queries.rows() {
        for j in 0..k_text.rows() {
            let dot: f64 = queries
                .row(i)
                .iter()
                .zip(k_text.row(j))
                .map(|(a, b)| a * b)
                .sum();
            scores.row_mut(i)[j] = dot * scale;
        }
    }
    softmax_rows(&mut scores);
    Ok((scores, v_text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn fixture(tokens: usize, model_dim: usize, head_dim: usize) -> (Matrix, TokenSequence, Projections) {
        let mut stream = Stream::new(0xfeed);
        let mut rows = Vec::new();
        for _ in 0..3 {
            rows.push((0..head_dim).map(|_| stream.next_signed()).collect());
        }
        let image_queries = Matrix::from_rows(rows).unwrap();
        let mut trows = Vec::new();
        for _ in 0..tokens {
            trows.push((0..model_dim).map(|_| stream.next_signed()).collect());
        }
        let text = TokenSequence {
            embeddings: Matrix::from_rows(trows).unwrap(),
        };
        let proj = Projections::seeded(7, model_dim, head_dim);
        (image_queries, text, proj)
    }

    #[test]
    fn pe_position_zero_alternates_zero_one() {
        let pe = sinusoidal_pe(0, 8).unwrap();
        assert_eq!(pe, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn pe_position_one_dim_four() {
        let pe = sinusoidal_pe(1, 4).unwrap();
        assert_eq!(pe[0], libm::sin(1.0));
        assert_eq!(pe[1], libm::cos(1.0));
        assert_eq!(pe[2], libm::sin(0.01));
        assert_eq!(pe[3], libm::cos(0.01));
    }

    #[test]
    fn pe_rejects_odd_dimension() {
        assert_eq!(sinusoidal_pe(3, 7), Err(TenorError::OddDimension(7)));
    }

    #[test]
    fn pe_distinct_over_positions() {
        // Injectivity over a long range, dim 2 is the hardest case.
        let mut seen = alloc::collections::BTreeSet::new();
        for p in 0..=10_000usize {
            let pe = sinusoidal_pe(p, 2).unwrap();
            let key = (pe[0].to_bits(), pe[1].to_bits());
            assert!(seen.insert(key), "positions collide at {p}");
        }
    }

    #[test]
    fn vanilla_attention_ignores_token_order() {
        let (img, text, proj) = fixture(5, 6, 8);
        let perm = [4usize, 0, 3, 1, 2];
        let base = attention_with_injection(&img, &text, &proj, InjectionMode::None).unwrap();
        let shuffled =
            attention_with_injection(&img, &text.permuted(&perm), &proj, InjectionMode::None)
                .unwrap();
        let diff = base.top_rows(3).max_abs_diff(&shuffled.top_rows(3));
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn injection_makes_attention_order_sensitive() {
        let (img, text, proj) = fixture(5, 6, 8);
        let perm = [4usize, 0, 3, 1, 2];
        for mode in [InjectionMode::UnetK, InjectionMode::MmditQk] {
            let base = attention_with_injection(&img, &text, &proj, mode).unwrap();
            let shuffled =
                attention_with_injection(&img, &text.permuted(&perm), &proj, mode).unwrap();
            let norm = base.top_rows(3).diff_norm(&shuffled.top_rows(3));
            assert!(norm > 1e-3, "{} norm {norm}", mode.name());
        }
    }

    #[test]
    fn zero_pe_collapses_to_vanilla_exactly() {
        let (img, text, proj) = fixture(4, 6, 8);
        let zeros = Matrix::zeros(4, 8);
        let baseline =
            attention_with_custom_pe(&img, &text, &proj, InjectionMode::None, &zeros).unwrap();
        for mode in InjectionMode::ALL {
            let out = attention_with_custom_pe(&img, &text, &proj, mode, &zeros).unwrap();
            assert_eq!(out, baseline, "{}", mode.name());
        }
    }

    #[test]
    fn single_token_sequences_agree_across_modes() {
        let (img, text, proj) = fixture(1, 6, 8);
        let outputs: Vec<Matrix> = InjectionMode::ALL
            .iter()
            .map(|m| attention_with_injection(&img, &text, &proj, *m).unwrap())
            .collect();
        // One key: softmax weight is exactly 1, output is the value row.
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let (img, text, proj) = fixture(6, 6, 8);
        for mode in InjectionMode::ALL {
            let w = attention_weights(&img, &text, &proj, mode).unwrap();
            for r in 0..w.rows() {
                let sum: f64 = w.row(r).iter().sum();
                assert!(libm::fabs(sum - 1.0) < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (img, text, proj) = fixture(4, 6, 8);
        let bad = Projections::seeded(7, 5, 8);
        assert!(attention_with_injection(&img, &text, &bad, InjectionMode::None).is_err());
        let narrow_queries = Matrix::zeros(3, 4);
        assert!(
            attention_with_injection(&narrow_queries, &text, &proj, InjectionMode::None).is_err()
        );
    }
}
