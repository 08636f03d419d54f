//! Finite direct sums of full matrix algebras with a faithful trace.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, c, gaussian_matrix, CVec, Mat, C64};
use crate::{Error, Result};

/// `M_{n_1} ⊕ … ⊕ M_{n_p}` with the trace `tr(x) = Σ_j t_j Tr(x_j)`.
///
/// `t_j` is the trace of a minimal projection in block `j`; the weights are
/// normalized so that `tr(1) = Σ_j n_j t_j = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiMatrixAlgebra {
    block_dims: Vec<usize>,
    trace_weights: Vec<f64>,
}

const STATE_TOLERANCE: f64 = 1e-10;

impl MultiMatrixAlgebra {
    pub fn new(block_dims: Vec<usize>, trace_weights: Vec<f64>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::InvalidAlgebra("no blocks".into()));
        }
        if block_dims.len() != trace_weights.len() {
            return Err(Error::InvalidAlgebra(format!(
                "{} blocks but {} trace weights",
                block_dims.len(),
                trace_weights.len()
            )));
        }
        if let Some(j) = block_dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidAlgebra(format!("block {j} has dimension 0")));
        }
        if let Some(j) = trace_weights.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidAlgebra(format!(
                "trace weight {j} is {} (must be positive)",
                trace_weights[j]
            )));
        }
        let total: f64 = block_dims.iter().zip(&trace_weights).map(|(&n, &t)| n as f64 * t).sum();
        if (total - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::InvalidAlgebra(format!("trace of identity is {total}, expected 1")));
        }
        Ok(Self { block_dims, trace_weights })
    }

    /// Same blocks, weights proportional to the block sizes' inverse sum
    /// (the normalized trace when there is a single block).
    pub fn with_uniform_trace(block_dims: Vec<usize>) -> Result<Self> {
        let total: usize = block_dims.iter().sum();
        let weights = vec![1.0 / total.max(1) as f64; block_dims.len()];
        Self::new(block_dims, weights)
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn trace_weights(&self) -> &[f64] {
        &self.trace_weights
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Linear dimension `Σ n_j²`.
    pub fn dimension(&self) -> usize {
        self.block_dims.iter().map(|n| n * n).sum()
    }

    /// Size of the block-diagonal matrix representation, `Σ n_j`.
    pub fn matrix_size(&self) -> usize {
        self.block_dims.iter().sum()
    }

    /// Offsets of each block on the diagonal of the matrix representation.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.block_dims.len());
        let mut acc = 0;
        for &n in &self.block_dims {
            off.push(acc);
            acc += n;
        }
        off
    }

    /// Matrix units `e^{(j)}_{pq}` in block-major, row-major order.
    pub fn matrix_units(self: &Arc<Self>) -> Vec<AlgebraElement> {
        let mut out = Vec::with_capacity(self.dimension());
        for (j, &n) in self.block_dims.iter().enumerate() {
            for p in 0..n {
                for q in 0..n {
                    out.push(AlgebraElement::matrix_unit(self, j, p, q));
                }
            }
        }
        out
    }
}

/// One complex matrix per block of the parent algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    parent: Arc<MultiMatrixAlgebra>,
    blocks: Vec<Mat>,
}

impl AlgebraElement {
    pub fn new(parent: &Arc<MultiMatrixAlgebra>, blocks: Vec<Mat>) -> Result<Self> {
        if blocks.len() != parent.num_blocks() {
            return Err(Error::Shape(format!(
                "{} blocks supplied, algebra has {}",
                blocks.len(),
                parent.num_blocks()
            )));
        }
        for (j, (b, &n)) in blocks.iter().zip(parent.block_dims()).enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::Shape(format!(
                    "block {j} is {}x{}, expected {n}x{n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self { parent: Arc::clone(parent), blocks })
    }

    pub fn zero(parent: &Arc<MultiMatrixAlgebra>) -> Self {
        let blocks = parent.block_dims().iter().map(|&n| Mat::zeros(n, n)).collect();
        Self { parent: Arc::clone(parent), blocks }
    }

    pub fn identity(parent: &Arc<MultiMatrixAlgebra>) -> Self {
        let blocks = parent.block_dims().iter().map(|&n| Mat::identity(n, n)).collect();
        Self { parent: Arc::clone(parent), blocks }
    }

    pub fn matrix_unit(parent: &Arc<MultiMatrixAlgebra>, block: usize, p: usize, q: usize) -> Self {
        let mut x = Self::zero(parent);
        x.blocks[block][(p, q)] = c(1.0);
        x
    }

    /// Identity of block `j`: a minimal central projection.
    pub fn block_identity(parent: &Arc<MultiMatrixAlgebra>, block: usize) -> Self {
        let mut x = Self::zero(parent);
        let n = parent.block_dims()[block];
        x.blocks[block] = Mat::identity(n, n);
        x
    }

    pub fn parent(&self) -> &Arc<MultiMatrixAlgebra> {
        &self.parent
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> &Mat {
        &self.blocks[j]
    }

    fn check_parent(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.parent, &other.parent) || *self.parent == *other.parent {
            Ok(())
        } else {
            Err(Error::ParentMismatch(format!(
                "blocks {:?} vs {:?}",
                self.parent.block_dims(),
                other.parent.block_dims()
            )))
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&Mat, &Mat) -> Mat) -> Result<Self> {
        self.check_parent(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect();
        Ok(Self { parent: Arc::clone(&self.parent), blocks })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: C64) -> Self {
        let blocks = self.blocks.iter().map(|b| b * s).collect();
        Self { parent: Arc::clone(&self.parent), blocks }
    }

    pub fn adjoint(&self) -> Self {
        let blocks = self.blocks.iter().map(|b| b.adjoint()).collect();
        Self { parent: Arc::clone(&self.parent), blocks }
    }

    /// `tr(x) = Σ_j t_j Tr(x_j)`.
    pub fn trace(&self) -> C64 {
        self.blocks
            .iter()
            .zip(self.parent.trace_weights())
            .map(|(b, &t)| linalg::trace(b) * t)
            .sum()
    }

    /// `⟨x, y⟩ = tr(y* x)`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_parent(other)?;
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .zip(self.parent.trace_weights())
            .map(|((a, b), &t)| linalg::hs_inner(a, b) * t)
            .sum())
    }

    pub fn hs_norm(&self) -> f64 {
        self.blocks
            .iter()
            .zip(self.parent.trace_weights())
            .map(|(b, &t)| t * b.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Coordinates in the orthonormal basis `t_j^{-1/2} e^{(j)}_{pq}`.
    ///
    /// This map is an isometry from the trace inner product onto `ℂ^{dim}`.
    pub fn weighted_coordinates(&self) -> CVec {
        let mut v = Vec::with_capacity(self.parent.dimension());
        for (b, &t) in self.blocks.iter().zip(self.parent.trace_weights()) {
            let s = t.sqrt();
            for p in 0..b.nrows() {
                for q in 0..b.ncols() {
                    v.push(b[(p, q)] * s);
                }
            }
        }
        CVec::from_vec(v)
    }

    pub fn from_weighted_coordinates(parent: &Arc<MultiMatrixAlgebra>, v: &CVec) -> Result<Self> {
        if v.len() != parent.dimension() {
            return Err(Error::Shape(format!(
                "coordinate vector of length {}, algebra dimension {}",
                v.len(),
                parent.dimension()
            )));
        }
        let mut x = Self::zero(parent);
        let mut i = 0;
        for (b, &t) in x.blocks.iter_mut().zip(parent.trace_weights()) {
            let s = t.sqrt();
            for p in 0..b.nrows() {
                for q in 0..b.ncols() {
                    b[(p, q)] = v[i] / s;
                    i += 1;
                }
            }
        }
        Ok(x)
    }

    /// Block-diagonal matrix of size `Σ n_j`.
    pub fn to_block_diagonal(&self) -> Mat {
        let n = self.parent.matrix_size();
        let mut m = Mat::zeros(n, n);
        for (b, off) in self.blocks.iter().zip(self.parent.block_offsets()) {
            m.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        }
        m
    }

    /// Reads the diagonal blocks of `m`; off-block entries are ignored.
    pub fn from_block_diagonal(parent: &Arc<MultiMatrixAlgebra>, m: &Mat) -> Result<Self> {
        let n = parent.matrix_size();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Shape(format!("matrix is {}x{}, expected {n}x{n}", m.nrows(), m.ncols())));
        }
        let blocks = parent
            .block_dims()
            .iter()
            .zip(parent.block_offsets())
            .map(|(&d, off)| m.view((off, off), (d, d)).into_owned())
            .collect();
        Ok(Self { parent: Arc::clone(parent), blocks })
    }

    /// Largest absolute entry over all blocks.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().flat_map(|b| b.iter()).fold(0.0, |m, z| m.max(z.norm()))
    }
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, b) in self.blocks.iter().enumerate() {
            writeln!(f, "block {j}:")?;
            for p in 0..b.nrows() {
                let row: Vec<String> =
                    (0..b.ncols()).map(|q| format!("{:.6}{:+.6}i", b[(p, q)].re, b[(p, q)].im)).collect();
                writeln!(f, "  [{}]", row.join(", "))?;
            }
        }
        Ok(())
    }
}

// Operator sugar panics on parent mismatch, as nalgebra does on shape mismatch;
// the `try_*` methods return the error instead.
impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> AlgebraElement {
        self.try_add(rhs).expect("AlgebraElement addition")
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> AlgebraElement {
        self.try_sub(rhs).expect("AlgebraElement subtraction")
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: Self) -> AlgebraElement {
        self.try_mul(rhs).expect("AlgebraElement multiplication")
    }
}

impl Mul<C64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: C64) -> AlgebraElement {
        self.scale(rhs)
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.scale(c(-1.0))
    }
}

/// Orthonormal spanning list of a linear span.
#[derive(Clone, Debug)]
pub struct SpanBasis<T> {
    pub elements: Vec<T>,
}

impl<T> SpanBasis<T> {
    pub fn rank(&self) -> usize {
        self.elements.len()
    }
}

/// Orthonormal basis (trace inner product) of the span of `xs`.
pub fn span_basis(xs: &[AlgebraElement]) -> Result<SpanBasis<AlgebraElement>> {
    let Some(first) = xs.first() else {
        return Err(Error::Shape("span_basis of an empty list".into()));
    };
    for x in &xs[1..] {
        first.check_parent(x)?;
    }
    let vecs: Vec<CVec> = xs.iter().map(|x| x.weighted_coordinates()).collect();
    let elements = linalg::orthonormalize(&vecs)
        .iter()
        .map(|v| AlgebraElement::from_weighted_coordinates(first.parent(), v))
        .collect::<Result<_>>()?;
    Ok(SpanBasis { elements })
}

/// Orthonormal basis (Hilbert–Schmidt inner product) of the span of square matrices.
pub fn span_basis_matrices(xs: &[Mat]) -> Result<SpanBasis<Mat>> {
    let Some(first) = xs.first() else {
        return Err(Error::Shape("span_basis of an empty list".into()));
    };
    let n = first.nrows();
    if xs.iter().any(|x| x.nrows() != n || x.ncols() != n) {
        return Err(Error::Shape("matrices of differing shapes".into()));
    }
    let vecs: Vec<CVec> = xs.iter().map(linalg::vectorize).collect();
    let elements = linalg::orthonormalize(&vecs).iter().map(|v| linalg::unvectorize(v, n)).collect();
    Ok(SpanBasis { elements })
}

/// Element with independent standard complex Gaussian entries, deterministic in `seed`.
pub fn random_element(parent: &Arc<MultiMatrixAlgebra>, seed: u64) -> AlgebraElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_element_with(parent, &mut rng)
}

pub fn random_element_with<R: rand::Rng + ?Sized>(
    parent: &Arc<MultiMatrixAlgebra>,
    rng: &mut R,
) -> AlgebraElement {
    let blocks = parent.block_dims().iter().map(|&n| gaussian_matrix(rng, n, n)).collect();
    AlgebraElement { parent: Arc::clone(parent), blocks }
}

/// `(x + x*) / 2` for a random `x`.
pub fn random_self_adjoint(parent: &Arc<MultiMatrixAlgebra>, seed: u64) -> AlgebraElement {
    let x = random_element(parent, seed);
    (&x + &x.adjoint()).scale(c(0.5))
}
