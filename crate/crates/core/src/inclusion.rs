//! Connected unital inclusions `N ⊆ M` given by a Bratteli inclusion matrix.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{c, Mat};
use crate::multimatrix::{AlgebraElement, MultiMatrixAlgebra};
use crate::{Error, Result};

/// Nonnegative integer matrix; rows are blocks of `N`, columns blocks of `M`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionMatrix {
    entries: Vec<Vec<usize>>,
}

impl InclusionMatrix {
    /// Checks shape, zero rows/columns and connectedness.
    pub fn new(entries: Vec<Vec<usize>>) -> Result<Self> {
        let rows = entries.len();
        if rows == 0 {
            return Err(Error::DegenerateInclusion("inclusion matrix has no rows".into()));
        }
        let cols = entries[0].len();
        if cols == 0 {
            return Err(Error::DegenerateInclusion("inclusion matrix has no columns".into()));
        }
        if let Some(i) = entries.iter().position(|r| r.len() != cols) {
            return Err(Error::Shape(format!(
                "row {i} of the inclusion matrix has length {}, expected {cols}",
                entries[i].len()
            )));
        }
        let g = Self { entries };
        if let Some(i) = (0..rows).find(|&i| g.entries[i].iter().all(|&x| x == 0)) {
            return Err(Error::DegenerateInclusion(format!("row {i} is zero")));
        }
        if let Some(j) = (0..cols).find(|&j| g.entries.iter().all(|r| r[j] == 0)) {
            return Err(Error::DegenerateInclusion(format!("column {j} is zero")));
        }
        let comps = g.components();
        if comps > 1 {
            return Err(Error::NotConnected(format!("bipartite graph has {comps} components")));
        }
        Ok(g)
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.entries[i][j]
    }

    pub fn entries(&self) -> &[Vec<usize>] {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        let entries = (0..self.cols()).map(|j| (0..self.rows()).map(|i| self.entries[i][j]).collect()).collect();
        Self { entries }
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows(), self.cols(), |i, j| self.entries[i][j] as f64)
    }

    /// `G·v` over the integers.
    pub fn apply(&self, v: &[usize]) -> Vec<usize> {
        self.entries.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `Gᵗ·v` over the integers.
    pub fn apply_transpose(&self, v: &[usize]) -> Vec<usize> {
        (0..self.cols()).map(|j| (0..self.rows()).map(|i| self.entries[i][j] * v[i]).sum()).collect()
    }

    fn components(&self) -> usize {
        let (m, p) = (self.rows(), self.cols());
        // Vertices 0..m are N-blocks, m..m+p are M-blocks.
        let mut seen = vec![false; m + p];
        let mut count = 0;
        for start in 0..m + p {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                let nbrs: Vec<usize> = if v < m {
                    (0..p).filter(|&j| self.entries[v][j] > 0).map(|j| m + j).collect()
                } else {
                    (0..m).filter(|&i| self.entries[i][v - m] > 0).collect()
                };
                for w in nbrs {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }
}

/// Perron–Frobenius data of a connected inclusion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovData {
    /// `‖G‖²`, the largest eigenvalue of `GᵗG`.
    pub norm_sq: f64,
    pub tau: f64,
    /// Trace weights on `M`.
    pub t_vec: Vec<f64>,
    /// Trace weights on `N`, `s = G·t`.
    pub s_vec: Vec<f64>,
    pub iterations: usize,
    /// `‖GᵗG·t − ‖G‖²·t‖ / (‖G‖²·‖t‖)`.
    pub eigen_residual: f64,
}

/// An inclusion matrix whose shape, connectedness and unitality have been
/// checked; no trace is attached yet.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedInclusion {
    pub dims_n: Vec<usize>,
    pub dims_m: Vec<usize>,
    pub matrix: InclusionMatrix,
}

pub fn validate_inclusion(dims_n: &[usize], dims_m: &[usize], g: Vec<Vec<usize>>) -> Result<ValidatedInclusion> {
    if dims_n.contains(&0) || dims_m.contains(&0) || dims_n.is_empty() || dims_m.is_empty() {
        return Err(Error::InvalidAlgebra("block dimensions must be positive".into()));
    }
    if g.len() != dims_n.len() || g.iter().any(|r| r.len() != dims_m.len()) {
        return Err(Error::Shape(format!(
            "inclusion matrix must be {}x{} (blocks of N by blocks of M)",
            dims_n.len(),
            dims_m.len()
        )));
    }
    let matrix = InclusionMatrix::new(g)?;
    let fitted = matrix.apply_transpose(dims_n);
    for (j, (&want, &got)) in dims_m.iter().zip(&fitted).enumerate() {
        if want != got {
            return Err(Error::NotUnital(format!(
                "block {j} of M has dimension {want}, but the copies of N fill {got}"
            )));
        }
    }
    Ok(ValidatedInclusion { dims_n: dims_n.to_vec(), dims_m: dims_m.to_vec(), matrix })
}

const POWER_TOL: f64 = 1e-14;
const POWER_CAP: usize = 100_000;

/// Perron–Frobenius eigenpair of `GᵗG` by shifted power iteration.
pub fn markov_data(v: &ValidatedInclusion) -> Result<MarkovData> {
    let g = v.matrix.to_f64();
    let gtg = g.transpose() * &g;
    let p = gtg.nrows();
    let shift = gtg.trace();
    let a = &gtg + DMatrix::identity(p, p) * shift;

    let mut x = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut y = &a * &x;
        y /= y.norm();
        let delta = (&y - &x).norm();
        x = y;
        if delta <= POWER_TOL {
            break;
        }
        if iterations >= POWER_CAP {
            return Err(Error::NoConvergence { iterations });
        }
    }
    let mut lambda = x.dot(&(&gtg * &x));
    let residual = |x: &DVector<f64>, l: f64| (&gtg * x - x * l).norm() / (l * x.norm());
    // Slow convergence leaves the iterate short of full precision; polish it.
    if residual(&x, lambda) > 1e-12 {
        let shifted = &gtg - DMatrix::identity(p, p) * (lambda * (1.0 + 1e-9));
        let lu = shifted.lu();
        for _ in 0..3 {
            let Some(y) = lu.solve(&x) else { break };
            x = &y / y.norm();
        }
        lambda = x.dot(&(&gtg * &x));
    }
    if x.iter().all(|&e| e < 0.0) {
        x = -x;
    }
    if x.iter().any(|&e| e <= 0.0) {
        return Err(Error::Numeric("Perron-Frobenius vector is not strictly positive".into()));
    }
    let eigen_residual = residual(&x, lambda);
    let norm: f64 = v.dims_m.iter().zip(x.iter()).map(|(&n, &t)| n as f64 * t).sum();
    let t = x / norm;
    let s = &g * &t;
    Ok(MarkovData {
        norm_sq: lambda,
        tau: 1.0 / lambda,
        t_vec: t.iter().copied().collect(),
        s_vec: s.iter().copied().collect(),
        iterations,
        eigen_residual,
    })
}

/// `N ⊆ M` with Markov traces on both algebras and the canonical embedding.
#[derive(Clone, Debug)]
pub struct Inclusion {
    pub small: Arc<MultiMatrixAlgebra>,
    pub big: Arc<MultiMatrixAlgebra>,
    pub matrix: InclusionMatrix,
    pub markov: MarkovData,
    /// For each block of `M`, the `(N-block, diagonal offset)` of every copy.
    layout: Vec<Vec<(usize, usize)>>,
}

impl Inclusion {
    pub fn new(dims_n: &[usize], dims_m: &[usize], g: Vec<Vec<usize>>) -> Result<Self> {
        Self::from_validated(validate_inclusion(dims_n, dims_m, g)?)
    }

    pub fn from_validated(v: ValidatedInclusion) -> Result<Self> {
        let markov = markov_data(&v)?;
        let small = Arc::new(MultiMatrixAlgebra::new(v.dims_n.clone(), markov.s_vec.clone())?);
        let big = Arc::new(MultiMatrixAlgebra::new(v.dims_m.clone(), markov.t_vec.clone())?);
        let layout = (0..v.matrix.cols())
            .map(|j| {
                let mut off = 0;
                let mut copies = Vec::new();
                for i in 0..v.matrix.rows() {
                    for _ in 0..v.matrix.get(i, j) {
                        copies.push((i, off));
                        off += v.dims_n[i];
                    }
                }
                copies
            })
            .collect();
        Ok(Self { small, big, matrix: v.matrix, markov, layout })
    }

    pub fn tau(&self) -> f64 {
        self.markov.tau
    }

    /// Copies of `N`-blocks inside each `M`-block, in increasing `N`-block order.
    pub fn layout(&self) -> &[Vec<(usize, usize)>] {
        &self.layout
    }

    pub fn embed(&self, n: &AlgebraElement) -> Result<AlgebraElement> {
        if **n.parent() != *self.small {
            return Err(Error::ParentMismatch("embed expects an element of N".into()));
        }
        let blocks = self
            .layout
            .iter()
            .zip(self.big.block_dims())
            .map(|(copies, &dim)| {
                let mut b = Mat::zeros(dim, dim);
                for &(i, off) in copies {
                    let d = n.block(i).nrows();
                    b.view_mut((off, off), (d, d)).copy_from(n.block(i));
                }
                b
            })
            .collect();
        AlgebraElement::new(&self.big, blocks)
    }

    /// Trace-preserving conditional expectation `E_N : M → N`:
    /// `E_N(x)_i = s_i⁻¹ Σ_j t_j Σ_{copies of i in j} (x_j restricted to the copy)`.
    pub fn conditional_expectation(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        if **x.parent() != *self.big {
            return Err(Error::ParentMismatch("conditional expectation expects an element of M".into()));
        }
        let s = self.small.trace_weights();
        let t = self.big.trace_weights();
        let mut blocks: Vec<Mat> = self.small.block_dims().iter().map(|&d| Mat::zeros(d, d)).collect();
        for (j, copies) in self.layout.iter().enumerate() {
            for &(i, off) in copies {
                let d = blocks[i].nrows();
                blocks[i] += x.block(j).view((off, off), (d, d)) * c(t[j]);
            }
        }
        for (b, &si) in blocks.iter_mut().zip(s) {
            *b /= c(si);
        }
        AlgebraElement::new(&self.small, blocks)
    }
}
