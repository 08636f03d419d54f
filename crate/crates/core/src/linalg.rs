//! Dense complex linear algebra shared by every level of the tower.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative cutoff below which a Gram–Schmidt residual counts as dependent.
pub const RANK_CUTOFF: f64 = 1e-10;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Column-major flattening.
pub fn vectorize(m: &Mat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVec, n: usize) -> Mat {
    debug_assert_eq!(v.len(), n * n);
    Mat::from_column_slice(n, n, v.as_slice())
}

/// Hilbert–Schmidt inner product `Tr(b* a)`.
pub fn hs_inner(a: &Mat, b: &Mat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

pub fn hs_norm(a: &Mat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &Mat) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &Mat, b: &Mat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Standard complex Gaussian entries (`E|z|² = 1`).
pub fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = gaussian_c64(rng);
        }
    }
    m
}

/// Incremental orthonormal basis of a linear span under the Euclidean inner
/// product, built with two passes of classical Gram–Schmidt.
///
/// A candidate is kept when its residual after projection exceeds
/// [`RANK_CUTOFF`] times the largest candidate norm seen so far.
#[derive(Clone, Debug, Default)]
pub struct SpanBuilder {
    basis: Vec<CVec>,
    max_norm: f64,
}

impl SpanBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CVec] {
        &self.basis
    }

    pub fn into_basis(self) -> Vec<CVec> {
        self.basis
    }

    fn project_out(&self, v: &mut CVec) {
        for _ in 0..2 {
            let coeffs: Vec<C64> = crate::par::map_slice(&self.basis, |b| b.dotc(v));
            for (b, c) in self.basis.iter().zip(coeffs) {
                v.axpy(-c, b, C64::new(1.0, 0.0));
            }
        }
    }

    /// Residual norm of `v` orthogonal to the current span.
    pub fn residual(&self, v: &CVec) -> f64 {
        let mut w = v.clone();
        self.project_out(&mut w);
        w.norm()
    }

    /// Adds `v` if it is independent of the span; returns whether it was kept.
    pub fn push(&mut self, v: &CVec) -> bool {
        let norm = v.norm();
        if !norm.is_finite() {
            return false;
        }
        self.max_norm = self.max_norm.max(norm);
        if norm == 0.0 {
            return false;
        }
        let mut w = v.clone();
        self.project_out(&mut w);
        let r = w.norm();
        if r > RANK_CUTOFF * self.max_norm {
            w.unscale_mut(r);
            self.basis.push(w);
            true
        } else {
            false
        }
    }

    /// Pushes every vector; returns how many were kept.
    pub fn extend<'a, I: IntoIterator<Item = &'a CVec>>(&mut self, vs: I) -> usize {
        vs.into_iter().filter(|v| self.push(v)).count()
    }
}

/// Orthonormal basis of the span of `vs` (order-deterministic).
pub fn orthonormalize(vs: &[CVec]) -> Vec<CVec> {
    let mut sb = SpanBuilder::new();
    sb.max_norm = vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    sb.extend(vs.iter());
    sb.into_basis()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(h: &Mat) -> (Vec<f64>, Mat) {
    let sym = (h + h.adjoint()) * c(0.5);
    let eig = sym.symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Orthonormal basis (as columns) of the range of an orthogonal projection.
pub fn projection_range(p: &Mat) -> Mat {
    let (vals, vecs) = hermitian_eigen(p);
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    let mut r = Mat::zeros(p.nrows(), cols.len());
    for (j, &i) in cols.iter().enumerate() {
        r.set_column(j, &vecs.column(i));
    }
    r
}

/// Spectral clusters of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Clusters {
    /// Representative eigenvalue per cluster, ascending.
    pub values: Vec<f64>,
    /// Eigenvector columns per cluster.
    pub vectors: Vec<Mat>,
    /// Smallest gap between consecutive clusters relative to the spectral scale.
    pub min_gap: f64,
}

/// Groups the eigenvalues of the Hermitian matrix `h` into clusters.
///
/// Eigenvalues closer than `1e-9 × scale` are merged. Fails when two clusters
/// are separated by less than `1e-6 × scale`, which signals a non-generic
/// input that the caller should redraw.
pub fn spectral_clusters(h: &Mat) -> Result<Clusters> {
    let (vals, vecs) = hermitian_eigen(h);
    let n = vals.len();
    if n == 0 {
        return Ok(Clusters { values: vec![], vectors: vec![], min_gap: f64::INFINITY });
    }
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    let mut min_gap = f64::INFINITY;
    for i in 1..n {
        let gap = (vals[i] - vals[i - 1]) / scale;
        if gap <= 1e-9 {
            groups.last_mut().unwrap().push(i);
        } else {
            min_gap = min_gap.min(gap);
            groups.push(vec![i]);
        }
    }
    if min_gap < 1e-6 {
        return Err(Error::Numeric(format!(
            "near-degenerate spectrum: relative gap {min_gap:.3e} below 1e-6"
        )));
    }
    let mut values = Vec::with_capacity(groups.len());
    let mut vectors = Vec::with_capacity(groups.len());
    for g in &groups {
        values.push(g.iter().map(|&i| vals[i]).sum::<f64>() / g.len() as f64);
        let mut m = Mat::zeros(n, g.len());
        for (j, &i) in g.iter().enumerate() {
            m.set_column(j, &vecs.column(i));
        }
        vectors.push(m);
    }
    Ok(Clusters { values, vectors, min_gap })
}

/// Orthonormal null space (columns) of `a` with singular values at most
/// `rel_tol` times the largest one.
pub fn null_space(a: &Mat, rel_tol: f64) -> Mat {
    let n = a.ncols();
    // Reduce a tall input to its n×n triangular factor first.
    let r = if a.nrows() > n { a.clone().qr().r() } else { a.clone() };
    let mut square = Mat::zeros(n.max(r.nrows()), n);
    square.view_mut((0, 0), (r.nrows(), n)).copy_from(&r);
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let top = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cols: Vec<usize> =
        (0..n).filter(|&i| svd.singular_values[i] <= rel_tol * top).collect();
    let mut out = Mat::zeros(n, cols.len());
    for (j, &i) in cols.iter().enumerate() {
        let row = v_t.row(i).adjoint();
        out.set_column(j, &row);
    }
    out
}

/// Singular values, descending.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Relative difference `‖a − b‖ / max(‖a‖, ‖b‖)` for precomputed norms;
/// absolute when both norms vanish.
pub fn relative(diff: f64, norm_a: f64, norm_b: f64) -> f64 {
    let scale = norm_a.max(norm_b);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Product of a list of matrices, identity of size `n` when empty.
pub fn product<'a, I: IntoIterator<Item = &'a Mat>>(n: usize, factors: I) -> Mat {
    factors.into_iter().fold(Mat::identity(n, n), |acc, f| acc * f)
}
