//! The Jones tower `N = M₋₁ ⊆ M = M₀ ⊆ M₁ ⊆ … ⊆ M_K`.
//!
//! Every level is stored uniformly as a *-algebra of `D_k × D_k` complex
//! matrices: levels `−1` and `0` as block-diagonal matrices, level `k ≥ 1` as
//! operators on the GNS space `L²(M_{k−1})` written in the orthonormal GNS
//! basis of level `k − 1` (so `D_k = dim M_{k−1}`).
//!
//! Each level carries a trace density `ρ_k` (central in the level) with
//! `Tr_k(X) = Tr(ρ_k X)`, and an orthonormal basis `B_a` for the inner product
//! `⟨X, Y⟩ = Tr_k(Y* X)`. Coordinates of `X` are `⟨X, B_a⟩`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::inclusion::Inclusion;
use crate::linalg::{
    self, c, gaussian_c64, hs_norm, orthonormalize, relative, spectral_clusters, trace_of_product, unvectorize,
    vectorize, CVec, Mat, SpanBuilder, C64,
};
use crate::multimatrix::{AlgebraElement, MultiMatrixAlgebra};
use crate::par;
use crate::{Error, Result};

/// Refuse depth `K` when `dim M_K · dim M_{K−1}²` exceeds this many complex entries.
pub const DEPTH_BUDGET: usize = 1 << 21;

/// Hard ceiling on the tower depth regardless of dimensions (relevant when `τ = 1`).
pub const MAX_DEPTH: usize = 16;

const CLOSURE_TOL: f64 = 1e-8;

/// One level of the tower.
#[derive(Clone, Debug)]
pub struct Level {
    index: i32,
    size: usize,
    dim: usize,
    /// Columns `vec(B_a)`.
    vec_basis: Mat,
    /// Columns `vec(B_a ρ)`, so that `coords(X) = duals* vec(X)`.
    duals: Mat,
    density: Mat,
    unit_coords: CVec,
    jones: Option<Mat>,
    /// Columns `vec(up(B_a))`: images of the basis in level `k + 1`.
    up_images: Option<Mat>,
    block_dims: Option<Vec<usize>>,
}

impl Level {
    fn from_multimatrix(index: i32, alg: &MultiMatrixAlgebra) -> Self {
        let size = alg.matrix_size();
        let offsets = alg.block_offsets();
        let mut cols = Vec::with_capacity(alg.dimension());
        let mut dual_cols = Vec::with_capacity(alg.dimension());
        let mut density = Mat::zeros(size, size);
        for ((&n, &t), &off) in alg.block_dims().iter().zip(alg.trace_weights()).zip(&offsets) {
            for p in 0..n {
                density[(off + p, off + p)] = c(t);
            }
            for p in 0..n {
                for q in 0..n {
                    let mut b = Mat::zeros(size, size);
                    b[(off + p, off + q)] = c(1.0 / t.sqrt());
                    let mut d = Mat::zeros(size, size);
                    d[(off + p, off + q)] = c(t.sqrt());
                    cols.push(vectorize(&b));
                    dual_cols.push(vectorize(&d));
                }
            }
        }
        let vec_basis = Mat::from_columns(&cols);
        let duals = Mat::from_columns(&dual_cols);
        let mut level = Self {
            index,
            size,
            dim: cols.len(),
            vec_basis,
            duals,
            density,
            unit_coords: CVec::zeros(0),
            jones: None,
            up_images: None,
            block_dims: Some(alg.block_dims().to_vec()),
        };
        level.unit_coords = level.coords(&Mat::identity(size, size));
        level
    }

    pub fn index(&self) -> i32 {
        self.index
    }

    /// Matrix size `D_k` of the concrete representation.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Linear dimension of the level (= dimension of its GNS space).
    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Block sizes for the two multi-matrix levels; `None` above level 0.
    pub fn multimatrix_blocks(&self) -> Option<&[usize]> {
        self.block_dims.as_deref()
    }

    pub fn density(&self) -> &Mat {
        &self.density
    }

    /// The Jones projection `e_k` (levels `k ≥ 1`).
    pub fn jones(&self) -> Option<&Mat> {
        self.jones.as_ref()
    }

    /// GNS basis element `B_a`.
    pub fn basis_element(&self, a: usize) -> Mat {
        unvectorize(&self.vec_basis.column(a).into_owned(), self.size)
    }

    pub fn basis(&self) -> Vec<Mat> {
        (0..self.dim).map(|a| self.basis_element(a)).collect()
    }

    pub fn identity(&self) -> Mat {
        Mat::identity(self.size, self.size)
    }

    /// `1̂`, the GNS vector of the identity.
    pub fn unit_vector(&self) -> &CVec {
        &self.unit_coords
    }

    pub fn coords(&self, x: &Mat) -> CVec {
        self.duals.ad_mul(&vectorize(x))
    }

    pub fn element(&self, coords: &CVec) -> Mat {
        unvectorize(&(&self.vec_basis * coords), self.size)
    }

    /// Trace-orthogonal projection of an arbitrary `D_k × D_k` matrix onto the level.
    pub fn project(&self, x: &Mat) -> Mat {
        self.element(&self.coords(x))
    }

    /// Relative distance of `x` from the level.
    pub fn membership_residual(&self, x: &Mat) -> f64 {
        relative(hs_norm(&(x - self.project(x))), hs_norm(x), 0.0)
    }

    /// `Tr_k(x) = Tr(ρ_k x)`.
    pub fn trace(&self, x: &Mat) -> C64 {
        trace_of_product(&self.density, x)
    }

    /// `⟨x, y⟩ = Tr_k(y* x)`.
    pub fn inner(&self, x: &Mat, y: &Mat) -> C64 {
        self.trace(&(y.adjoint() * x))
    }

    /// `‖x‖₂ = Tr_k(x* x)^{1/2}`.
    pub fn norm2(&self, x: &Mat) -> f64 {
        self.inner(x, x).re.max(0.0).sqrt()
    }

    /// Left regular representation on the GNS space: column `b` is `coords(x B_b)`.
    pub fn left_rep(&self, x: &Mat) -> Mat {
        let cat = Mat::from_column_slice(self.size, self.size * self.dim, self.vec_basis.as_slice());
        let prod = x * cat;
        let stacked = Mat::from_column_slice(self.size * self.size, self.dim, prod.as_slice());
        self.duals.ad_mul(&stacked)
    }

    /// Seeded element with standard complex Gaussian GNS coordinates.
    pub fn random_element(&self, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.random_element_with(&mut rng)
    }

    pub fn random_element_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat {
        let v = CVec::from_fn(self.dim, |_, _| gaussian_c64(rng));
        self.element(&v)
    }

    /// Image of `x` in level `k + 1`.
    fn up(&self, x: &Mat) -> Result<Mat> {
        let up = self
            .up_images
            .as_ref()
            .ok_or(Error::InsufficientDepth { needed: self.index + 1, built: self.index })?;
        let n = (up.nrows() as f64).sqrt().round() as usize;
        Ok(unvectorize(&(up * self.coords(x)), n))
    }
}

/// Diagnostics gathered while building a level `k ≥ 1`.
#[derive(Clone, Debug, Serialize)]
pub struct LevelDiagnostics {
    pub level: i32,
    pub predicted_dimension: usize,
    pub span_rank: usize,
    pub span_chunks: usize,
    /// Relative residual of products of random span elements outside the span.
    pub closure_residual: f64,
    pub adjoint_residual: f64,
    pub identity_residual: f64,
    /// `|Tr(1) − 1|` for the extended trace.
    pub trace_unit_residual: f64,
}

/// Block decomposition of one level.
#[derive(Clone, Debug)]
pub struct BlockStructure {
    pub level: i32,
    /// Sizes `m_j` of the full matrix blocks.
    pub block_dims: Vec<usize>,
    /// Multiplicity `μ_j` of block `j` in the concrete representation.
    pub multiplicities: Vec<usize>,
    pub central_projections: Vec<Mat>,
    /// Inclusion matrix of level `k − 1` into level `k` (rows: lower blocks).
    pub inclusion_from_below: Option<Vec<Vec<usize>>>,
    /// Smallest relative spectral gap met while separating blocks.
    pub min_gap: f64,
}

impl BlockStructure {
    pub fn dimension(&self) -> usize {
        self.block_dims.iter().map(|m| m * m).sum()
    }
}

/// The tower of basic constructions, built to a fixed depth.
#[derive(Clone, Debug)]
pub struct Tower {
    inclusion: Inclusion,
    levels: Vec<Level>,
    /// `chain[k]`: basis of level `k` over level `k − 1`.
    chain: Vec<Vec<Mat>>,
    diagnostics: Vec<LevelDiagnostics>,
}

/// Linear dimensions of levels `−1..=depth` predicted by alternating `G` and `Gᵗ`.
pub fn predicted_dimensions(inc: &Inclusion, depth: usize) -> Vec<usize> {
    predicted_block_sizes(inc, depth).iter().map(|s| s.iter().map(|n| n * n).sum()).collect()
}

/// Block sizes of levels `−1..=depth`.
pub fn predicted_block_sizes(inc: &Inclusion, depth: usize) -> Vec<Vec<usize>> {
    let g = &inc.matrix;
    let mut sizes = vec![inc.small.block_dims().to_vec(), inc.big.block_dims().to_vec()];
    for k in 0..depth {
        let prev = &sizes[k + 1];
        let next = if k % 2 == 0 { g.apply(prev) } else { g.apply_transpose(prev) };
        sizes.push(next);
    }
    sizes
}

/// Largest depth admitted by [`DEPTH_BUDGET`] and [`MAX_DEPTH`].
pub fn max_depth(inc: &Inclusion) -> usize {
    let dims = predicted_dimensions(inc, MAX_DEPTH);
    (1..=MAX_DEPTH)
        .take_while(|&k| dims[k + 1].saturating_mul(dims[k].saturating_mul(dims[k])) <= DEPTH_BUDGET)
        .last()
        .unwrap_or(0)
}

fn level_seed(k: i32, salt: u64) -> u64 {
    0x7f4a_7c15_u64 ^ ((k as u64 + 7) << 20) ^ salt
}

impl Tower {
    /// Builds levels `−1..=depth`. Depth is refused above [`max_depth`].
    pub fn build(inclusion: Inclusion, depth: usize) -> Result<Self> {
        let cap = max_depth(&inclusion);
        if depth > cap {
            let dims = predicted_dimensions(&inclusion, depth);
            return Err(Error::DepthRefused {
                requested: depth,
                reason: format!(
                    "level {depth} would have dimension {} acting on a space of dimension {}; \
                     the largest admissible depth for this inclusion is {cap}",
                    dims[depth + 1],
                    dims[depth]
                ),
            });
        }
        let predicted = predicted_dimensions(&inclusion, depth);
        let mut small = Level::from_multimatrix(-1, &inclusion.small);
        let big = Level::from_multimatrix(0, &inclusion.big);
        small.up_images = Some(embedding_images(&inclusion, &small));
        let mut tower = Self { inclusion, levels: vec![small, big], chain: Vec::new(), diagnostics: Vec::new() };
        for k in 0..depth {
            tower.extend_one(predicted[k + 2])?;
        }
        Ok(tower)
    }

    fn extend_one(&mut self, predicted: usize) -> Result<()> {
        let k = self.depth() as i32;
        let tau = self.tau();
        // Left regular representation of level k on its own GNS space.
        let images = {
            let lk = self.level(k);
            let cols = par::map_range(lk.dim, |a| vectorize(&lk.left_rep(&lk.basis_element(a))));
            Mat::from_columns(&cols)
        };
        self.levels[(k + 1) as usize].up_images = Some(images);
        let lk = self.level(k);
        let lprev = self.level(k - 1);

        // e_{k+1}: projection of L²(M_k) onto the image of M_{k−1}.
        let prev_up = lprev.up_images.as_ref().expect("lower levels carry up images");
        let sub: Vec<CVec> = (0..lprev.dim)
            .map(|a| lk.coords(&unvectorize(&prev_up.column(a).into_owned(), lk.size)))
            .collect();
        let f = Mat::from_columns(&orthonormalize(&sub));
        let e = &f * f.adjoint();

        let mut rng = ChaCha8Rng::seed_from_u64(level_seed(k + 1, 0));
        let lefts: Vec<Mat> = (0..lk.dim).map(|a| lk.left_rep(&lk.basis_element(a))).collect();
        let (span, chunks) = span_of_products(&lefts, &e, |rng| lk.left_rep(&lk.random_element_with(rng)), &mut rng);
        let n = lk.dim;
        let (closure_residual, adjoint_residual, identity_residual) = closure_residuals(&span, n, &mut rng);
        if closure_residual > CLOSURE_TOL || adjoint_residual > CLOSURE_TOL || identity_residual > CLOSURE_TOL {
            return Err(Error::Consistency(format!(
                "span of level {} is not a unital *-algebra (product {closure_residual:.2e}, \
                 adjoint {adjoint_residual:.2e}, identity {identity_residual:.2e})",
                k + 1
            )));
        }

        // Basis of level k over level k−1, needed for the trace of level k+1.
        let lambda = if k == 0 {
            partial_isometry_basis(lk, &e, &span, level_seed(1, 1))?
        } else {
            let prev_chain = &self.chain[(k - 1) as usize];
            let e_k = lk.jones.as_ref().expect("levels above 0 carry e_k");
            let s = c(tau.powf(-0.5));
            prev_chain.iter().map(|l| Ok(e_k * lprev.up(l)? * s)).collect::<Result<Vec<_>>>()?
        };

        // Tr_{k+1}(X) = τ Σ_i ŷ_i* X ŷ_i with ŷ_i = (λ_i*)^.
        let mut omega = Mat::zeros(n, n);
        for l in &lambda {
            let y = lk.coords(&l.adjoint());
            omega += &y * y.adjoint();
        }
        let span_mat = Mat::from_columns(&span.iter().map(vectorize).collect::<Vec<_>>());
        let proj = &span_mat * span_mat.ad_mul(&vectorize(&omega));
        let density = unvectorize(&proj, n) * c(tau);

        let dens_cols: Vec<CVec> = par::map_slice(&span, |h| vectorize(&(h * &density)));
        let dens_mat = Mat::from_columns(&dens_cols);
        let gram = dens_mat.ad_mul(&span_mat);
        let gram = (&gram + gram.adjoint()) * c(0.5);
        let chol = gram.clone().cholesky().ok_or_else(|| {
            Error::Numeric(format!("non-faithful trace on level {}: Gram matrix is not positive definite", k + 1))
        })?;
        let l = chol.l();
        let coef = l
            .adjoint()
            .solve_upper_triangular(&Mat::identity(span.len(), span.len()))
            .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
        let vec_basis = &span_mat * &coef;
        let duals = &dens_mat * &coef;
        let mut level = Level {
            index: k + 1,
            size: n,
            dim: span.len(),
            vec_basis,
            duals,
            density,
            unit_coords: CVec::zeros(0),
            jones: Some(e),
            up_images: None,
            block_dims: None,
        };
        level.unit_coords = level.coords(&level.identity());
        let trace_unit_residual = (level.trace(&level.identity()) - c(1.0)).norm();

        self.diagnostics.push(LevelDiagnostics {
            level: k + 1,
            predicted_dimension: predicted,
            span_rank: span.len(),
            span_chunks: chunks,
            closure_residual,
            adjoint_residual,
            identity_residual,
            trace_unit_residual,
        });
        self.chain.push(lambda);
        self.levels.push(level);
        Ok(())
    }

    pub fn inclusion(&self) -> &Inclusion {
        &self.inclusion
    }

    pub fn tau(&self) -> f64 {
        self.inclusion.markov.tau
    }

    /// Highest level built.
    pub fn depth(&self) -> usize {
        self.levels.len() - 2
    }

    pub fn has_level(&self, k: i32) -> bool {
        k >= -1 && k <= self.depth() as i32
    }

    fn require(&self, k: i32) -> Result<()> {
        if self.has_level(k) {
            Ok(())
        } else {
            Err(Error::InsufficientDepth { needed: k, built: self.depth() as i32 })
        }
    }

    /// Panics if level `k` was not built; see [`Tower::has_level`].
    pub fn level(&self, k: i32) -> &Level {
        &self.levels[(k + 1) as usize]
    }

    pub fn try_level(&self, k: i32) -> Result<&Level> {
        self.require(k)?;
        Ok(self.level(k))
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// The GNS space of level `k`: orthonormal basis and left regular representation.
    pub fn gns(&self, k: i32) -> Result<&Level> {
        self.try_level(k)
    }

    pub fn diagnostics(&self) -> &[LevelDiagnostics] {
        &self.diagnostics
    }

    pub fn dimensions(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.dim).collect()
    }

    /// `e_k` as an element of level `k`.
    pub fn jones_projection(&self, k: i32) -> Result<&Mat> {
        if k < 1 {
            return Err(Error::Precondition(format!("Jones projections are indexed from 1, got {k}")));
        }
        self.require(k)?;
        Ok(self.level(k).jones.as_ref().expect("levels above 0 carry e_k"))
    }

    /// `e_j` pushed up to level `at ≥ j`.
    pub fn jones_at(&self, j: i32, at: i32) -> Result<Mat> {
        let e = self.jones_projection(j)?.clone();
        self.up_to(&e, j, at)
    }

    /// Basis of level `k` over level `k − 1` used internally (`k ≥ 0`).
    pub fn chain_basis(&self, k: i32) -> Result<&[Mat]> {
        if k < 0 || k as usize >= self.chain.len() {
            return Err(Error::InsufficientDepth { needed: k + 1, built: self.depth() as i32 });
        }
        Ok(&self.chain[k as usize])
    }

    /// Image of an element of level `k` in level `k + 1`.
    pub fn up(&self, x: &Mat, k: i32) -> Result<Mat> {
        self.require(k + 1)?;
        self.level(k).up(x)
    }

    /// Image of an element of level `from` in level `to ≥ from`.
    pub fn up_to(&self, x: &Mat, from: i32, to: i32) -> Result<Mat> {
        if to < from {
            return Err(Error::Precondition(format!("cannot push level {from} up to level {to}")));
        }
        self.require(to)?;
        let mut y = x.clone();
        for k in from..to {
            y = self.level(k).up(&y)?;
        }
        Ok(y)
    }

    /// Coefficients `c_i ∈ M_{k−1}` with `X = Σ c_i e_k λ_i` for the chain basis.
    pub fn canonical_decomposition(&self, k: i32, x: &Mat) -> Result<Vec<Mat>> {
        let lambda = self.chain_basis(k - 1)?;
        self.canonical_decomposition_with(k, x, lambda)
    }

    /// As [`Tower::canonical_decomposition`] for any basis `λ` of level `k − 1`
    /// over level `k − 2`: `c_i` is `X` applied to the GNS vector `(λ_i*)^`.
    pub fn canonical_decomposition_with(&self, k: i32, x: &Mat, lambda: &[Mat]) -> Result<Vec<Mat>> {
        if k < 1 {
            return Err(Error::Precondition("canonical decomposition needs k ≥ 1".into()));
        }
        self.require(k)?;
        let low = self.level(k - 1);
        Ok(lambda.iter().map(|l| low.element(&(x * low.coords(&l.adjoint())))).collect())
    }

    /// `Σ up(c_i) e_k up(λ_i)`.
    pub fn reconstruct(&self, k: i32, coeffs: &[Mat], lambda: &[Mat]) -> Result<Mat> {
        let e = self.jones_projection(k)?;
        let lk = self.level(k);
        let mut out = Mat::zeros(lk.size, lk.size);
        for (ci, li) in coeffs.iter().zip(lambda) {
            out += self.up(ci, k - 1)? * e * self.up(li, k - 1)?;
        }
        Ok(out)
    }

    /// Relative residual of `X − Σ up(c_i) e_k up(λ_i)`.
    pub fn decomposition_residual(&self, k: i32, x: &Mat) -> Result<f64> {
        let lambda = self.chain_basis(k - 1)?;
        let coeffs = self.canonical_decomposition_with(k, x, lambda)?;
        let back = self.reconstruct(k, &coeffs, lambda)?;
        Ok(relative(hs_norm(&(x - &back)), hs_norm(x), hs_norm(&back)))
    }

    /// `Tr_k(X)`.
    pub fn trace(&self, k: i32, x: &Mat) -> Result<C64> {
        Ok(self.try_level(k)?.trace(x))
    }

    /// `τ Σ_i tr_{k−1}(c_i λ_i)`, the extension formula evaluated directly.
    pub fn trace_extension(&self, k: i32, x: &Mat) -> Result<C64> {
        let lambda = self.chain_basis(k - 1)?;
        let coeffs = self.canonical_decomposition_with(k, x, lambda)?;
        let low = self.level(k - 1);
        Ok(coeffs.iter().zip(lambda).map(|(ci, li)| low.trace(&(ci * li))).sum::<C64>() * self.tau())
    }

    /// Trace-preserving conditional expectation of level `k` onto level `k − 1`.
    pub fn expectation(&self, k: i32, x: &Mat) -> Result<Mat> {
        self.require(k)?;
        match k {
            k if k < 0 => Err(Error::Precondition("N has no lower level".into())),
            0 => {
                let inc = &self.inclusion;
                let xm = AlgebraElement::from_block_diagonal(&inc.big, x)?;
                Ok(inc.conditional_expectation(&xm)?.to_block_diagonal())
            }
            _ => {
                let lambda = self.chain_basis(k - 1)?;
                let coeffs = self.canonical_decomposition_with(k, x, lambda)?;
                let low = self.level(k - 1);
                let mut out = Mat::zeros(low.size, low.size);
                for (ci, li) in coeffs.iter().zip(lambda) {
                    out += ci * li;
                }
                Ok(out * c(self.tau()))
            }
        }
    }

    /// Composite expectation from level `from` down to level `to ≤ from`.
    pub fn expectation_to(&self, x: &Mat, from: i32, to: i32) -> Result<Mat> {
        if to > from || to < -1 {
            return Err(Error::Precondition(format!("cannot take expectation from level {from} to {to}")));
        }
        let mut y = x.clone();
        for k in (to + 1..=from).rev() {
            y = self.expectation(k, &y)?;
        }
        Ok(y)
    }

    /// The unique `x₀` in level `k − 1` with `X e_k = x₀ e_k`, read off as `X·1̂`.
    pub fn pushdown(&self, k: i32, x: &Mat) -> Result<Mat> {
        if k < 1 {
            return Err(Error::Precondition("pushdown needs k ≥ 1".into()));
        }
        self.require(k)?;
        let low = self.level(k - 1);
        let x0 = low.element(&(x * low.unit_vector()));
        let e = self.jones_projection(k)?;
        let lhs = x * e;
        let rhs = self.up(&x0, k - 1)? * e;
        let res = relative(hs_norm(&(&lhs - &rhs)), hs_norm(&lhs), hs_norm(&rhs));
        if res > crate::DEFAULT_TOLERANCE {
            return Err(Error::Numeric(format!("pushdown residual {res:.3e} on level {k}")));
        }
        Ok(x0)
    }

    /// `τ⁻¹ E_{M_{k−1}}(X e_k)`, the second route to the pushdown.
    pub fn pushdown_via_expectation(&self, k: i32, x: &Mat) -> Result<Mat> {
        let e = self.jones_projection(k)?;
        Ok(self.expectation(k, &(x * e))? * c(1.0 / self.tau()))
    }

    /// Block structure of level `k`; for `k ≥ 0` also the inclusion matrix from level `k − 1`.
    pub fn block_structure(&self, k: i32) -> Result<BlockStructure> {
        self.require(k)?;
        let lk = self.level(k);
        if let Some(dims) = lk.multimatrix_blocks() {
            let offs: Vec<usize> = dims
                .iter()
                .scan(0, |acc, &n| {
                    let o = *acc;
                    *acc += n;
                    Some(o)
                })
                .collect();
            let central = dims
                .iter()
                .zip(&offs)
                .map(|(&n, &o)| {
                    let mut p = Mat::zeros(lk.size, lk.size);
                    p.view_mut((o, o), (n, n)).fill_with_identity();
                    p
                })
                .collect();
            let inclusion_from_below = (k == 0).then(|| self.inclusion.matrix.entries().to_vec());
            return Ok(BlockStructure {
                level: k,
                block_dims: dims.to_vec(),
                multiplicities: vec![1; dims.len()],
                central_projections: central,
                inclusion_from_below,
                min_gap: f64::INFINITY,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(level_seed(k, 2));
        let span = lk.basis();
        let an = analyze_algebra(&span, &mut rng)?;
        let lower = self.block_structure(k - 1)?;
        let mut g = vec![vec![0usize; an.central.len()]; lower.central_projections.len()];
        for (i, p) in lower.central_projections.iter().enumerate() {
            let up = self.up(p, k - 1)?;
            for (j, z) in an.central.iter().enumerate() {
                let rank = trace_of_product(&up, z).re;
                let denom = (lower.block_dims[i] * an.mult[j]) as f64;
                g[i][j] = (rank / denom).round() as usize;
            }
        }
        Ok(BlockStructure {
            level: k,
            block_dims: an.dims,
            multiplicities: an.mult,
            central_projections: an.central,
            inclusion_from_below: Some(g),
            min_gap: an.min_gap,
        })
    }

    /// Element of level `k ≤ 0` as a multi-matrix algebra element.
    pub fn to_algebra_element(&self, k: i32, x: &Mat) -> Result<AlgebraElement> {
        match k {
            -1 => AlgebraElement::from_block_diagonal(&self.inclusion.small, x),
            0 => AlgebraElement::from_block_diagonal(&self.inclusion.big, x),
            _ => Err(Error::Precondition(format!("level {k} is not a multi-matrix level"))),
        }
    }
}

fn embedding_images(inc: &Inclusion, small: &Level) -> Mat {
    let cols: Vec<CVec> = (0..small.dim)
        .map(|a| {
            let b = small.basis_element(a);
            let n = AlgebraElement::from_block_diagonal(&inc.small, &b).expect("level −1 is N");
            vectorize(&inc.embed(&n).expect("embedding of N").to_block_diagonal())
        })
        .collect();
    Mat::from_columns(&cols)
}

/// HS-orthonormal basis of `span{L_a e R : a, R random}`, one random `R` per chunk,
/// stopping once a chunk adds nothing.
pub(crate) fn span_of_products<R, F>(lefts: &[Mat], e: &Mat, mut draw: F, rng: &mut R) -> (Vec<Mat>, usize)
where
    R: Rng,
    F: FnMut(&mut R) -> Mat,
{
    let n = e.nrows();
    let mut sb = SpanBuilder::new();
    let cap = lefts.len() + 2;
    let mut chunks = 0;
    let left_e: Vec<Mat> = par::map_slice(lefts, |l| l * e);
    while chunks < cap {
        chunks += 1;
        let r = draw(rng);
        let cands: Vec<CVec> = par::map_slice(&left_e, |le| vectorize(&(le * &r)));
        if sb.extend(cands.iter()) == 0 {
            break;
        }
    }
    let span = sb.into_basis().iter().map(|v| unvectorize(v, n)).collect();
    (span, chunks)
}

/// Product, adjoint and identity residuals of a claimed *-algebra given by an HS-orthonormal basis.
fn closure_residuals<R: Rng>(span: &[Mat], n: usize, rng: &mut R) -> (f64, f64, f64) {
    let span_mat = Mat::from_columns(&span.iter().map(vectorize).collect::<Vec<_>>());
    let proj_res = |x: &Mat| {
        let v = vectorize(x);
        let p = &span_mat * span_mat.ad_mul(&v);
        relative((&v - p).norm(), v.norm(), 0.0)
    };
    let mut generic = || {
        let g = CVec::from_fn(span.len(), |_, _| gaussian_c64(rng));
        unvectorize(&(&span_mat * g), n)
    };
    let mut prod: f64 = 0.0;
    let mut adj: f64 = 0.0;
    for _ in 0..3 {
        let a = generic();
        let b = generic();
        prod = par::nan_max(prod, proj_res(&(&a * &b)));
        adj = par::nan_max(adj, proj_res(&a.adjoint()));
    }
    (prod, adj, proj_res(&Mat::identity(n, n)))
}

pub(crate) struct Analysis {
    pub central: Vec<Mat>,
    pub dims: Vec<usize>,
    pub mult: Vec<usize>,
    pub min_gap: f64,
}

fn generic_in<R: Rng>(span: &[Mat], rng: &mut R) -> Mat {
    let n = span[0].nrows();
    let mut out = Mat::zeros(n, n);
    for h in span {
        out += h * gaussian_c64(rng);
    }
    out
}

fn generic_self_adjoint<R: Rng>(span: &[Mat], rng: &mut R) -> Mat {
    let g = generic_in(span, rng);
    (&g + g.adjoint()) * c(0.5)
}

/// Columns of an orthonormal basis of the range of each spectral cluster of
/// `V* h V` (mapped back through `V`).
fn cluster_ranges(v: &Mat, h: &Mat) -> Result<(Vec<Mat>, f64)> {
    let compressed = v.ad_mul(&(h * v));
    let cl = spectral_clusters(&compressed)?;
    Ok((cl.vectors.iter().map(|w| v * w).collect(), cl.min_gap))
}

/// Minimal central projections, block sizes and multiplicities of the algebra
/// spanned by `span`, from generic elements. Retries with fresh draws when a
/// spectrum is too close to degenerate.
pub(crate) fn analyze_algebra<R: Rng>(span: &[Mat], rng: &mut R) -> Result<Analysis> {
    let mut last = None;
    for _ in 0..5 {
        match analyze_once(span, rng) {
            Ok(a) => return Ok(a),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn analyze_once<R: Rng>(span: &[Mat], rng: &mut R) -> Result<Analysis> {
    let n = span[0].nrows();
    let g1 = generic_in(span, rng);
    let g2 = generic_in(span, rng);
    let rows: Vec<CVec> = par::map_slice(span, |h| {
        let c1 = vectorize(&(h * &g1 - &g1 * h));
        let c2 = vectorize(&(h * &g2 - &g2 * h));
        CVec::from_iterator(2 * n * n, c1.iter().chain(c2.iter()).copied())
    });
    let system = Mat::from_columns(&rows);
    let null = linalg::null_space(&system, 1e-9);
    if null.ncols() == 0 {
        return Err(Error::Numeric("algebra has trivial center".into()));
    }
    let center: Vec<Mat> = (0..null.ncols())
        .map(|col| {
            let mut z = Mat::zeros(n, n);
            for (h, coef) in span.iter().zip(null.column(col).iter()) {
                z += h * *coef;
            }
            z
        })
        .collect();
    let z = generic_self_adjoint(&center, rng);
    let cl = spectral_clusters(&z)?;
    if cl.values.len() != center.len() {
        return Err(Error::Numeric(format!(
            "center has dimension {} but a generic central element has {} eigenvalues",
            center.len(),
            cl.values.len()
        )));
    }
    let mut min_gap = cl.min_gap;
    let h = generic_self_adjoint(span, rng);
    let mut central = Vec::new();
    let mut dims = Vec::new();
    let mut mult = Vec::new();
    for v in &cl.vectors {
        let (parts, gap) = cluster_ranges(v, &h)?;
        min_gap = min_gap.min(gap);
        let mu = parts[0].ncols();
        if parts.iter().any(|p| p.ncols() != mu) {
            return Err(Error::Numeric("block with unequal multiplicities".into()));
        }
        central.push(v * v.adjoint());
        dims.push(parts.len());
        mult.push(mu);
    }
    Ok(Analysis { central, dims, mult, min_gap })
}

/// Basis of level 0 over level −1 from partial isometries `v_i` in level 1
/// with `Σ v_i v_i* = 1` and `v_i* v_i ≤ e₁`; `λ_i = (pushdown v_i)*`.
///
/// `span` is any spanning list of level 1 as matrices on `L²(M)`.
pub(crate) fn partial_isometry_basis(l0: &Level, e: &Mat, span: &[Mat], seed: u64) -> Result<Vec<Mat>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let an = analyze_algebra(span, &mut rng)?;
    let n = e.nrows();
    let y = generic_in(span, &mut rng);
    let mut per_block: Vec<Vec<Mat>> = Vec::new();
    for (j, z) in an.central.iter().enumerate() {
        let mu = an.mult[j];
        let ez = e * z;
        let rank_ez = linalg::trace(&ez).re.round() as usize;
        if rank_ez == 0 || !rank_ez.is_multiple_of(mu) {
            return Err(Error::Consistency(format!(
                "e₁ has rank {rank_ez} in block {j} of multiplicity {mu}"
            )));
        }
        let r = rank_ez / mu;
        let zr = linalg::projection_range(z);
        let er = linalg::projection_range(&ez);
        let (ps, _) = cluster_ranges(&zr, &generic_self_adjoint(span, &mut rng))?;
        let (qs, _) = cluster_ranges(&er, &generic_self_adjoint(span, &mut rng))?;
        if ps.len() != an.dims[j] || qs.len() != r {
            return Err(Error::Consistency(format!("minimal projections miscounted in block {j}")));
        }
        let proj = |w: &Mat| w * w.adjoint();
        let mut vs = Vec::new();
        for group in ps.chunks(r) {
            let mut v = Mat::zeros(n, n);
            for (p, q) in group.iter().zip(&qs) {
                let w = proj(p) * &y * proj(q);
                let scale = hs_norm(&w) / (mu as f64).sqrt();
                if scale < 1e-8 {
                    return Err(Error::Numeric("degenerate partial isometry".into()));
                }
                v += w / c(scale);
            }
            vs.push(v);
        }
        per_block.push(vs);
    }
    let count = per_block.iter().map(Vec::len).max().unwrap_or(0);
    let mut lambda = Vec::with_capacity(count);
    for i in 0..count {
        let mut v = Mat::zeros(n, n);
        for vs in &per_block {
            if let Some(vi) = vs.get(i) {
                v += vi;
            }
        }
        let x0 = l0.element(&(&v * l0.unit_vector()));
        lambda.push(x0.adjoint());
    }
    Ok(lambda)
}

/// The level's own GNS basis, as a spanning list for [`partial_isometry_basis`].
pub(crate) fn rebuild_first_basis(tower: &Tower, seed: u64) -> Result<Vec<Mat>> {
    let l1 = tower.try_level(1)?;
    let e = tower.jones_projection(1)?;
    partial_isometry_basis(tower.level(0), e, &l1.basis(), seed)
}

/// Block-diagonal multi-matrix element of level `k ≤ 0` from an [`AlgebraElement`].
pub fn from_algebra_element(x: &AlgebraElement) -> Mat {
    x.to_block_diagonal()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn rel(a: &Mat, b: &Mat) -> f64 {
        relative(hs_norm(&(a - b)), hs_norm(a), hs_norm(b))
    }

    #[test]
    fn gns_of_c1() {
        let t = Tower::build(catalog::c1(), 1).unwrap();
        let l0 = t.level(0);
        assert_eq!(l0.dimension(), 4);
        let b = l0.basis();
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((l0.inner(x, y) - c(want)).norm() < 1e-14);
            }
        }
        assert!(rel(&l0.left_rep(&l0.identity()), &Mat::identity(4, 4)) < 1e-14);
    }

    #[test]
    fn left_rep_is_a_star_homomorphism() {
        let t = Tower::build(catalog::c3(), 2).unwrap();
        for k in 0..=2 {
            let l = t.level(k);
            let x = l.random_element(1);
            let y = l.random_element(2);
            assert!(rel(&l.left_rep(&(&x * &y)), &(l.left_rep(&x) * l.left_rep(&y))) < 1e-10);
            assert!(rel(&l.left_rep(&x.adjoint()), &l.left_rep(&x).adjoint()) < 1e-10);
        }
    }

    #[test]
    fn jones_projection_examples() {
        let t = Tower::build(catalog::c2(), 1).unwrap();
        let e = t.jones_projection(1).unwrap();
        assert_eq!(e.nrows(), 4);
        assert!((linalg::trace(e).re - 2.0).abs() < 1e-12);
        assert!(rel(&(e * e), e) < 1e-14 && rel(&e.adjoint(), e) < 1e-14);
        let l0 = t.level(0);
        let one = l0.unit_vector();
        assert!((e * one - one).norm() < 1e-12);
        let n = t.level(-1).random_element(3);
        let un = t.up_to(&n, -1, 1).unwrap();
        assert!(rel(&(e * &un * e), &(&un * e)) < 1e-12);
    }

    #[test]
    fn level_dimensions() {
        let t = Tower::build(catalog::c2(), 3).unwrap();
        assert_eq!(t.dimensions(), vec![2, 4, 8, 16, 32]);
        let t = Tower::build(catalog::c1(), 2).unwrap();
        assert_eq!(t.dimensions(), vec![1, 4, 16, 64]);
        for d in t.diagnostics() {
            assert_eq!(d.span_rank, d.predicted_dimension);
            assert!(d.closure_residual < 1e-10);
        }
    }

    #[test]
    fn depth_caps() {
        assert_eq!(max_depth(&catalog::c1()), 3);
        assert_eq!(max_depth(&catalog::c2()), 5);
        assert_eq!(max_depth(&catalog::c3()), 4);
        assert_eq!(max_depth(&catalog::c4()), MAX_DEPTH);
        assert!(matches!(Tower::build(catalog::c1(), 4), Err(Error::DepthRefused { .. })));
    }

    #[test]
    fn trace_examples() {
        let t = Tower::build(catalog::c2(), 2).unwrap();
        for k in 1..=2 {
            let l = t.level(k);
            assert!((l.trace(&l.identity()) - c(1.0)).norm() < 1e-12);
            let e = t.jones_projection(k).unwrap();
            assert!((t.trace(k, e).unwrap() - c(t.tau())).norm() < 1e-12);
            assert!((t.trace_extension(k, e).unwrap() - c(t.tau())).norm() < 1e-12);
        }
        // C2: the two blocks of M₁ carry weight τ·s_i = 1/4 on minimal projections.
        let bs = t.block_structure(1).unwrap();
        for (z, &m) in bs.central_projections.iter().zip(&bs.block_dims) {
            let w = t.trace(1, z).unwrap().re / m as f64;
            assert!((w - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn markov_property_and_traciality() {
        for inc in [catalog::c1(), catalog::c2(), catalog::c3()] {
            let t = Tower::build(inc, 2).unwrap();
            for k in 1..=2 {
                let x = t.level(k - 1).random_element(10);
                let ux = t.up(&x, k - 1).unwrap();
                let e = t.jones_projection(k).unwrap();
                let lhs = t.trace(k, &(&ux * e)).unwrap();
                let rhs = t.level(k - 1).trace(&x) * t.tau();
                assert!((lhs - rhs).norm() < 1e-10 * x.norm().max(1.0));
                let a = t.level(k).random_element(11);
                let b = t.level(k).random_element(12);
                let d = t.trace(k, &(&a * &b)).unwrap() - t.trace(k, &(&b * &a)).unwrap();
                assert!(d.norm() < 1e-10 * hs_norm(&a) * hs_norm(&b));
                let ext = t.trace_extension(k, &a).unwrap();
                assert!((ext - t.trace(k, &a).unwrap()).norm() < 1e-10 * hs_norm(&a));
            }
        }
    }

    #[test]
    fn decomposition_examples() {
        let t = Tower::build(catalog::c2(), 2).unwrap();
        for k in 1..=2 {
            let e = t.jones_projection(k).unwrap().clone();
            assert!(t.decomposition_residual(k, &e).unwrap() < 1e-8);
            let a = t.level(k - 1).random_element(5);
            assert!(t.decomposition_residual(k, &t.up(&a, k - 1).unwrap()).unwrap() < 1e-8);
            let x = t.level(k).random_element(6);
            assert!(t.decomposition_residual(k, &x).unwrap() < 1e-8);
        }
    }

    /// Oracle: orthogonal projection onto `up(level k−1)` in the level-`k` inner product.
    fn projection_oracle(t: &Tower, k: i32, x: &Mat) -> Mat {
        let low = t.level(k - 1);
        let high = t.level(k);
        let ups: Vec<Mat> = low.basis().iter().map(|b| t.up(b, k - 1).unwrap()).collect();
        let mut coeffs = Vec::new();
        for u in &ups {
            coeffs.push(high.inner(x, u));
        }
        let mut out = Mat::zeros(low.size(), low.size());
        for (b, cf) in low.basis().iter().zip(coeffs) {
            out += b * cf;
        }
        out
    }

    #[test]
    fn expectation_examples() {
        let t = Tower::build(catalog::c3(), 2).unwrap();
        for k in 0..=2 {
            if k >= 1 {
                let e = t.jones_projection(k).unwrap();
                let ee = t.expectation(k, e).unwrap();
                assert!(rel(&ee, &(t.level(k - 1).identity() * c(t.tau()))) < 1e-10);
            }
            let a = t.level(k - 1).random_element(7);
            assert!(rel(&t.expectation(k, &t.up(&a, k - 1).unwrap()).unwrap(), &a) < 1e-10);
            let x = t.level(k).random_element(8);
            let ex = t.expectation(k, &x).unwrap();
            assert!(rel(&ex, &projection_oracle(&t, k, &x)) < 1e-10);
            let y = t.level(k - 1).random_element(9);
            let lhs = t.trace(k, &(&x * t.up(&y, k - 1).unwrap())).unwrap();
            let rhs = t.level(k - 1).trace(&(&ex * &y));
            assert!((lhs - rhs).norm() < 1e-10 * hs_norm(&x) * hs_norm(&y));
        }
    }

    #[test]
    fn pushdown_examples() {
        let t = Tower::build(catalog::c2(), 2).unwrap();
        for k in 1..=2 {
            let e = t.jones_projection(k).unwrap();
            let x0 = t.pushdown(k, e).unwrap();
            assert!(rel(&x0, &t.level(k - 1).identity()) < 1e-10);
            let a = t.level(k - 1).random_element(3);
            assert!(rel(&t.pushdown(k, &t.up(&a, k - 1).unwrap()).unwrap(), &a) < 1e-10);
            let x = t.level(k).random_element(4);
            let p1 = t.pushdown(k, &x).unwrap();
            let p2 = t.pushdown_via_expectation(k, &x).unwrap();
            assert!(rel(&p1, &p2) < 1e-10);
        }
        // e₁ m e₁ pushes down to E_N(m) at level 1.
        let m = t.level(0).random_element(5);
        let e = t.jones_projection(1).unwrap();
        let x = e * t.up(&m, 0).unwrap();
        let x0 = t.pushdown(1, &x).unwrap();
        let en = t.up(&t.expectation(0, &m).unwrap(), -1).unwrap();
        assert!(rel(&x0, &en) < 1e-10);
    }

    #[test]
    fn block_structure_examples() {
        let t = Tower::build(catalog::c2(), 1).unwrap();
        let bs = t.block_structure(1).unwrap();
        assert_eq!(bs.block_dims, vec![2, 2]);
        assert_eq!(bs.inclusion_from_below.unwrap(), vec![vec![1, 1]]);
        let t = Tower::build(catalog::c1(), 1).unwrap();
        let bs = t.block_structure(1).unwrap();
        assert_eq!(bs.block_dims, vec![4]);
        let t = Tower::build(catalog::c4(), 1).unwrap();
        let bs = t.block_structure(1).unwrap();
        assert_eq!(bs.central_projections.len(), 1);
    }

    #[test]
    fn up_map_is_isometric_homomorphism() {
        let t = Tower::build(catalog::c3(), 3).unwrap();
        for k in -1..3 {
            let x = t.level(k).random_element(21);
            let y = t.level(k).random_element(22);
            let ux = t.up(&x, k).unwrap();
            let uy = t.up(&y, k).unwrap();
            assert!(rel(&t.up(&(&x * &y), k).unwrap(), &(&ux * &uy)) < 1e-10);
            assert!(rel(&t.up(&x.adjoint(), k).unwrap(), &ux.adjoint()) < 1e-10);
            let n_low = t.level(k).norm2(&x);
            let n_high = t.level(k + 1).norm2(&ux);
            assert!((n_low - n_high).abs() < 1e-10 * n_low);
            let one = t.up(&t.level(k).identity(), k).unwrap();
            assert!(rel(&one, &t.level(k + 1).identity()) < 1e-12);
        }
    }

    #[test]
    fn temperley_lieb_through_level_four() {
        let t = Tower::build(catalog::c3(), 4).unwrap();
        let top = 4;
        let es: Vec<Mat> = (1..=top).map(|j| t.jones_at(j, top).unwrap()).collect();
        for i in 0..es.len() {
            for j in 0..es.len() {
                let (a, b) = (&es[i], &es[j]);
                if i.abs_diff(j) == 1 {
                    assert!(rel(&(a * b * a), &(a * c(t.tau()))) < 1e-9);
                } else if i.abs_diff(j) >= 2 {
                    assert!(rel(&(a * b), &(b * a)) < 1e-9);
                }
            }
        }
    }
}
