//! Automorphisms of `M` leaving `N` globally invariant and their extensions up the tower.
//!
//! An automorphism of a multi-matrix algebra is `α(x) = u·P_σ(x)·u*`, where
//! `P_σ` moves block `j` to block `σ(j)` (requires `n_{σ(j)} = n_j`) and `u` is
//! unitary. Extensions `α_k` to higher levels are stored as matrices acting on
//! GNS coordinates, with `α_{k+1}(X) = Σ_i α_k(c_i) e_{k+1} α_k(λ_i)` for the
//! canonical decomposition `X = Σ_i c_i e_{k+1} λ_i`.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bases::Basis;
use crate::inclusion::Inclusion;
use crate::linalg::{c, gaussian_matrix, hs_norm, relative, Mat};
use crate::multimatrix::{span_basis, AlgebraElement};
use crate::par;
use crate::tower::Tower;
use crate::{Error, Result};

const UNITARY_TOL: f64 = 1e-10;
const INVARIANCE_TOL: f64 = 1e-8;

/// `α(x) = u·P_σ(x)·u*` on `M`.
#[derive(Clone, Debug)]
pub struct FdAutomorphism {
    sigma: Vec<usize>,
    u: AlgebraElement,
    n_invariant: bool,
}

pub fn make_automorphism(inc: &Inclusion, sigma: Vec<usize>, u: AlgebraElement) -> Result<FdAutomorphism> {
    let dims = inc.big.block_dims();
    let p = dims.len();
    if sigma.len() != p {
        return Err(Error::Precondition(format!("σ has length {}, M has {p} blocks", sigma.len())));
    }
    let mut seen = vec![false; p];
    for &s in &sigma {
        if s >= p || seen[s] {
            return Err(Error::Precondition(format!("σ = {sigma:?} is not a permutation")));
        }
        seen[s] = true;
    }
    if let Some(j) = (0..p).find(|&j| dims[sigma[j]] != dims[j]) {
        return Err(Error::Precondition(format!(
            "σ sends block {j} of size {} to block {} of size {}",
            dims[j], sigma[j], dims[sigma[j]]
        )));
    }
    if **u.parent() != *inc.big {
        return Err(Error::ParentMismatch("u must be an element of M".into()));
    }
    let one = AlgebraElement::identity(&inc.big);
    let defect = (&(&u.adjoint() * &u) - &one).max_abs();
    if defect > UNITARY_TOL {
        return Err(Error::Precondition(format!("u is not unitary: ‖u*u − 1‖ = {defect:.3e}")));
    }
    let mut alpha = FdAutomorphism { sigma, u, n_invariant: false };
    alpha.n_invariant = alpha.invariance_defect(inc) == 0;
    Ok(alpha)
}

impl FdAutomorphism {
    pub fn identity(inc: &Inclusion) -> Self {
        let p = inc.big.num_blocks();
        Self { sigma: (0..p).collect(), u: AlgebraElement::identity(&inc.big), n_invariant: true }
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn unitary(&self) -> &AlgebraElement {
        &self.u
    }

    /// Whether `α(N) = N`.
    pub fn is_n_invariant(&self) -> bool {
        self.n_invariant
    }

    fn permute(&self, x: &AlgebraElement) -> AlgebraElement {
        let mut blocks = x.blocks().to_vec();
        for (j, &s) in self.sigma.iter().enumerate() {
            blocks[s] = x.block(j).clone();
        }
        AlgebraElement::new(x.parent(), blocks).expect("σ preserves block sizes")
    }

    pub fn apply(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        let px = self.permute(x);
        self.u.try_mul(&px)?.try_mul(&self.u.adjoint())
    }

    /// `α` on the block-diagonal representation of level 0.
    pub fn apply_matrix(&self, inc: &Inclusion, x: &Mat) -> Result<Mat> {
        let xe = AlgebraElement::from_block_diagonal(&inc.big, x)?;
        Ok(self.apply(&xe)?.to_block_diagonal())
    }

    /// `dim span(α(N) ∪ N) − dim N`; zero exactly when `α(N) = N`.
    pub fn invariance_defect(&self, inc: &Inclusion) -> usize {
        let units: Vec<AlgebraElement> =
            inc.small.matrix_units().iter().map(|u| inc.embed(u).expect("unit of N")).collect();
        let mut all = units.clone();
        all.extend(units.iter().map(|x| self.apply(x).expect("element of M")));
        span_basis(&all).map(|b| b.rank()).unwrap_or(usize::MAX) - inc.small.dimension()
    }

    /// `α∘β`.
    pub fn compose(&self, beta: &Self) -> Self {
        let sigma = beta.sigma.iter().map(|&s| self.sigma[s]).collect();
        let u = &self.u * &self.permute(&beta.u);
        Self { sigma, u, n_invariant: self.n_invariant && beta.n_invariant }
    }

    /// Residuals of `α(xy) = α(x)α(y)`, `α(x*) = α(x)*`, `α(1) = 1` on matrix units.
    pub fn homomorphism_residual(&self, inc: &Inclusion) -> f64 {
        let units = inc.big.matrix_units();
        let mut worst: f64 = 0.0;
        let img: Vec<AlgebraElement> = units.iter().map(|x| self.apply(x).expect("unit")).collect();
        for (x, ax) in units.iter().zip(&img) {
            for (y, ay) in units.iter().zip(&img) {
                let lhs = self.apply(&(x * y)).expect("unit");
                worst = worst.max((&lhs - &(ax * ay)).max_abs());
            }
            worst = worst.max((&self.apply(&x.adjoint()).expect("unit") - &ax.adjoint()).max_abs());
        }
        let one = AlgebraElement::identity(&inc.big);
        worst.max((&self.apply(&one).expect("unit") - &one).max_abs())
    }
}

/// `max |tr(α(x)) − tr(x)|` over the matrix units of `M`. Requires `α(N) = N`.
pub fn check_trace_preserving(inc: &Inclusion, alpha: &FdAutomorphism) -> Result<f64> {
    if !alpha.is_n_invariant() {
        return Err(Error::Precondition("α does not leave N invariant".into()));
    }
    let mut worst: f64 = 0.0;
    for x in inc.big.matrix_units() {
        worst = worst.max((alpha.apply(&x)?.trace() - x.trace()).norm());
    }
    Ok(worst)
}

/// Haar-type random unitary: QR of a Gaussian matrix with phases fixed.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    let g = gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut out = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..n {
            out[(i, j)] *= phase;
        }
    }
    out
}

/// Pairs `(π, σ)` of block permutations of `N` and `M` with
/// `G(π(i), σ(j)) = G(i, j)` and preserved block sizes.
pub fn symmetries(inc: &Inclusion) -> Vec<(Vec<usize>, Vec<usize>)> {
    let g = &inc.matrix;
    let dn = inc.small.block_dims();
    let dm = inc.big.block_dims();
    let mut out = Vec::new();
    for pi in (0..g.rows()).permutations(g.rows()) {
        if (0..g.rows()).any(|i| dn[pi[i]] != dn[i]) {
            continue;
        }
        for sigma in (0..g.cols()).permutations(g.cols()) {
            if (0..g.cols()).any(|j| dm[sigma[j]] != dm[j]) {
                continue;
            }
            let ok = (0..g.rows()).all(|i| (0..g.cols()).all(|j| g.get(pi[i], sigma[j]) == g.get(i, j)));
            if ok {
                out.push((pi.clone(), sigma));
            }
        }
    }
    out
}

/// Seeded random automorphism with `α(N) = N`:
/// `Ad(embed(w)·c·u₀) ∘ P_σ` with `w ∈ N` unitary, `c` a unitary of `N' ∩ M`
/// and `u₀` the permutation matching copies of `N`-blocks under `(π, σ)`.
pub fn random_n_invariant(inc: &Inclusion, seed: u64) -> Result<FdAutomorphism> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let syms = symmetries(inc);
    let (pi, sigma) = syms[rng.random_range(0..syms.len())].clone();
    let layout = inc.layout();
    let dm = inc.big.block_dims();

    let mut u0_blocks: Vec<Mat> = dm.iter().map(|&n| Mat::zeros(n, n)).collect();
    for (j, copies) in layout.iter().enumerate() {
        let target = sigma[j];
        let mut counters = vec![0usize; inc.small.num_blocks()];
        for &(i, off) in copies {
            let r = counters[i];
            counters[i] += 1;
            let (_, off_t) = layout[target].iter().filter(|(ii, _)| *ii == pi[i]).nth(r).copied().ok_or_else(|| {
                Error::Consistency("copy counts differ under the block symmetry".into())
            })?;
            let d = inc.small.block_dims()[i];
            for p in 0..d {
                u0_blocks[target][(off_t + p, off + p)] = c(1.0);
            }
        }
    }
    let u0 = AlgebraElement::new(&inc.big, u0_blocks)?;

    let mut c_blocks: Vec<Mat> = dm.iter().map(|&n| Mat::zeros(n, n)).collect();
    for (j, copies) in layout.iter().enumerate() {
        for i in 0..inc.small.num_blocks() {
            let offs: Vec<usize> = copies.iter().filter(|(ii, _)| *ii == i).map(|&(_, o)| o).collect();
            if offs.is_empty() {
                continue;
            }
            let un = random_unitary(&mut rng, offs.len());
            let d = inc.small.block_dims()[i];
            for (r, &or) in offs.iter().enumerate() {
                for (s, &os) in offs.iter().enumerate() {
                    for p in 0..d {
                        c_blocks[j][(or + p, os + p)] = un[(r, s)];
                    }
                }
            }
        }
    }
    let cu = AlgebraElement::new(&inc.big, c_blocks)?;

    let w_blocks = inc.small.block_dims().iter().map(|&d| random_unitary(&mut rng, d)).collect();
    let w = inc.embed(&AlgebraElement::new(&inc.small, w_blocks)?)?;

    let u = &(&w * &cu) * &u0;
    make_automorphism(inc, sigma, u)
}

/// Matrix of `α` on the GNS coordinates of level 0.
pub fn level0_matrix(tower: &Tower, alpha: &FdAutomorphism) -> Result<Mat> {
    let l0 = tower.level(0);
    let cols = (0..l0.dimension())
        .map(|a| Ok(l0.coords(&alpha.apply_matrix(tower.inclusion(), &l0.basis_element(a))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Mat::from_columns(&cols))
}

/// The extensions `α_0, …, α_K` as matrices on GNS coordinates.
#[derive(Clone, Debug)]
pub struct TowerAutomorphism {
    maps: Vec<Mat>,
    /// Basis of level `k` over `k − 1` used to build `α_{k+1}`.
    bases: Vec<Vec<Mat>>,
}

impl TowerAutomorphism {
    pub fn depth(&self) -> usize {
        self.maps.len() - 1
    }

    pub fn matrix(&self, k: i32) -> &Mat {
        &self.maps[k as usize]
    }

    pub fn apply(&self, tower: &Tower, k: i32, x: &Mat) -> Mat {
        let l = tower.level(k);
        l.element(&(&self.maps[k as usize] * l.coords(x)))
    }

    /// `α_k∘β_k` at every level.
    pub fn compose(&self, other: &Self) -> Self {
        let maps = self.maps.iter().zip(&other.maps).map(|(a, b)| a * b).collect();
        Self { maps, bases: self.bases.clone() }
    }
}

/// Relative defect of `α_k(up(M_{k−1})) ⊆ up(M_{k−1})` over the GNS basis of level `k − 1`.
fn invariance_residual(tower: &Tower, alpha: &TowerAutomorphism, k: i32) -> Result<f64> {
    let low = tower.level(k - 1);
    let mut worst: f64 = 0.0;
    for b in low.basis() {
        let y = alpha.apply(tower, k, &tower.up(&b, k - 1)?);
        let back = tower.up(&tower.expectation(k, &y)?, k - 1)?;
        worst = worst.max(relative(hs_norm(&(&y - &back)), hs_norm(&y), 0.0));
    }
    Ok(worst)
}

fn extend_step(tower: &Tower, alpha: &TowerAutomorphism, k: i32, lambda: &[Mat]) -> Result<Mat> {
    let next = tower.try_level(k + 1)?;
    let e = tower.jones_projection(k + 1)?;
    let al: Vec<Mat> = lambda.iter().map(|l| tower.up(&alpha.apply(tower, k, l), k)).collect::<Result<_>>()?;
    let cols: Vec<Result<_>> = par::map_range(next.dimension(), |a| {
        let x = next.basis_element(a);
        let coeffs = tower.canonical_decomposition_with(k + 1, &x, lambda)?;
        let mut img = Mat::zeros(next.size(), next.size());
        for (ci, ali) in coeffs.iter().zip(&al) {
            img += tower.up(&alpha.apply(tower, k, ci), k)? * e * ali;
        }
        Ok(next.coords(&img))
    });
    Ok(Mat::from_columns(&cols.into_iter().collect::<Result<Vec<_>>>()?))
}

/// `α_1` on level 1 from `α_0` and a basis of `M` over `N`.
pub fn extend_automorphism(tower: &Tower, basis: &Basis, alpha: &FdAutomorphism) -> Result<TowerAutomorphism> {
    extend_tower_with(tower, alpha, 1, basis)
}

/// `α_0, …, α_K` using the tower's own chain bases.
pub fn extend_tower(tower: &Tower, alpha: &FdAutomorphism, depth: usize) -> Result<TowerAutomorphism> {
    let b = crate::bases::construct_basis(tower)?;
    extend_tower_with(tower, alpha, depth, &b)
}

/// As [`extend_tower`], starting from a given basis of `M` over `N` and lifting it
/// (`λ ↦ τ^{-1/2} e_{k+1} λ`) for the higher steps. The invariance hypothesis
/// `α_k(M_{k−1}) = M_{k−1}` is re-checked before every step.
pub fn extend_tower_with(
    tower: &Tower,
    alpha: &FdAutomorphism,
    depth: usize,
    basis: &Basis,
) -> Result<TowerAutomorphism> {
    if !alpha.is_n_invariant() {
        return Err(Error::Precondition("α₀ does not leave N invariant".into()));
    }
    if basis.upper() != 0 || basis.lower() != -1 {
        return Err(Error::Precondition("extension needs a basis of M over N".into()));
    }
    tower.try_level(depth as i32)?;
    let mut out = TowerAutomorphism { maps: vec![level0_matrix(tower, alpha)?], bases: Vec::new() };
    let mut lambda: Vec<Mat> = basis.elements().to_vec();
    let s = c(tower.tau().powf(-0.5));
    for k in 0..depth as i32 {
        let defect = invariance_residual(tower, &out, k)?;
        if defect > INVARIANCE_TOL {
            return Err(Error::Precondition(format!(
                "α_{k} does not leave level {} invariant (defect {defect:.3e})",
                k - 1
            )));
        }
        if k > 0 {
            let e = tower.jones_projection(k)?;
            lambda = lambda.iter().map(|l| Ok(e * tower.up(l, k - 1)? * s)).collect::<Result<_>>()?;
        }
        let next = extend_step(tower, &out, k, &lambda)?;
        out.bases.push(lambda.clone());
        out.maps.push(next);
    }
    Ok(out)
}

/// Residuals of the properties an extension `α_k` must have.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ExtensionReport {
    pub level: i32,
    pub homomorphism: f64,
    pub star: f64,
    /// `max_j ‖α_k(e_j) − e_j‖₂` for `1 ≤ j ≤ k`.
    pub fixes_jones: f64,
    /// `‖α_k(up(y)) − up(α_{k−1}(y))‖₂`.
    pub restriction: f64,
    pub trace: f64,
    /// `‖A*A − 1‖` for the coordinate matrix `A` (isometry).
    pub unitarity: f64,
    /// `‖E(α_k(X)) − α_{k−1}(E(X))‖₂`.
    pub commutes_with_expectation: f64,
    /// `α_k(up(M_{k−1})) ⊆ up(M_{k−1})`.
    pub invariance: f64,
}

impl ExtensionReport {
    pub fn residuals(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("homomorphism", self.homomorphism),
            ("star", self.star),
            ("fixes_jones", self.fixes_jones),
            ("restriction", self.restriction),
            ("trace", self.trace),
            ("unitarity", self.unitarity),
            ("commutes_with_expectation", self.commutes_with_expectation),
            ("invariance", self.invariance),
        ]
    }
}

pub fn check_extension(tower: &Tower, alpha: &TowerAutomorphism, k: i32, seed: u64) -> Result<ExtensionReport> {
    if k < 1 || k as usize > alpha.depth() {
        return Err(Error::Precondition(format!("extension has no level {k}")));
    }
    let lk = tower.level(k);
    let rel = |a: &Mat, b: &Mat| relative(lk.norm2(&(a - b)), lk.norm2(a), lk.norm2(b));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = ExtensionReport { level: k, ..Default::default() };
    for _ in 0..4 {
        let x = lk.random_element_with(&mut rng);
        let y = lk.random_element_with(&mut rng);
        let ax = alpha.apply(tower, k, &x);
        let ay = alpha.apply(tower, k, &y);
        r.homomorphism = r.homomorphism.max(rel(&alpha.apply(tower, k, &(&x * &y)), &(&ax * &ay)));
        r.star = r.star.max(rel(&alpha.apply(tower, k, &x.adjoint()), &ax.adjoint()));
        let tx = lk.trace(&x);
        r.trace = r.trace.max((lk.trace(&ax) - tx).norm() / lk.norm2(&x));
        let lhs = tower.expectation(k, &ax)?;
        let rhs = alpha.apply(tower, k - 1, &tower.expectation(k, &x)?);
        let low = tower.level(k - 1);
        r.commutes_with_expectation = r
            .commutes_with_expectation
            .max(relative(low.norm2(&(&lhs - &rhs)), low.norm2(&lhs), low.norm2(&rhs)));
        let z = low.random_element_with(&mut rng);
        let up_then = alpha.apply(tower, k, &tower.up(&z, k - 1)?);
        let then_up = tower.up(&alpha.apply(tower, k - 1, &z), k - 1)?;
        r.restriction = r.restriction.max(rel(&up_then, &then_up));
    }
    for j in 1..=k {
        let e = tower.jones_at(j, k)?;
        r.fixes_jones = r.fixes_jones.max(rel(&alpha.apply(tower, k, &e), &e));
    }
    let a = alpha.matrix(k);
    let n = a.nrows();
    r.unitarity = hs_norm(&(a.adjoint() * a - Mat::identity(n, n))) / (n as f64).sqrt();
    r.invariance = invariance_residual(tower, alpha, k)?;
    Ok(r)
}

/// `‖A − B‖ / ‖A‖` between two extensions at level `k`.
pub fn extension_distance(a: &TowerAutomorphism, b: &TowerAutomorphism, k: i32) -> f64 {
    let (x, y) = (a.matrix(k), b.matrix(k));
    relative(hs_norm(&(x - y)), hs_norm(x), hs_norm(y))
}
