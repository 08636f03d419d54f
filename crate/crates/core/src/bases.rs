//! Pimsner–Popa bases of tower levels over lower levels.
//!
//! A basis of level `a` over level `b < a` is a finite family `λ_i` in level
//! `a` such that any of the following equivalent conditions holds:
//!
//! 1. `Q = (E_b(λ_i λ_j*))` is a projection in `M_n(M_b)` of normalized trace `τ_{ab}⁻¹/n`;
//! 2. `Σ λ_i* f λ_i = 1`, with `f = e_{[b,a]}` the Jones projection for `M_b ⊆ M_a`;
//! 3. `x = Σ E_b(x λ_i*) λ_i` for every `x` in level `a`.
//!
//! Here `τ_{ab} = τ^{a−b}` and `E_b` is the composite trace-preserving expectation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::{c, Mat};
use crate::multimatrix::AlgebraElement;
use crate::multistep::e_interval;
use crate::par;
use crate::tower::{rebuild_first_basis, Tower};
use crate::{Error, Result};

/// Default ceiling on tower-basis cardinality `n^k`.
pub const DEFAULT_CARDINALITY_CAP: usize = 4096;

/// Default number of random samples for condition 3 (in addition to the GNS basis).
pub const DEFAULT_SAMPLES: usize = 16;

#[derive(Clone, Debug)]
pub struct Basis {
    upper: i32,
    lower: i32,
    elements: Vec<Mat>,
    /// `q[i][j] = E_lower(λ_i λ_j*)`.
    q: Vec<Vec<Mat>>,
    index_tau: f64,
}

impl Basis {
    /// Wraps a family of level-`upper` elements and computes its `Q` matrix.
    pub fn new(tower: &Tower, upper: i32, lower: i32, elements: Vec<Mat>) -> Result<Self> {
        if lower >= upper || lower < -1 {
            return Err(Error::Precondition(format!("basis of level {upper} over level {lower}")));
        }
        let lvl = tower.try_level(upper)?;
        if elements.is_empty() {
            return Err(Error::Precondition("empty family".into()));
        }
        if elements.iter().any(|x| x.nrows() != lvl.size() || x.ncols() != lvl.size()) {
            return Err(Error::Shape(format!("elements must be {0}x{0} matrices of level {upper}", lvl.size())));
        }
        let n = elements.len();
        let flat: Vec<Result<Mat>> = par::map_range(n * n, |ij| {
            let (i, j) = (ij / n, ij % n);
            tower.expectation_to(&(&elements[i] * elements[j].adjoint()), upper, lower)
        });
        let mut q = vec![Vec::with_capacity(n); n];
        for (ij, r) in flat.into_iter().enumerate() {
            q[ij / n].push(r?);
        }
        Ok(Self { upper, lower, elements, q, index_tau: tower.tau().powi(upper - lower) })
    }

    /// Basis of level 0 over level −1 from elements of `M`.
    pub fn from_algebra_elements(tower: &Tower, xs: &[AlgebraElement]) -> Result<Self> {
        let els = xs.iter().map(|x| x.to_block_diagonal()).collect();
        Self::new(tower, 0, -1, els)
    }

    pub fn upper(&self) -> i32 {
        self.upper
    }

    pub fn lower(&self) -> i32 {
        self.lower
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Mat] {
        &self.elements
    }

    pub fn q_entry(&self, i: usize, j: usize) -> &Mat {
        &self.q[i][j]
    }

    pub fn q_matrix(&self) -> &[Vec<Mat>] {
        &self.q
    }

    /// `τ^{upper − lower}`; its inverse is the index of the pair.
    pub fn index_tau(&self) -> f64 {
        self.index_tau
    }

    /// Elements of a level-0 basis as algebra elements of `M`.
    pub fn to_algebra_elements(&self, tower: &Tower) -> Result<Vec<AlgebraElement>> {
        self.elements.iter().map(|x| tower.to_algebra_element(self.upper, x)).collect()
    }
}

/// The basis of `M` over `N` built from partial isometries under `e₁`.
pub fn construct_basis(tower: &Tower) -> Result<Basis> {
    chain_basis(tower, 0)
}

/// Same construction with different generic draws, giving a different basis.
pub fn construct_basis_seeded(tower: &Tower, seed: u64) -> Result<Basis> {
    let els = rebuild_first_basis(tower, seed)?;
    Basis::new(tower, 0, -1, els)
}

/// Basis of level `k` over level `k − 1` used by the tower itself.
pub fn chain_basis(tower: &Tower, k: i32) -> Result<Basis> {
    let els = tower.chain_basis(k)?.to_vec();
    Basis::new(tower, k, k - 1, els)
}

fn rel2(tower: &Tower, k: i32, a: &Mat, b: &Mat) -> f64 {
    let l = tower.level(k);
    crate::linalg::relative(l.norm2(&(a - b)), l.norm2(a), l.norm2(b))
}

/// Normalized 2-norm on `M_n(M_lower)`: `(n⁻¹ Σ_ij tr(a_ij* a_ij))^{1/2}`.
fn mn_norm(tower: &Tower, lower: i32, a: &[Vec<Mat>]) -> f64 {
    let l = tower.level(lower);
    let n = a.len() as f64;
    (a.iter().flatten().map(|x| l.inner(x, x).re).sum::<f64>() / n).max(0.0).sqrt()
}

/// Residuals of the three basis conditions.
#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct ConditionReport {
    pub cardinality: usize,
    /// `‖Q² − Q‖ / ‖Q‖`.
    pub q_idempotent: f64,
    /// `‖Q* − Q‖ / ‖Q‖`.
    pub q_self_adjoint: f64,
    /// `|tr(Q) − τ⁻¹/n| / (τ⁻¹/n)`.
    pub q_trace: f64,
    /// `‖Σ λ_i* f λ_i − 1‖₂`.
    pub condition_2: f64,
    /// `max ‖x − Σ E(x λ_i*) λ_i‖₂ / ‖x‖₂`.
    pub condition_3: f64,
    /// `max ‖x − Σ λ_i* E(λ_i x)‖₂ / ‖x‖₂`.
    pub condition_3_adjoint: f64,
}

impl ConditionReport {
    pub fn condition_1(&self) -> f64 {
        self.q_idempotent.max(self.q_self_adjoint).max(self.q_trace)
    }

    pub fn max(&self) -> f64 {
        [self.condition_1(), self.condition_2, self.condition_3, self.condition_3_adjoint]
            .into_iter()
            .fold(0.0, par::nan_max)
    }
}

/// Condition 1: returns `(‖Q² − Q‖ rel, ‖Q* − Q‖ rel, trace residual)`.
pub fn verify_condition_1(tower: &Tower, basis: &Basis) -> (f64, f64, f64) {
    let n = basis.len();
    let q = &basis.q;
    let low = tower.level(basis.lower);
    let q2: Vec<Vec<Mat>> = par::map_range(n, |i| {
        (0..n)
            .map(|j| {
                let mut s = Mat::zeros(low.size(), low.size());
                for l in 0..n {
                    s += &q[i][l] * &q[l][j];
                }
                s
            })
            .collect()
    });
    let diff: Vec<Vec<Mat>> = (0..n).map(|i| (0..n).map(|j| &q2[i][j] - &q[i][j]).collect()).collect();
    let adj: Vec<Vec<Mat>> = (0..n).map(|i| (0..n).map(|j| q[j][i].adjoint() - &q[i][j]).collect()).collect();
    let nq = mn_norm(tower, basis.lower, q);
    let idem = crate::linalg::relative(mn_norm(tower, basis.lower, &diff), nq, mn_norm(tower, basis.lower, &q2));
    let sa = crate::linalg::relative(mn_norm(tower, basis.lower, &adj), nq, nq);
    let trace: f64 = (0..n).map(|i| low.trace(&q[i][i]).re).sum::<f64>() / n as f64;
    let want = 1.0 / (basis.index_tau * n as f64);
    (idem, sa, (trace - want).abs() / want)
}

/// Condition 2 against `e_{[lower, upper]}` in level `2·upper − lower`.
pub fn verify_condition_2(tower: &Tower, basis: &Basis) -> Result<f64> {
    let f = e_interval(tower, basis.lower, (basis.upper - basis.lower) as usize)?;
    Ok(condition_2_with(tower, basis, &f.value, f.level))
}

/// `‖Σ λ_i* f λ_i − 1‖₂` for a given projection `f` in level `top`.
pub fn condition_2_with(tower: &Tower, basis: &Basis, f: &Mat, top: i32) -> f64 {
    let terms: Vec<Mat> = par::map_slice(&basis.elements, |l| {
        let u = tower.up_to(l, basis.upper, top).expect("levels built");
        u.adjoint() * f * u
    });
    let lt = tower.level(top);
    let mut s = Mat::zeros(lt.size(), lt.size());
    for t in &terms {
        s += t;
    }
    rel2(tower, top, &s, &lt.identity())
}

/// Condition 3 and its adjoint form on `samples` random elements plus the GNS basis.
pub fn verify_condition_3(tower: &Tower, basis: &Basis, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let up = tower.level(basis.upper);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<Mat> = (0..samples).map(|_| up.random_element_with(&mut rng)).collect();
    xs.extend(up.basis());
    let res: Vec<Result<(f64, f64)>> = par::map_slice(&xs, |x| {
        let row = coordinates(tower, basis, x)?;
        let back = reconstruct(tower, basis, &row)?;
        let mut adj = Mat::zeros(up.size(), up.size());
        for l in &basis.elements {
            let coef = tower.expectation_to(&(l * x), basis.upper, basis.lower)?;
            adj += l.adjoint() * tower.up_to(&coef, basis.lower, basis.upper)?;
        }
        Ok((rel2(tower, basis.upper, x, &back), rel2(tower, basis.upper, x, &adj)))
    });
    let mut out = (0.0, 0.0);
    for r in res {
        let (a, b) = r?;
        out = (par::nan_max(out.0, a), par::nan_max(out.1, b));
    }
    Ok(out)
}

/// All three conditions.
pub fn verify(tower: &Tower, basis: &Basis, seed: u64) -> Result<ConditionReport> {
    let (q_idempotent, q_self_adjoint, q_trace) = verify_condition_1(tower, basis);
    let condition_2 = verify_condition_2(tower, basis)?;
    let (condition_3, condition_3_adjoint) = verify_condition_3(tower, basis, DEFAULT_SAMPLES, seed)?;
    Ok(ConditionReport {
        cardinality: basis.len(),
        q_idempotent,
        q_self_adjoint,
        q_trace,
        condition_2,
        condition_3,
        condition_3_adjoint,
    })
}

/// Coordinate row `(E(x λ_1*), …, E(x λ_n*))` over the lower level.
pub fn coordinates(tower: &Tower, basis: &Basis, x: &Mat) -> Result<Vec<Mat>> {
    basis.elements.iter().map(|l| tower.expectation_to(&(x * l.adjoint()), basis.upper, basis.lower)).collect()
}

/// `Σ r_i λ_i`.
pub fn reconstruct(tower: &Tower, basis: &Basis, row: &[Mat]) -> Result<Mat> {
    let up = tower.level(basis.upper);
    let mut out = Mat::zeros(up.size(), up.size());
    for (r, l) in row.iter().zip(&basis.elements) {
        out += tower.up_to(r, basis.lower, basis.upper)? * l;
    }
    Ok(out)
}

/// `r·Q` for a row over the lower level.
pub fn row_times_q(basis: &Basis, row: &[Mat]) -> Vec<Mat> {
    let n = basis.len();
    (0..n)
        .map(|j| {
            let mut s = Mat::zeros(row[0].nrows(), row[0].ncols());
            for (i, r) in row.iter().enumerate() {
                s += r * &basis.q[i][j];
            }
            s
        })
        .collect()
}

/// Relative residual of `r·Q − r` in the normalized row norm.
pub fn row_q_residual(tower: &Tower, basis: &Basis, row: &[Mat]) -> f64 {
    let rq = row_times_q(basis, row);
    let low = tower.level(basis.lower);
    let norm = |v: &[Mat]| v.iter().map(|x| low.inner(x, x).re).sum::<f64>().max(0.0).sqrt();
    let diff: Vec<Mat> = rq.iter().zip(row).map(|(a, b)| a - b).collect();
    crate::linalg::relative(norm(&diff), norm(row), norm(&rq))
}

/// `{λ_i μ_j}` (lexicographic in `(i, j)`) for `λ` over `b ⊆ a` and `μ` over `a ⊆ c`.
pub fn compose_bases(tower: &Tower, inner: &Basis, outer: &Basis) -> Result<Basis> {
    if inner.upper != outer.lower {
        return Err(Error::Precondition(format!(
            "cannot compose a basis of {} over {} with one of {} over {}",
            inner.upper, inner.lower, outer.upper, outer.lower
        )));
    }
    let mut els = Vec::with_capacity(inner.len() * outer.len());
    for l in &inner.elements {
        let ul = tower.up_to(l, inner.upper, outer.upper)?;
        for m in &outer.elements {
            els.push(&ul * m);
        }
    }
    Basis::new(tower, outer.upper, inner.lower, els)
}

/// `{τ^{-1/2} e_{k+1} λ_i}`: basis of level `k + 1` over `k` from one of `k` over `k − 1`.
pub fn lift_basis(tower: &Tower, basis: &Basis) -> Result<Basis> {
    if basis.upper != basis.lower + 1 {
        return Err(Error::Precondition("lift needs a basis over the level immediately below".into()));
    }
    let k = basis.upper;
    let e = tower.jones_projection(k + 1)?;
    let s = c(tower.tau().powf(-0.5));
    let els = basis.elements.iter().map(|l| Ok(e * tower.up(l, k)? * s)).collect::<Result<Vec<_>>>()?;
    Basis::new(tower, k + 1, k, els)
}

/// Exponent of `τ` in the tower-basis prefactor as an exact fraction `(num, 4)`.
pub fn tower_prefactor_exponent(k: usize) -> (i64, i64) {
    let k = k as i64;
    (-k * (k - 1), 4)
}

/// All `n^k` products `τ^{-k(k−1)/4} λ_{i₁} e₁ λ_{i₂} e₂e₁ λ_{i₃} ⋯ (e_{k−1}⋯e₁) λ_{i_k}`,
/// a basis of level `k − 1` over `N`. Indices run lexicographically.
pub fn tower_basis(tower: &Tower, k: usize, basis: &Basis, cap: usize) -> Result<Basis> {
    if basis.upper != 0 || basis.lower != -1 {
        return Err(Error::Precondition("tower basis starts from a basis of M over N".into()));
    }
    if k == 0 {
        return Err(Error::Precondition("tower basis needs k ≥ 1".into()));
    }
    let n = basis.len();
    let count = n.checked_pow(k as u32).unwrap_or(usize::MAX);
    if count > cap {
        return Err(Error::CardinalityCap { count, cap });
    }
    let top = k as i32 - 1;
    tower.try_level(top)?;
    let mut current: Vec<Mat> = basis.elements.clone();
    for r in 1..k as i32 {
        // (e_r ⋯ e_1) at level r.
        let mut word = tower.level(r).identity();
        for j in (1..=r).rev() {
            word *= tower.jones_at(j, r)?;
        }
        let lambdas: Vec<Mat> =
            basis.elements.iter().map(|l| tower.up_to(l, 0, r)).collect::<Result<_>>()?;
        let prefix: Vec<Mat> = current.iter().map(|p| tower.up(p, r - 1)).collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(prefix.len() * n);
        for p in &prefix {
            let pw = p * &word;
            for l in &lambdas {
                next.push(&pw * l);
            }
        }
        current = next;
    }
    let (num, den) = tower_prefactor_exponent(k);
    let s = c(tower.tau().powf(num as f64 / den as f64));
    let els = current.into_iter().map(|x| x * s).collect();
    Basis::new(tower, top, -1, els)
}

/// `Σ λ_i* λ_i`.
pub fn watatani_index(tower: &Tower, basis: &Basis) -> Mat {
    let up = tower.level(basis.upper);
    let mut s = Mat::zeros(up.size(), up.size());
    for l in &basis.elements {
        s += l.adjoint() * l;
    }
    s
}

/// `‖Σ λ_i* λ_i − τ⁻¹·1‖₂ / τ⁻¹`.
pub fn watatani_residual(tower: &Tower, basis: &Basis) -> f64 {
    let w = watatani_index(tower, basis);
    let target = tower.level(basis.upper).identity() * c(1.0 / basis.index_tau);
    rel2(tower, basis.upper, &w, &target)
}

/// The family with `λ_1` replaced by `λ_1 + ε·1`.
pub fn perturbed(tower: &Tower, basis: &Basis, eps: f64) -> Result<Basis> {
    let mut els = basis.elements.clone();
    els[0] += tower.level(basis.upper).identity() * c(eps);
    Basis::new(tower, basis.upper, basis.lower, els)
}

/// `{Σ_j U_ij λ_j}` for a scalar isometry `U` (`n' × n`, `U*U = 1`).
pub fn mixed(tower: &Tower, basis: &Basis, u: &Mat) -> Result<Basis> {
    if u.ncols() != basis.len() {
        return Err(Error::Shape("mixing matrix has the wrong number of columns".into()));
    }
    let els = (0..u.nrows())
        .map(|i| {
            let mut s = Mat::zeros(basis.elements[0].nrows(), basis.elements[0].ncols());
            for (j, l) in basis.elements.iter().enumerate() {
                s += l * u[(i, j)];
            }
            s
        })
        .collect();
    Basis::new(tower, basis.upper, basis.lower, els)
}

/// `{w λ_i}` for a unitary `w` of the lower level.
pub fn left_multiplied(tower: &Tower, basis: &Basis, w: &Mat) -> Result<Basis> {
    let uw = tower.up_to(w, basis.lower, basis.upper)?;
    let els = basis.elements.iter().map(|l| &uw * l).collect();
    Basis::new(tower, basis.upper, basis.lower, els)
}
