//! Multi-step Jones projections `e_{[k,k+m]}` and the identities around them.
//!
//! `e_{[k,k+m]} = τ^{-m(m−1)/2} (e_{k+m+1}⋯e_{k+2})(e_{k+m+2}⋯e_{k+3})⋯(e_{k+2m}⋯e_{k+m+1})`
//! lives in level `k + 2m` and is the Jones projection for `M_k ⊆ M_{k+m}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bases::{chain_basis, compose_bases, construct_basis, tower_basis, Basis, DEFAULT_CARDINALITY_CAP};
use crate::linalg::{c, hs_norm, relative, singular_values, vectorize, Mat};
use crate::par;
use crate::tower::{span_of_products, Tower};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct IntervalProjection {
    pub k: i32,
    pub m: usize,
    /// Level holding the value, `k + 2m`.
    pub level: i32,
    pub value: Mat,
    /// `‖f² − f‖₂` and `‖f* − f‖₂`, relative.
    pub projection_residual: f64,
}

/// Exponent of `τ` in the interval prefactor as an exact fraction `(num, 2)`.
pub fn interval_prefactor_exponent(m: usize) -> (i64, i64) {
    let m = m as i64;
    (-m * (m - 1), 2)
}

/// Exponent of `τ` in the recursion for `e_{[−1,n+1]}`.
pub fn recursion_prefactor_exponent(n: usize) -> i64 {
    -(n as i64 + 1)
}

fn rel2(tower: &Tower, level: i32, a: &Mat, b: &Mat) -> f64 {
    let l = tower.level(level);
    relative(l.norm2(&(a - b)), l.norm2(a), l.norm2(b))
}

/// `e_from e_{from∓1} ⋯ e_to` at level `at`, stepping towards `to`; identity when empty.
pub fn word(tower: &Tower, from: i32, to: i32, at: i32) -> Result<Mat> {
    let mut out = tower.try_level(at)?.identity();
    if from < 1 || to < 1 {
        return Ok(out);
    }
    let idx: Vec<i32> = if from >= to { (to..=from).rev().collect() } else { (from..=to).collect() };
    for j in idx {
        out *= tower.jones_at(j, at)?;
    }
    Ok(out)
}

pub fn e_interval(tower: &Tower, k: i32, m: usize) -> Result<IntervalProjection> {
    if k < -1 {
        return Err(Error::Precondition(format!("interval start {k} below −1")));
    }
    let level = k + 2 * m as i32;
    if !tower.has_level(level) {
        return Err(Error::InsufficientDepth { needed: level, built: tower.depth() as i32 });
    }
    let top = tower.level(level);
    let mut value = top.identity();
    let mi = m as i32;
    for r in 0..mi {
        value *= word(tower, k + mi + 1 + r, k + 2 + r, level)?;
    }
    let (num, den) = interval_prefactor_exponent(m);
    value *= c(tower.tau().powf(num as f64 / den as f64));
    let sq = rel2(tower, level, &(&value * &value), &value);
    let sa = rel2(tower, level, &value.adjoint(), &value);
    Ok(IntervalProjection { k, m, level, value, projection_residual: sq.max(sa) })
}

/// The basis of level `k + m` over level `k` used for the multi-step check:
/// the tower basis for `k = −1`, otherwise the composite of chain bases.
pub fn default_basis(tower: &Tower, k: i32, m: usize) -> Result<Basis> {
    if m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    if k == -1 {
        let b = construct_basis(tower)?;
        return tower_basis(tower, m, &b, DEFAULT_CARDINALITY_CAP);
    }
    let mut acc = chain_basis(tower, k + 1)?;
    for j in k + 2..=k + m as i32 {
        acc = compose_bases(tower, &acc, &chain_basis(tower, j)?)?;
    }
    Ok(acc)
}

/// Residuals showing that `M_k ⊆ M_{k+m} ⊆ M_{k+2m}` with `f = e_{[k,k+m]}` is a basic construction.
#[derive(Clone, Debug, Serialize)]
pub struct FvrtReport {
    pub k: i32,
    pub m: usize,
    pub basis_cardinality: usize,
    pub projection: f64,
    /// `‖Σ λ_i* f λ_i − 1‖₂`.
    pub basis_identity: f64,
    /// `max ‖f x f − E(x) f‖₂` over random `x`.
    pub compression: f64,
    /// `E(x)` recovered by solving `y f = f x f`, compared with the expectation.
    pub compression_second_route: f64,
    /// `dim M_k − rank(n ↦ n f)`.
    pub injectivity_rank_deficiency: usize,
    /// `σ_min / σ_max` of `n ↦ n f`.
    pub injectivity_singular_ratio: f64,
    pub generated_rank: usize,
    pub target_dimension: usize,
    /// `max ‖[f, n]‖₂ / ‖n‖₂` over the GNS basis of level `k`.
    pub commutation: f64,
}

impl FvrtReport {
    /// Residuals that must vanish, by name.
    pub fn residuals(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("projection", self.projection),
            ("basis_identity", self.basis_identity),
            ("compression", self.compression),
            ("compression_second_route", self.compression_second_route),
            ("injectivity_rank_deficiency", self.injectivity_rank_deficiency as f64),
            ("generation_rank_deficiency", self.target_dimension.abs_diff(self.generated_rank) as f64),
            ("commutation", self.commutation),
        ]
    }
}

pub fn fvrt_check(tower: &Tower, k: i32, m: usize, basis: &Basis, seed: u64) -> Result<FvrtReport> {
    let mid = k + m as i32;
    if basis.upper() != mid || basis.lower() != k {
        return Err(Error::Precondition(format!(
            "expected a basis of level {mid} over level {k}, got {} over {}",
            basis.upper(),
            basis.lower()
        )));
    }
    let f = e_interval(tower, k, m)?;
    let top = f.level;
    let fv = &f.value;
    let lt = tower.level(top);

    let terms: Vec<Result<Mat>> = par::map_slice(basis.elements(), |l| {
        let u = tower.up_to(l, mid, top)?;
        Ok(u.adjoint() * fv * u)
    });
    let mut s = Mat::zeros(lt.size(), lt.size());
    for t in terms {
        s += t?;
    }
    let basis_identity = rel2(tower, top, &s, &lt.identity());

    let lk = tower.level(k);
    let ups: Vec<Mat> = lk.basis().iter().map(|b| tower.up_to(b, k, top)).collect::<Result<_>>()?;
    let a_cols: Vec<_> = ups.iter().map(|u| vectorize(&(u * fv))).collect();
    let a = Mat::from_columns(&a_cols);
    let svd = a.clone().svd(true, true);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compression: f64 = 0.0;
    let mut second: f64 = 0.0;
    for _ in 0..4 {
        let x = tower.level(mid).random_element_with(&mut rng);
        let ux = tower.up_to(&x, mid, top)?;
        let fxf = fv * &ux * fv;
        let ex = tower.expectation_to(&x, mid, k)?;
        let rhs = tower.up_to(&ex, k, top)? * fv;
        compression = par::nan_max(compression, rel2(tower, top, &fxf, &rhs));
        let coef = svd
            .solve(&vectorize(&fxf), 1e-12)
            .map_err(|e| Error::Numeric(format!("least-squares solve failed: {e}")))?;
        let y = lk.element(&coef);
        second = par::nan_max(second, rel2(tower, k, &y, &ex));
    }

    let sv = singular_values(&a);
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();

    let lm = tower.level(mid);
    let lefts: Vec<Mat> = lm.basis().iter().map(|b| tower.up_to(b, mid, top)).collect::<Result<_>>()?;
    let (span, _) = span_of_products(
        &lefts,
        fv,
        |r| tower.up_to(&lm.random_element_with(r), mid, top).expect("levels built"),
        &mut rng,
    );

    let commutation = ups
        .iter()
        .map(|u| relative(hs_norm(&(u * fv - fv * u)), hs_norm(u), 0.0))
        .fold(0.0, par::nan_max);

    Ok(FvrtReport {
        k,
        m,
        basis_cardinality: basis.len(),
        projection: f.projection_residual,
        basis_identity,
        compression,
        compression_second_route: second,
        injectivity_rank_deficiency: lk.dimension() - rank,
        injectivity_singular_ratio: if smax > 0.0 { smin / smax } else { 0.0 },
        generated_rank: span.len(),
        target_dimension: lt.dimension(),
        commutation,
    })
}

/// Maximum residual of `e_i e_j e_i = τ e_i` (`|i − j| = 1`) and
/// `e_i e_j = e_j e_i` (`|i − j| ≥ 2`) over `1 ≤ i, j ≤ top`, evaluated in level `top`.
pub fn tl_relations(tower: &Tower, top: i32) -> Result<f64> {
    tower.try_level(top)?;
    let es: Vec<Mat> = (1..=top).map(|j| tower.jones_at(j, top)).collect::<Result<_>>()?;
    let tau = c(tower.tau());
    let n = es.len();
    Ok(par::max_over(n * n, |ij| {
        let (i, j) = (ij / n, ij % n);
        let (a, b) = (&es[i], &es[j]);
        match i.abs_diff(j) {
            0 => rel2(tower, top, &(a * a), a),
            1 => rel2(tower, top, &(a * b * a), &(a * tau)),
            _ => rel2(tower, top, &(a * b), &(b * a)),
        }
    }))
}

/// `(e₁⋯e_{2n+1})(e_{2n}⋯e₁) = τ^{2n} e₁`, in level `2n + 1`.
pub fn contraction_identity(tower: &Tower, n: usize) -> Result<f64> {
    let n = n as i32;
    let at = 2 * n + 1;
    tower.try_level(at)?;
    let lhs = word(tower, 1, 2 * n + 1, at)? * word(tower, 2 * n, 1, at)?;
    let rhs = tower.jones_at(1, at)? * c(tower.tau().powi(2 * n));
    Ok(rel2(tower, at, &lhs, &rhs))
}

/// `(e_{2n+2}⋯e_{n+3})(e_{n+2}⋯e_{2n+3}) = τⁿ e_{2n+2} e_{2n+3}`, in level `2n + 3`.
pub fn eq34_identity(tower: &Tower, n: usize) -> Result<f64> {
    let n = n as i32;
    let at = 2 * n + 3;
    tower.try_level(at)?;
    let first = if 2 * n + 2 >= n + 3 { word(tower, 2 * n + 2, n + 3, at)? } else { tower.level(at).identity() };
    let lhs = first * word(tower, n + 2, 2 * n + 3, at)?;
    let rhs = tower.jones_at(2 * n + 2, at)? * tower.jones_at(2 * n + 3, at)? * c(tower.tau().powi(n));
    Ok(rel2(tower, at, &lhs, &rhs))
}

/// `e_{[−1,n+1]} = τ^{-(n+1)} (e_{n+2}⋯e_{2n+3}) e_{[−1,n]} (e_{2n+2}⋯e_{n+2})`, in level `2n + 3`.
pub fn multistep_recursion_check(tower: &Tower, n: usize) -> Result<f64> {
    let ni = n as i32;
    let at = 2 * ni + 3;
    tower.try_level(at)?;
    let lhs = e_interval(tower, -1, n + 2)?;
    let inner = e_interval(tower, -1, n + 1)?;
    let inner_up = tower.up_to(&inner.value, inner.level, at)?;
    let rhs = word(tower, ni + 2, 2 * ni + 3, at)? * inner_up * word(tower, 2 * ni + 2, ni + 2, at)?
        * c(tower.tau().powi(recursion_prefactor_exponent(n) as i32));
    Ok(rel2(tower, at, &lhs.value, &rhs))
}

/// Residuals of the contraction, the product identity and the TL relations for one `n`.
#[derive(Clone, Debug, Serialize)]
pub struct TlReport {
    pub n: usize,
    pub contraction: f64,
    pub product_identity: f64,
    /// TL relations among `e_1..e_{2n+3}`.
    pub relations: f64,
}

/// Needs level `2n + 3`.
pub fn tl_identity_checks(tower: &Tower, n: usize) -> Result<TlReport> {
    let top = 2 * n as i32 + 3;
    tower.try_level(top)?;
    Ok(TlReport {
        n,
        contraction: contraction_identity(tower, n)?,
        product_identity: eq34_identity(tower, n)?,
        relations: tl_relations(tower, top)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn interval_basics() {
        let t = Tower::build(catalog::c2(), 3).unwrap();
        let f0 = e_interval(&t, 0, 0).unwrap();
        assert_eq!(f0.level, 0);
        assert!(hs_norm(&(f0.value - t.level(0).identity())) == 0.0);
        let f1 = e_interval(&t, 0, 1).unwrap();
        assert_eq!(f1.level, 2);
        assert!(hs_norm(&(&f1.value - t.jones_projection(2).unwrap())) < 1e-14);
        let f = e_interval(&t, -1, 2).unwrap();
        assert!(f.projection_residual <= 1e-8);
        assert_eq!(interval_prefactor_exponent(2), (-2, 2));
        assert_eq!(recursion_prefactor_exponent(3), -4);
        assert!(matches!(e_interval(&t, 0, 2), Err(Error::InsufficientDepth { .. })));
    }

    #[test]
    fn fvrt_on_small_cases() {
        let t = Tower::build(catalog::c2(), 3).unwrap();
        for (k, m) in [(-1, 1), (-1, 2), (0, 1)] {
            let b = default_basis(&t, k, m).unwrap();
            let r = fvrt_check(&t, k, m, &b, 0).unwrap();
            for (name, v) in r.residuals() {
                assert!(v <= 1e-8, "C2 {k} {m} {name} = {v}");
            }
            assert!(r.injectivity_singular_ratio > 1e-6);
        }
        let t = Tower::build(catalog::c1(), 2).unwrap();
        let b = default_basis(&t, 0, 1).unwrap();
        let r = fvrt_check(&t, 0, 1, &b, 0).unwrap();
        assert!(r.residuals().iter().all(|(_, v)| *v <= 1e-8), "{r:?}");
    }

    #[test]
    fn temperley_lieb_and_contraction() {
        let t = Tower::build(catalog::c2(), 5).unwrap();
        assert!(tl_relations(&t, 5).unwrap() <= 1e-8);
        for n in 0..=2 {
            assert!(contraction_identity(&t, n).unwrap() <= 1e-8);
        }
        for n in 0..=1 {
            assert!(eq34_identity(&t, n).unwrap() <= 1e-8);
            assert!(multistep_recursion_check(&t, n).unwrap() <= 1e-8);
        }
        let e1 = t.jones_at(1, 2).unwrap();
        let e2 = t.jones_at(2, 2).unwrap();
        assert!(hs_norm(&(&e1 * &e2 * &e1 - &e1 * c(t.tau()))) < 1e-10);
    }

    #[test]
    fn interval_commutes_with_lower_level() {
        let t = Tower::build(catalog::c3(), 3).unwrap();
        let f = e_interval(&t, -1, 2).unwrap();
        for b in t.level(-1).basis() {
            let u = t.up_to(&b, -1, 3).unwrap();
            assert!(hs_norm(&(&u * &f.value - &f.value * &u)) < 1e-10 * hs_norm(&u));
        }
    }

    #[test]
    fn combined_tl_report() {
        let t = Tower::build(catalog::c2(), 5).unwrap();
        for n in 0..=1 {
            let r = tl_identity_checks(&t, n).unwrap();
            assert!(r.contraction <= 1e-8 && r.product_identity <= 1e-8 && r.relations <= 1e-8, "{r:?}");
        }
        assert!(matches!(tl_identity_checks(&t, 2), Err(Error::InsufficientDepth { .. })));
    }
}
