//! Named verification suites. Each suite evaluates a family of identities on
//! one inclusion and records the residuals in a [`SuiteReport`].

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::automorphisms::{
    check_extension, check_trace_preserving, extend_tower, extend_tower_with, extension_distance,
    random_n_invariant, random_unitary, FdAutomorphism,
};
use crate::bases::{
    chain_basis, compose_bases, construct_basis, construct_basis_seeded, left_multiplied, lift_basis, mixed,
    perturbed, tower_basis, verify, watatani_residual, Basis, ConditionReport, DEFAULT_CARDINALITY_CAP,
};
use crate::inclusion::Inclusion;
use crate::linalg::{hs_norm, relative, Mat};
use crate::multimatrix::AlgebraElement;
use crate::multistep::{
    contraction_identity, default_basis, eq34_identity, fvrt_check, multistep_recursion_check, tl_relations,
};
use crate::report::{SuiteReport, VerificationReport};
use crate::tower::{max_depth, predicted_block_sizes, predicted_dimensions, Tower};
use crate::{Error, Result};

/// Suites accepted by [`run`], in execution order. `all` expands to every one.
pub const SUITES: &[&str] = &[
    "markov", "structure", "lem2.1", "thm2.2", "cor2.6", "cor2.7", "cor2.9", "lem3.1", "thm3.2", "cor3.3",
    "lem3.4", "thm3.5", "tl", "eq3.4",
];

/// Tower depth used when none is requested (capped per inclusion).
pub const DEFAULT_DEPTH: usize = 5;

/// `(k, m)` pairs tried by `thm3.5` when level `k + 2m` exists.
pub const INTERVAL_PAIRS: &[(i32, usize)] = &[(-1, 1), (0, 1), (-1, 2), (1, 1)];

/// Perturbation size for the negative control in `thm2.2`.
pub const PERTURBATION: f64 = 0.1;
/// A perturbed family must miss some condition by more than this.
pub const DETECTION_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Overrides every per-suite tolerance.
    pub tol: Option<f64>,
    /// Random samples per randomized check.
    pub samples: usize,
    /// Random automorphisms drawn by `lem3.1`.
    pub automorphisms: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 0, tol: None, samples: 25, automorphisms: 50 }
    }
}

/// Default tolerance of a suite.
pub fn default_tolerance(suite: &str) -> f64 {
    match suite {
        "markov" | "lem3.1" => 1e-10,
        _ => crate::DEFAULT_TOLERANCE,
    }
}

/// What a suite checks, in words.
pub fn reference(suite: &str) -> &'static str {
    match suite {
        "markov" => "Markov trace: Perron-Frobenius data of G, τ = ‖G‖⁻²",
        "structure" => "M₁ has inclusion matrix Gᵗ over M; tower dimensions follow G, Gᵗ alternately",
        "lem2.1" => "pushdown: X e₁ = x₀ e₁ with x₀ = τ⁻¹ E_M(X e₁) unique",
        "thm2.2" => "Pimsner-Popa basis: Q projection of trace τ⁻¹/n ⇔ Σ λ*e₁λ = 1 ⇔ x = Σ E(xλ*)λ",
        "cor2.6" => "products of bases for P ⊆ N ⊆ M form a basis of M over P",
        "cor2.7" => "τ^{-1/2} e₁λ is a basis of M₁ over M",
        "cor2.9" => "tower bases of M_{k-1} over N with prefactor τ^{-k(k-1)/4}",
        "lem3.1" => "automorphisms with α(N) = N preserve the Markov trace",
        "thm3.2" => "unique extension of α to M₁ fixing e₁",
        "cor3.3" => "extensions to every level of the tower",
        "lem3.4" => "criterion for a basic construction, for N ⊆ M ⊆ M₁",
        "thm3.5" => "M_k ⊆ M_{k+m} ⊆ M_{k+2m} is a basic construction with e_[k,k+m]",
        "tl" => "Temperley-Lieb relations, contraction and interval recursion",
        "eq3.4" => "(e_{2n+2}⋯e_{n+3})(e_{n+2}⋯e_{2n+3}) = τⁿ e_{2n+2}e_{2n+3}",
        _ => "",
    }
}

/// Highest tower level a suite can use.
pub fn required_depth(suite: &str) -> usize {
    match suite {
        "markov" | "lem3.1" => 0,
        "structure" | "lem2.1" | "thm2.2" | "thm3.2" | "lem3.4" => 1,
        "cor2.6" | "cor2.7" | "cor3.3" => 3,
        "thm3.5" => 4,
        _ => DEFAULT_DEPTH,
    }
}

/// Expands `all` and rejects unknown names.
pub fn expand(names: &[String]) -> Result<Vec<&'static str>> {
    let mut out: Vec<&'static str> = Vec::new();
    for n in names {
        if n == "all" {
            out.extend(SUITES.iter().copied());
            continue;
        }
        let s = SUITES.iter().copied().find(|s| s == n).ok_or_else(|| {
            Error::Precondition(format!("unknown suite '{n}'; valid suites: {}, all", SUITES.join(", ")))
        })?;
        out.push(s);
    }
    let mut seen = Vec::new();
    out.retain(|s| {
        let fresh = !seen.contains(s);
        seen.push(*s);
        fresh
    });
    if out.is_empty() {
        return Err(Error::Precondition(format!("no suite given; valid suites: {}, all", SUITES.join(", "))));
    }
    Ok(out)
}

/// Inclusion, optional automorphism and a lazily built tower.
pub struct Context {
    pub name: String,
    pub inclusion: Inclusion,
    pub automorphism: Option<FdAutomorphism>,
    pub depth: usize,
    tower: Option<Tower>,
}

impl Context {
    /// `depth` is the deepest level available to suites; refused above the cap.
    pub fn new(name: &str, inclusion: Inclusion, automorphism: Option<FdAutomorphism>, depth: Option<usize>) -> Result<Self> {
        let cap = max_depth(&inclusion);
        let depth = match depth {
            Some(d) if d > cap => {
                let dims = predicted_dimensions(&inclusion, d);
                return Err(Error::DepthRefused {
                    requested: d,
                    reason: format!(
                        "level {d} would have dimension {}; the largest admissible depth for this inclusion is {cap}",
                        dims[d + 1]
                    ),
                });
            }
            Some(d) => d,
            None => DEFAULT_DEPTH.min(cap),
        };
        Ok(Self { name: name.to_string(), inclusion, automorphism, depth, tower: None })
    }

    /// Tower built to `min(needed, depth)`, rebuilt deeper if a later suite needs it.
    pub fn tower(&mut self, needed: usize) -> Result<&Tower> {
        let want = needed.min(self.depth).max(1);
        if self.tower.as_ref().is_none_or(|t| t.depth() < want) {
            self.tower = Some(Tower::build(self.inclusion.clone(), want)?);
        }
        Ok(self.tower.as_ref().expect("just built"))
    }
}

/// Runs the named suites (after expanding `all`).
pub fn run(ctx: &mut Context, names: &[String], cfg: &SuiteConfig) -> Result<VerificationReport> {
    let suites = expand(names)?;
    let reports = suites.iter().map(|s| run_suite(ctx, s, cfg)).collect();
    Ok(VerificationReport::new(&ctx.name, cfg.seed, Some(ctx.depth), reports))
}

/// Runs one suite. Numerical failures are recorded in the report, not returned.
pub fn run_suite(ctx: &mut Context, suite: &str, cfg: &SuiteConfig) -> SuiteReport {
    let tol = cfg.tol.unwrap_or_else(|| default_tolerance(suite));
    let mut r = SuiteReport::new(suite, reference(suite), tol);
    let start = Instant::now();
    let outcome = match suite {
        "markov" => markov(ctx, &mut r),
        "structure" => structure(ctx, &mut r),
        "lem2.1" => pushdown(ctx, cfg, &mut r),
        "thm2.2" => basis_equivalence(ctx, cfg, &mut r),
        "cor2.6" => composition(ctx, cfg, &mut r),
        "cor2.7" => lifting(ctx, cfg, &mut r),
        "cor2.9" => tower_bases(ctx, cfg, &mut r),
        "lem3.1" => trace_invariance(ctx, cfg, &mut r),
        "thm3.2" => extension(ctx, cfg, &mut r, 1, 1),
        "cor3.3" => extension(ctx, cfg, &mut r, 2, 3),
        "lem3.4" => intervals(ctx, cfg, &mut r, &[(-1, 1)]),
        "thm3.5" => intervals(ctx, cfg, &mut r, INTERVAL_PAIRS),
        "tl" => temperley_lieb(ctx, &mut r),
        "eq3.4" => eq34(ctx, &mut r),
        other => Err(Error::Precondition(format!("unknown suite '{other}'"))),
    };
    if let Err(e) = outcome {
        r.error = Some(e.to_string());
    }
    r.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    r.finalize();
    r
}

fn record_conditions(r: &mut SuiteReport, prefix: &str, c: &ConditionReport) {
    r.residual(format!("{prefix}q_idempotent"), c.q_idempotent);
    r.residual(format!("{prefix}q_self_adjoint"), c.q_self_adjoint);
    r.residual(format!("{prefix}q_trace"), c.q_trace);
    r.residual(format!("{prefix}condition_2"), c.condition_2);
    r.residual(format!("{prefix}condition_3"), c.condition_3);
    r.residual(format!("{prefix}condition_3_adjoint"), c.condition_3_adjoint);
}

fn markov(ctx: &mut Context, r: &mut SuiteReport) -> Result<()> {
    let inc = &ctx.inclusion;
    let md = &inc.markov;
    r.value("norm_sq", md.norm_sq);
    r.value("tau", md.tau);
    r.value("iterations", md.iterations as f64);
    for (j, t) in md.t_vec.iter().enumerate() {
        r.value(format!("t[{j}]"), *t);
    }
    for (i, s) in md.s_vec.iter().enumerate() {
        r.value(format!("s[{i}]"), *s);
    }
    r.residual("eigen_residual", md.eigen_residual);
    r.residual("tau_inverse_norm", (md.tau * md.norm_sq - 1.0).abs());
    let g = inc.matrix.to_f64();
    let t = nalgebra::DVector::from_vec(md.t_vec.clone());
    let s = nalgebra::DVector::from_vec(md.s_vec.clone());
    r.residual("restriction_s_eq_Gt", (&g * &t - &s).norm() / s.norm());
    r.residual("extension_Gts_eq_t_over_tau", (g.transpose() * &s * md.tau - &t).norm() / t.norm());
    let dims_m = inc.big.block_dims();
    let total: f64 = dims_m.iter().zip(&md.t_vec).map(|(&n, &t)| n as f64 * t).sum();
    r.residual("normalization", (total - 1.0).abs());
    let neg = md.t_vec.iter().chain(&md.s_vec).fold(0.0_f64, |a, &x| a.max(-x));
    r.residual("positivity", neg);
    Ok(())
}

fn structure(ctx: &mut Context, r: &mut SuiteReport) -> Result<()> {
    let tower = ctx.tower(required_depth("structure").max(ctx.depth))?;
    let predicted = predicted_dimensions(tower.inclusion(), tower.depth());
    for (k, (&got, &want)) in tower.dimensions().iter().zip(&predicted).enumerate() {
        r.value(format!("dim_level_{}", k as i32 - 1), got as f64);
        r.residual(format!("dimension_level_{}", k as i32 - 1), got.abs_diff(want) as f64);
    }
    for d in tower.diagnostics() {
        r.residual("closure", d.closure_residual);
        r.residual("adjoint_closure", d.adjoint_residual);
        r.residual("identity_membership", d.identity_residual);
        r.residual("trace_unit", d.trace_unit_residual);
    }
    let bs = tower.block_structure(1)?;
    let sizes = &predicted_block_sizes(tower.inclusion(), 1)[2];
    let mut got = bs.block_dims.clone();
    let mut want = sizes.clone();
    got.sort_unstable();
    want.sort_unstable();
    r.residual("level_1_block_sizes", if got == want { 0.0 } else { 1.0 });
    let from_below = bs.inclusion_from_below.clone().unwrap_or_default();
    let gt = tower.inclusion().matrix.transpose();
    r.residual("level_1_inclusion_is_transpose", if same_up_to_columns(&from_below, gt.entries()) { 0.0 } else { 1.0 });
    r.value("level_1_min_gap", bs.min_gap);
    Ok(())
}

/// Equal up to a permutation of columns.
pub fn same_up_to_columns(a: &[Vec<usize>], b: &[Vec<usize>]) -> bool {
    if a.len() != b.len() || a.is_empty() {
        return false;
    }
    let cols = |m: &[Vec<usize>]| {
        let n = m[0].len();
        let mut c: Vec<Vec<usize>> = (0..n).map(|j| m.iter().map(|row| row[j]).collect()).collect();
        c.sort();
        c
    };
    a.iter().all(|r| r.len() == a[0].len()) && b.iter().all(|r| r.len() == b[0].len()) && cols(a) == cols(b)
}

fn pushdown(ctx: &mut Context, cfg: &SuiteConfig, r: &mut SuiteReport) -> Result<()> {
    let tower = ctx.tower(1)?;
    let l1 = tower.level(1);
    let e = tower.jones_projection(1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.samples {
        let x = l1.random_element_with(&mut rng);
        let x0 = tower.pushdown_via_expectation(1, &x)?;
        let lhs = &x * e;
        let rhs = tower.up(&x0, 0)? * e;
        r.residual("x_e1_minus_x0_e1", relative(hs_norm(&(&lhs - &rhs)), hs_norm(&lhs), hs_norm(&rhs)));
        let direct = tower.pushdown(1, &x)?;
        let l0 = tower.level(0);
        r.residual("uniqueness", relative(l0.norm2(&(&direct - &x0)), l0.norm2(&direct), l0.norm2(&x0)));
    }
    r.value("samples", cfg.samples as f64);
    Ok(())
}

/// A random `n'×n` isometry with `n' = n + 1`.
fn random_isometry(n: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unitary(&mut rng, n + 1).columns(0, n).into_owned()
}

fn random_unitary_of_n(inc: &Inclusion, seed: u64) -> Result<Mat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = inc.small.block_dims().iter().map(|&d| random_unitary(&mut rng, d)).collect();
    Ok(AlgebraElement::new(&inc.small, blocks)?.to_block_diagonal())
}

fn basis_equivalence(ctx: &mut Context, cfg: &SuiteConfig, r: &mut SuiteReport) -> Result<()> {
    let inc = ctx.inclusion.clone();
    let tower = ctx.tower(1)?;
    let b = construct_basis(tower)?;
    r.value("cardinality", b.len() as f64);
    r.value("index", 1.0 / tower.tau());
    record_conditions(r, "", &verify(tower, &b, cfg.seed)?);
    r.residual("watatani", watatani_residual(tower, &b));

    let p = perturbed(tower, &b, PERTURBATION)?;
    let pc = verify(tower, &p, cfg.seed)?;
    r.value("perturbed_worst_condition", pc.max());
    r.residual("perturbation_undetected", (DETECTION_THRESHOLD - pc.max()).max(0.0));

    let families = [
        ("mixed_", mixed(tower, &b, &random_isometry(b.len(), cfg.seed))?),
        ("left_unitary_", left_multiplied(tower, &b, &random_unitary_of_n(&inc, cfg.seed)?)?),
        ("reseeded_", construct_basis_seeded(tower, cfg.seed.wrapping_add(1))?),
    ];
    for (name, f) in &families {
        let c = verify(tower, f, cfg.seed)?;
        record_conditions(r, name, &c);
    }
    Ok(())
}

fn verify_if_deep(tower: &Tower, b: &Basis, seed: u64, r: &mut SuiteReport, prefix: &str) -> Result<()> {
    let need = 2 * b.upper() - b.lower();
    if need as usize > tower.depth() {
        r.skip(format!("{prefix}: needs level {need}, tower depth {}", tower.depth()));
        return Ok(());
    }
    let c = verify(tower, b, seed)?;
    r.value(format!("{prefix}_cardinality"), b.len() as f64);
    record_conditions(r, &format!("{prefix}_"), &c);
    r.residual(format!("{prefix}_watatani"), watatani_residual(tower, b));
    Ok(())
}

fn composition(ctx: &mut Context, cfg: &SuiteConfig, r: &mut SuiteReport) -> Result<()> {
    let tower = ctx.tower(3)?;
    if tower.depth() < 3 {
        r.skip(format!("composition of level 1 over N: needs level 3, tower depth {}", tower.depth()));
        return Ok(());
    }
    let inner = chain_basis(tower, 0)?;
    let outer = chain_basis(tower, 1)?;
    let comp = compose_bases(tower, &inner, &outer)?;
    verify_if_deep(tower, &comp, cfg.seed, r, "level1_over_N")?;
    let alt = compose_bases(tower, &construct_basis_seeded(tower, cfg.seed.wrapping_add(7))?, &outer)?;
    verify_if_deep(tower, &alt, cfg.seed, r, "reseeded_level1_over_N")
}

fn lifting(ctx: &mut Context, cfg: &SuiteConfig, r: &mut SuiteReport) -> Result<()> {
    let tower = ctx.tower(3)?;
    let mut b = construct_basis_seeded(tower, cfg.seed)?;
    for k in 1..=2 {
        if 2 * k + 1 - k > tower.depth() as i32 {
            r.skip(format!("lift to level {k}: needs level {}", k + 1));
            continue;
        }
        b = lift_basis(tower, &b)?;
        verify_if_deep(tower, &b, cfg.seed, r, &format!("lift_level{k}"))?;
    }
    Ok(())
}

fn tower_bases(ctx: &mut Context, cfg: &SuiteConfig, r: &mut SuiteReport) -> Result<()> {
    let tower = ctx.tower(DEFAULT_DEPTH)?;
    let b = construct_basis(tower)?;
    for k in 1..=3usize {
        let top = 2 * k as i32 - 1;
        if top as usize > tower.depth() {
            r.skip(format!("tower basis k = {k}: needs level {top}, tower depth {}", tower.depth()));
            continue;
        }
        let tb = match tower_basis(tower, k, &b, DEFAULT_CARDINALITY_CAP) {
            Err(Error::CardinalityCap { count, cap }) => {
                r.skip(format!("tower basis k = {k}: {count} elements exceed cap {cap}"));
                continue;
            }
            other => other?,
        };
        verify_if_deep(tower, &tb, cfg.seed, r, &format!("tower_k{k}"))?;
    }
    Ok(())
}

fn trace_invariance(ctx: &mut Context, cfg: &SuiteConfig, r: &mut SuiteReport) -> Result<()> {
    let inc = &ctx.inclusion;
    for i in 0..cfg.automorphisms as u64 {
        let a = random_n_invariant(inc, cfg.seed.wrapping_mul(1_000_003).wrapping_add(i))?;
        r.residual("trace_defect", check_trace_preserving(inc, &a)?);
        r.residual("automorphism", a.homomorphism_residual(inc));
    }
    if let Some(a) = &ctx.automorphism {
        if a.is_n_invariant() {
            r.residual("given_trace_defect", check_trace_preserving(inc, a)?);
        } else {
            r.skip("given automorphism does not leave N invariant");
        }
    }
    r.value("automorphisms", cfg.automorphisms as f64);
    Ok(())
}

fn extension(ctx: &mut Context, cfg: &SuiteConfig, r: &mut SuiteReport, from: i32, to: i32) -> Result<()> {
    let inc = ctx.inclusion.clone();
    let given = ctx.automorphism.clone();
    let tower = ctx.tower(to as usize)?;
    let top = to.min(tower.depth() as i32);
    if top < from {
        r.skip(format!("levels {from}..={to}: tower depth {}", tower.depth()));
        return Ok(());
    }
    for k in top + 1..=to {
        r.skip(format!("level {k}: tower depth {}", tower.depth()));
    }
    let alpha = match given {
        Some(a) if a.is_n_invariant() => a,
        Some(_) => return Err(Error::Precondition("the given automorphism does not leave N invariant".into())),
        None => random_n_invariant(&inc, cfg.seed)?,
    };
    let beta = random_n_invariant(&inc, cfg.seed.wrapping_add(1))?;
    let depth = top as usize;
    let ext = extend_tower(tower, &alpha, depth)?;
    let alt1 = extend_tower_with(tower, &alpha, depth, &construct_basis_seeded(tower, cfg.seed.wrapping_add(2))?)?;
    let w = random_unitary_of_n(&inc, cfg.seed.wrapping_add(3))?;
    let alt2 = extend_tower_with(tower, &alpha, depth, &left_multiplied(tower, &construct_basis(tower)?, &w)?)?;
    let eb = extend_tower(tower, &beta, depth)?;
    let eab = extend_tower(tower, &alpha.compose(&beta), depth)?;
    let prod = ext.compose(&eb);
    for k in from..=top {
        let rep = check_extension(tower, &ext, k, cfg.seed)?;
        for (name, v) in rep.residuals() {
            r.residual(format!("level{k}_{name}"), v);
        }
        r.residual(format!("level{k}_uniqueness_reseeded_basis"), extension_distance(&ext, &alt1, k));
        r.residual(format!("level{k}_uniqueness_rotated_basis"), extension_distance(&ext, &alt2, k));
        r.residual(format!("level{k}_composition"), extension_distance(&eab, &prod, k));
    }
    Ok(())
}

fn intervals(ctx: &mut Context, cfg: &SuiteConfig, r: &mut SuiteReport, pairs: &[(i32, usize)]) -> Result<()> {
    let need = pairs.iter().map(|&(k, m)| (k + 2 * m as i32) as usize).max().unwrap_or(1);
    let tower = ctx.tower(need)?;
    for &(k, m) in pairs {
        let top = k + 2 * m as i32;
        let tag = format!("k{k}_m{m}").replace('-', "neg");
        if top as usize > tower.depth() {
            r.skip(format!("(k, m) = ({k}, {m}): needs level {top}, tower depth {}", tower.depth()));
            continue;
        }
        let b = match default_basis(tower, k, m) {
            Err(Error::CardinalityCap { count, cap }) => {
                r.skip(format!("(k, m) = ({k}, {m}): basis of {count} elements exceeds cap {cap}"));
                continue;
            }
            other => other?,
        };
        let rep = fvrt_check(tower, k, m, &b, cfg.seed)?;
        for (name, v) in rep.residuals() {
            r.residual(format!("{tag}_{name}"), v);
        }
        r.value(format!("{tag}_basis_cardinality"), rep.basis_cardinality as f64);
        r.value(format!("{tag}_generated_rank"), rep.generated_rank as f64);
        r.value(format!("{tag}_injectivity_singular_ratio"), rep.injectivity_singular_ratio);
    }
    Ok(())
}

fn temperley_lieb(ctx: &mut Context, r: &mut SuiteReport) -> Result<()> {
    let tower = ctx.tower(DEFAULT_DEPTH)?;
    let d = tower.depth();
    r.residual(format!("relations_up_to_e{d}"), tl_relations(tower, d as i32)?);
    for n in 1..=2usize {
        if 2 * n < d {
            r.residual(format!("contraction_n{n}"), contraction_identity(tower, n)?);
        } else {
            r.skip(format!("contraction n = {n}: needs level {}", 2 * n + 1));
        }
    }
    for n in 0..=1usize {
        if 2 * n + 3 <= d {
            r.residual(format!("interval_recursion_n{n}"), multistep_recursion_check(tower, n)?);
        } else {
            r.skip(format!("interval recursion n = {n}: needs level {}", 2 * n + 3));
        }
    }
    Ok(())
}

fn eq34(ctx: &mut Context, r: &mut SuiteReport) -> Result<()> {
    let tower = ctx.tower(DEFAULT_DEPTH)?;
    for n in 0..=1usize {
        if 2 * n + 3 <= tower.depth() {
            r.residual(format!("n{n}"), eq34_identity(tower, n)?);
        } else {
            r.skip(format!("n = {n}: needs level {}", 2 * n + 3));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn ctx(inc: Inclusion, name: &str) -> Context {
        Context::new(name, inc, None, None).unwrap()
    }

    #[test]
    fn expand_names() {
        assert_eq!(expand(&["all".into()]).unwrap().len(), SUITES.len());
        assert_eq!(expand(&["tl".into(), "tl".into()]).unwrap(), vec!["tl"]);
        let err = expand(&["thm9".into()]).unwrap_err().to_string();
        assert!(err.contains("thm2.2") && err.contains("eq3.4"));
    }

    #[test]
    fn columns_permutation() {
        assert!(same_up_to_columns(&[vec![1, 0], vec![1, 1]], &[vec![0, 1], vec![1, 1]]));
        assert!(!same_up_to_columns(&[vec![1, 0], vec![1, 1]], &[vec![1, 0], vec![0, 1]]));
    }

    #[test]
    fn depth_refusal() {
        assert!(matches!(Context::new("C1", catalog::c1(), None, Some(9)), Err(Error::DepthRefused { .. })));
    }

    #[test]
    fn c2_core_suites_pass() {
        let mut c = ctx(catalog::c2(), "C2");
        let cfg = SuiteConfig { samples: 4, automorphisms: 5, ..Default::default() };
        let names: Vec<String> = ["markov", "structure", "lem2.1", "thm2.2", "lem3.1", "thm3.2", "lem3.4"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rep = run(&mut c, &names, &cfg).unwrap();
        assert!(rep.passed, "{rep}");
    }

    #[test]
    fn c2_perturbation_is_detected() {
        let mut c = ctx(catalog::c2(), "C2");
        let r = run_suite(&mut c, "thm2.2", &SuiteConfig::default());
        assert!(r.values["perturbed_worst_condition"] > DETECTION_THRESHOLD);
    }

    #[test]
    fn tolerance_override_fails_everything_nonzero() {
        let mut c = ctx(catalog::c3(), "C3");
        let cfg = SuiteConfig { tol: Some(0.0), samples: 2, ..Default::default() };
        let r = run_suite(&mut c, "lem2.1", &cfg);
        assert!(!r.passed);
    }

    #[test]
    fn shallow_random_inclusion_skips() {
        let inc = catalog::random_inclusion(3);
        let mut c = Context::new("R3", inc, None, Some(1)).unwrap();
        let r = run_suite(&mut c, "eq3.4", &SuiteConfig::default());
        assert!(r.passed && r.residuals.is_empty() && !r.skipped.is_empty());
    }
}
