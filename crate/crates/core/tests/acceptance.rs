//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero on any failure.

use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subfactor_core::automorphisms::{
    check_extension, check_trace_preserving, extend_tower, extend_tower_with, extension_distance,
    make_automorphism, random_n_invariant, random_unitary, FdAutomorphism,
};
use subfactor_core::bases::{
    chain_basis, compose_bases, construct_basis, construct_basis_seeded, left_multiplied, lift_basis, mixed,
    perturbed, tower_basis, tower_prefactor_exponent, verify, watatani_residual, Basis, DEFAULT_CARDINALITY_CAP,
};
use subfactor_core::catalog::{self, InclusionData};
use subfactor_core::linalg::{c, hs_inner, hs_norm, relative};
use subfactor_core::multistep::{
    contraction_identity, default_basis, eq34_identity, fvrt_check, multistep_recursion_check, tl_relations,
};
use subfactor_core::suites::same_up_to_columns;
use subfactor_core::tower::predicted_dimensions;
use subfactor_core::{AlgebraElement, Inclusion, Mat, Tower};

const RANDOM_COUNT: u64 = 20;

struct Outcome {
    ok: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Self { ok: true, detail: String::new() }
    }

    /// Records `value ≤ bound`; the first violation is kept as the detail.
    fn le(&mut self, what: &str, value: f64, bound: f64) {
        if !(value.is_finite() && value <= bound) {
            if self.ok {
                self.detail = format!("{what}: {value:.3e} > {bound:.0e}");
            }
            self.ok = false;
        }
    }

    fn check(&mut self, what: &str, cond: bool) {
        if !cond {
            if self.ok {
                self.detail = what.to_string();
            }
            self.ok = false;
        }
    }

    fn note(&mut self, s: String) {
        if self.ok {
            self.detail = s;
        }
    }
}

fn all_data() -> Vec<InclusionData> {
    let mut v = catalog::fixed();
    v.extend((0..RANDOM_COUNT).map(catalog::random_inclusion_data));
    v
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_markov(o: &mut Outcome) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let cases: [(InclusionData, f64, f64, Vec<f64>, Vec<f64>); 3] = [
        (catalog::c1_data(), 4.0, 0.25, vec![0.5], vec![1.0]),
        (catalog::c2_data(), 2.0, 0.5, vec![0.5], vec![0.5, 0.5]),
        (
            catalog::c3_data(),
            phi * phi,
            (3.0 - 5f64.sqrt()) / 2.0,
            vec![1.0 / (1.0 + 2.0 * phi), phi / (1.0 + 2.0 * phi)],
            vec![phi * phi / (1.0 + 2.0 * phi), phi / (1.0 + 2.0 * phi)],
        ),
    ];
    let mut slowest: f64 = 0.0;
    for (d, norm_sq, tau, t, s) in cases {
        let start = Instant::now();
        let inc = d.build().expect("catalog entry");
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        let m = &inc.markov;
        o.le(&format!("{} ‖G‖²", d.name), rel(m.norm_sq, norm_sq), 1e-10);
        o.le(&format!("{} τ", d.name), rel(m.tau, tau), 1e-10);
        for (j, (&got, &want)) in m.t_vec.iter().zip(&t).enumerate() {
            o.le(&format!("{} t[{j}]", d.name), rel(got, want), 1e-10);
        }
        for (i, (&got, &want)) in m.s_vec.iter().zip(&s).enumerate() {
            o.le(&format!("{} s[{i}]", d.name), rel(got, want), 1e-10);
        }
        o.check(&format!("{} vector lengths", d.name), m.t_vec.len() == t.len() && m.s_vec.len() == s.len());
        o.le(&format!("{} eigen residual", d.name), m.eigen_residual, 1e-12);
        o.le(&format!("{} runtime (s)", d.name), secs, 1.0);
    }
    o.note(format!("C1/C2/C3 hand values matched; slowest {:.1} ms", slowest * 1e3));
}

fn random_isometry(n: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unitary(&mut rng, n + 1).columns(0, n).into_owned()
}

fn random_unitary_of_n(inc: &Inclusion, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = inc.small.block_dims().iter().map(|&d| random_unitary(&mut rng, d)).collect();
    AlgebraElement::new(&inc.small, blocks).expect("blocks fit").to_block_diagonal()
}

fn c2_equivalence(o: &mut Outcome, shallow: &[(String, Tower)]) {
    let mut equivalence_cases = 0;
    let mut worst_perturbed = f64::INFINITY;
    for (name, t) in shallow {
        let b = construct_basis(t).expect("basis");
        let r = verify(t, &b, 0).expect("verify");
        o.le(&format!("{name} condition 1"), r.condition_1(), 1e-8);
        o.le(&format!("{name} condition 2"), r.condition_2, 1e-8);
        o.le(&format!("{name} condition 3"), r.condition_3.max(r.condition_3_adjoint), 1e-8);
        o.le(&format!("{name} tr(Q) = τ⁻¹/n"), r.q_trace, 1e-8);

        let p = verify(t, &perturbed(t, &b, 0.1).expect("family"), 0).expect("verify");
        worst_perturbed = worst_perturbed.min(p.max());
        o.check(&format!("{name} perturbed family not detected ({:.3e})", p.max()), p.max() > 1e-3);

        let families = [
            mixed(t, &b, &random_isometry(b.len(), 11)).expect("family"),
            left_multiplied(t, &b, &random_unitary_of_n(t.inclusion(), 12)).expect("family"),
            construct_basis_seeded(t, 13).expect("family"),
        ];
        for f in &families {
            let r = verify(t, f, 1).expect("verify");
            if r.condition_2 <= 1e-10 {
                equivalence_cases += 1;
                o.le(&format!("{name} (2) ⇒ (1)"), r.condition_1(), 1e-8);
                o.le(&format!("{name} (2) ⇒ (3)"), r.condition_3.max(r.condition_3_adjoint), 1e-8);
            }
        }
    }
    o.check("no family passed condition (2) within 1e-10", equivalence_cases > 0);
    o.note(format!(
        "{} inclusions; {equivalence_cases} families with (2) ≤ 1e-10; perturbed worst-condition min {worst_perturbed:.3e}",
        shallow.len()
    ));
}

fn c3_watatani(o: &mut Outcome, shallow: &[(String, Tower)]) {
    let mut worst: f64 = 0.0;
    for (name, t) in shallow {
        for b in [construct_basis(t).expect("basis"), construct_basis_seeded(t, 5).expect("basis")] {
            let w = watatani_residual(t, &b);
            worst = worst.max(w);
            o.le(&format!("{name} Σλ*λ = τ⁻¹"), w, 1e-8);
        }
    }
    o.note(format!("max residual {worst:.3e}"));
}

fn passes(o: &mut Outcome, t: &Tower, b: &Basis, what: &str) -> f64 {
    let r = verify(t, b, 0).expect("verify");
    o.le(what, r.max(), 1e-8);
    r.max()
}

fn c4_derived_bases(o: &mut Outcome, deep: &[(String, Tower)]) {
    let mut worst: f64 = 0.0;
    for (name, t) in deep.iter().filter(|(n, _)| n != "C4") {
        let kmax = if name == "C2" { 3 } else { 2 };
        let b0 = construct_basis(t).expect("basis");
        let comp = compose_bases(t, &b0, &chain_basis(t, 1).expect("chain")).expect("compose");
        worst = worst.max(passes(o, t, &comp, &format!("{name} composed")));
        let lift1 = lift_basis(t, &b0).expect("lift");
        worst = worst.max(passes(o, t, &lift1, &format!("{name} lifted once")));
        let lift2 = lift_basis(t, &lift1).expect("lift");
        worst = worst.max(passes(o, t, &lift2, &format!("{name} lifted twice")));
        for k in 1..=kmax {
            let tb = tower_basis(t, k, &b0, DEFAULT_CARDINALITY_CAP).expect("tower basis");
            worst = worst.max(passes(o, t, &tb, &format!("{name} tower basis k={k}")));
            o.check(&format!("{name} cardinality n^{k}"), tb.len() == b0.len().pow(k as u32));

            let (num, den) = tower_prefactor_exponent(k);
            let k64 = k as i64;
            o.check(&format!("prefactor exponent k={k}"), num * 4 == -k64 * (k64 - 1) * den);
            // Raw product λ₀ e₁ λ₀ (e₂e₁) λ₀ ⋯ built directly at level k − 1.
            let top = k as i32 - 1;
            let l = t.up_to(&b0.elements()[0], 0, top).expect("up");
            let mut raw = l.clone();
            for r in 1..=top {
                for j in (1..=r).rev() {
                    raw *= t.jones_at(j, top).expect("jones");
                }
                raw *= &l;
            }
            let el = &tb.elements()[0];
            let scale = hs_inner(el, &raw) / hs_inner(&raw, &raw);
            let residual = hs_norm(&(el - &raw * scale)) / hs_norm(el);
            o.le(&format!("{name} k={k} first element is a multiple of the raw product"), residual, 1e-10);
            let exponent = scale.re.ln() / t.tau().ln();
            o.le(&format!("{name} k={k} prefactor exponent"), (exponent - num as f64 / den as f64).abs(), 1e-10);
            o.le(&format!("{name} k={k} prefactor is real"), scale.im.abs(), 1e-12);
        }
    }
    o.note(format!("composed/lifted/tower bases; max residual {worst:.3e}; exponents −k(k−1)/4"));
}

fn c5_pushdown(o: &mut Outcome, deep: &[(String, Tower)]) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut count = 0;
    let (mut worst, mut worst_u): (f64, f64) = (0.0, 0.0);
    for (name, t) in deep {
        let e = t.jones_projection(1).expect("e1");
        for _ in 0..25 {
            let x = t.level(1).random_element_with(&mut rng);
            let x0 = t.pushdown(1, &x).expect("pushdown");
            let lhs = &x * e;
            let rhs = t.up(&x0, 0).expect("up") * e;
            let r = relative(hs_norm(&(&lhs - &rhs)), hs_norm(&lhs), hs_norm(&rhs));
            worst = worst.max(r);
            o.le(&format!("{name} ‖Xe₁ − x₀e₁‖"), r, 1e-8);
            let second = t.pushdown_via_expectation(1, &x).expect("pushdown");
            let l0 = t.level(0);
            let u = relative(l0.norm2(&(&x0 - &second)), l0.norm2(&x0), l0.norm2(&second));
            worst_u = worst_u.max(u);
            o.le(&format!("{name} uniqueness"), u, 1e-10);
            count += 1;
        }
    }
    o.check("100 samples", count == 100);
    o.note(format!("{count} samples; max residual {worst:.3e}; max disagreement {worst_u:.3e}"));
}

fn c6_trace(o: &mut Outcome) {
    let mut worst: f64 = 0.0;
    let data = all_data();
    for d in &data {
        let inc = d.build().expect("valid");
        for s in 0..50 {
            let a = random_n_invariant(&inc, s).expect("automorphism");
            o.check(&format!("{} seed {s} not N-invariant", d.name), a.is_n_invariant());
            let r = check_trace_preserving(&inc, &a).expect("invariant");
            worst = worst.max(r);
            o.le(&format!("{} seed {s} trace", d.name), r, 1e-10);
        }
    }
    o.note(format!("{} automorphisms over {} inclusions; max |tr∘α − tr| {worst:.3e}", 50 * data.len(), data.len()));
}

fn swap_c2(inc: &Inclusion) -> FdAutomorphism {
    let mut u = Mat::zeros(2, 2);
    u[(0, 1)] = c(1.0);
    u[(1, 0)] = c(1.0);
    make_automorphism(inc, vec![0], AlgebraElement::new(&inc.big, vec![u]).expect("block")).expect("unitary")
}

fn c7_extensions(o: &mut Outcome, deep: &[(String, Tower)]) {
    let mut worst: f64 = 0.0;
    let mut levels = 0;
    for (name, t) in deep {
        let top = t.depth().min(2);
        let mut alphas: Vec<FdAutomorphism> =
            (0..3).map(|s| random_n_invariant(t.inclusion(), 100 + s).expect("automorphism")).collect();
        if name == "C2" {
            alphas.push(swap_c2(t.inclusion()));
        }
        for (i, a) in alphas.iter().enumerate() {
            let ext = extend_tower(t, a, top).expect("extension");
            let alt = extend_tower_with(t, a, top, &construct_basis_seeded(t, 77 + i as u64).expect("basis"))
                .expect("extension");
            for k in 1..=top as i32 {
                let r = check_extension(t, &ext, k, i as u64).expect("check");
                for (what, v) in [
                    ("homomorphism", r.homomorphism.max(r.star)),
                    ("α(e_j) = e_j", r.fixes_jones),
                    ("restriction", r.restriction),
                    ("trace", r.trace),
                ] {
                    worst = worst.max(v);
                    o.le(&format!("{name} α#{i} level {k} {what}"), v, 1e-8);
                }
                let u = extension_distance(&ext, &alt, k);
                worst = worst.max(u);
                o.le(&format!("{name} α#{i} level {k} uniqueness"), u, 1e-8);
                levels += 1;
            }
        }
    }
    o.note(format!("{levels} extension levels checked; max residual {worst:.3e}"));
}

fn c8_fvrt(o: &mut Outcome, c1: &Tower, c2: &Tower, build_secs: f64) {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let cases: [(&str, &Tower, &[(i32, usize)]); 2] =
        [("C2", c2, &[(-1, 1), (-1, 2), (0, 1)]), ("C1", c1, &[(-1, 1), (0, 1)])];
    for (name, t, pairs) in cases {
        o.check(&format!("{name} tower depth ≤ 5"), t.depth() <= 5);
        for &(k, m) in pairs {
            let b = default_basis(t, k, m).expect("basis");
            let r = fvrt_check(t, k, m, &b, 3).expect("check");
            for (what, v) in r.residuals() {
                worst = worst.max(v);
                o.le(&format!("{name} ({k},{m}) {what}"), v, 1e-8);
            }
            o.check(&format!("{name} ({k},{m}) full generation"), r.generated_rank == r.target_dimension);
        }
    }
    let secs = start.elapsed().as_secs_f64() + build_secs;
    o.le("runtime (s)", secs, 60.0);
    o.note(format!("C2 (−1,1),(−1,2),(0,1); C1 (−1,1),(0,1); max residual {worst:.3e}; {secs:.1} s incl. towers"));
}

fn c9_identities(o: &mut Outcome, c2: &Tower, others: &[(String, Tower)]) {
    let mut worst: f64 = 0.0;
    let mut rec = |o: &mut Outcome, what: String, v: f64| {
        worst = worst.max(v);
        o.le(&what, v, 1e-8);
    };
    for (name, t) in others {
        rec(o, format!("{name} TL"), tl_relations(t, t.depth() as i32).expect("tl"));
    }
    for n in 1..=2 {
        rec(o, format!("contraction n={n}"), contraction_identity(c2, n).expect("contraction"));
    }
    for n in 0..=1 {
        rec(o, format!("eq34 n={n}"), eq34_identity(c2, n).expect("eq34"));
        rec(o, format!("recursion n={n}"), multistep_recursion_check(c2, n).expect("recursion"));
    }
    o.note(format!("TL, contraction n≤2, product identity n≤1, recursion n≤1 on C2; max residual {worst:.3e}"));
}

fn c10_structure(o: &mut Outcome, deep: &[(String, Tower)], shallow: &[(String, Tower)]) {
    let mut levels = 0;
    for (name, t) in deep.iter().filter(|(n, _)| n != "C4") {
        let bs = t.block_structure(1).expect("structure");
        let from_below = bs.inclusion_from_below.clone().unwrap_or_default();
        let gt = t.inclusion().matrix.transpose();
        o.check(
            &format!("{name}: level-1 inclusion {from_below:?} is not Gᵗ = {:?}", gt.entries()),
            same_up_to_columns(&from_below, gt.entries()),
        );
    }
    for (name, t) in deep.iter().chain(shallow) {
        let want = predicted_dimensions(t.inclusion(), t.depth());
        for d in t.diagnostics() {
            let k = d.level;
            o.check(
                &format!("{name} level {k}: span rank {} vs predicted {}", d.span_rank, want[(k + 1) as usize]),
                d.span_rank == want[(k + 1) as usize],
            );
            levels += 1;
        }
    }
    o.note(format!("Gᵗ recovered on C1/C2/C3; {levels} levels match the predicted dimension"));
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let build = |d: InclusionData, depth: usize| (d.name.clone(), Tower::build(d.build().expect("valid"), depth).expect("tower"));
    let start = Instant::now();
    let c1 = build(catalog::c1_data(), 3);
    let c1_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let c2 = build(catalog::c2_data(), 5);
    let c2_secs = start.elapsed().as_secs_f64();
    let deep = vec![c1, c2, build(catalog::c3_data(), 3), build(catalog::c4_data(), 3)];
    let shallow: Vec<(String, Tower)> = all_data().into_iter().map(|d| build(d, 1)).collect();

    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |label: &'static str, f: &dyn Fn(&mut Outcome)| {
        let mut o = Outcome::new();
        let start = Instant::now();
        f(&mut o);
        o.detail = format!("{} [{:.2} s]", o.detail, start.elapsed().as_secs_f64());
        results.push((label, o));
    };
    run("1 Markov trace", &c1_markov);
    run("2 basis equivalence", &|o| c2_equivalence(o, &shallow));
    run("3 Watatani index", &|o| c3_watatani(o, &shallow));
    run("4 composed, lifted and tower bases", &|o| c4_derived_bases(o, &deep));
    run("5 pushdown", &|o| c5_pushdown(o, &deep));
    run("6 trace invariance", &c6_trace);
    run("7 automorphism extensions", &|o| c7_extensions(o, &deep));
    run("8 multi-step basic construction", &|o| c8_fvrt(o, &deep[0].1, &deep[1].1, c1_secs + c2_secs));
    run("9 proof identities", &|o| c9_identities(o, &deep[1].1, &deep));
    run("10 structure", &|o| c10_structure(o, &deep, &shallow));

    let mut failed = 0;
    for (label, o) in &results {
        println!("{} criterion {label}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.ok);
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
