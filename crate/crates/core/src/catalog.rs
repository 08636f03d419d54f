//! Fixed test inclusions and a seeded generator of random connected ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::inclusion::{validate_inclusion, Inclusion, InclusionMatrix};
use crate::tower::predicted_dimensions;

/// Raw data of an inclusion before validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InclusionData {
    pub name: String,
    pub dims_n: Vec<usize>,
    pub dims_m: Vec<usize>,
    pub g: Vec<Vec<usize>>,
}

impl InclusionData {
    pub fn build(&self) -> crate::Result<Inclusion> {
        Inclusion::new(&self.dims_n, &self.dims_m, self.g.clone())
    }
}

fn data(name: &str, dims_n: &[usize], dims_m: &[usize], g: &[&[usize]]) -> InclusionData {
    InclusionData {
        name: name.to_string(),
        dims_n: dims_n.to_vec(),
        dims_m: dims_m.to_vec(),
        g: g.iter().map(|r| r.to_vec()).collect(),
    }
}

/// `ℂ ⊂ M₂`, `τ = 1/4`.
pub fn c1_data() -> InclusionData {
    data("C1", &[1], &[2], &[&[2]])
}

/// `ℂ ⊕ ℂ ⊂ M₂`, `τ = 1/2`.
pub fn c2_data() -> InclusionData {
    data("C2", &[1, 1], &[2], &[&[1], &[1]])
}

/// `ℂ ⊕ ℂ ⊂ ℂ ⊕ M₂` with `G = [[1,1],[0,1]]`, `τ = (3 − √5)/2`.
pub fn c3_data() -> InclusionData {
    data("C3", &[1, 1], &[1, 2], &[&[1, 1], &[0, 1]])
}

/// `M₂ ⊂ M₂`, `τ = 1`.
pub fn c4_data() -> InclusionData {
    data("C4", &[2], &[2], &[&[1]])
}

pub fn c1() -> Inclusion {
    c1_data().build().expect("C1 is valid")
}

pub fn c2() -> Inclusion {
    c2_data().build().expect("C2 is valid")
}

pub fn c3() -> Inclusion {
    c3_data().build().expect("C3 is valid")
}

pub fn c4() -> Inclusion {
    c4_data().build().expect("C4 is valid")
}

pub fn fixed() -> Vec<InclusionData> {
    vec![c1_data(), c2_data(), c3_data(), c4_data()]
}

/// Upper bound on `dim N + dim M` for random inclusions.
pub const RANDOM_TOTAL_DIM: usize = 64;
/// Upper bound on `dim M₁` for random inclusions, so that level 1 stays cheap.
pub const RANDOM_M1_DIM: usize = 400;

/// Seeded random connected inclusion: 1–3 blocks on each side, entries of `G`
/// in 0..=2, blocks of `N` of size 1..=3. Candidates that are disconnected,
/// degenerate or too large are redrawn from the same stream.
pub fn random_inclusion_data(seed: u64) -> InclusionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = rng.random_range(1..=3);
        let p = rng.random_range(1..=3);
        let dims_n: Vec<usize> = (0..m).map(|_| rng.random_range(1..=3)).collect();
        let g: Vec<Vec<usize>> = (0..m).map(|_| (0..p).map(|_| rng.random_range(0..=2)).collect()).collect();
        let Ok(matrix) = InclusionMatrix::new(g.clone()) else { continue };
        let dims_m = matrix.apply_transpose(&dims_n);
        let Ok(v) = validate_inclusion(&dims_n, &dims_m, g.clone()) else { continue };
        let total: usize = dims_n.iter().map(|d| d * d).sum::<usize>() + dims_m.iter().map(|n| n * n).sum::<usize>();
        if total > RANDOM_TOTAL_DIM {
            continue;
        }
        let Ok(inc) = Inclusion::from_validated(v) else { continue };
        if predicted_dimensions(&inc, 1)[2] > RANDOM_M1_DIM {
            continue;
        }
        return InclusionData { name: format!("R{seed}"), dims_n, dims_m, g };
    }
}

pub fn random_inclusion(seed: u64) -> Inclusion {
    random_inclusion_data(seed).build().expect("generator only emits valid inclusions")
}

/// `C1`–`C4`, or `R<seed>` for a random inclusion.
pub fn by_name(name: &str) -> Option<InclusionData> {
    match name {
        "C1" | "c1" => Some(c1_data()),
        "C2" | "c2" => Some(c2_data()),
        "C3" | "c3" => Some(c3_data()),
        "C4" | "c4" => Some(c4_data()),
        _ => {
            let seed = name.strip_prefix('R').or_else(|| name.strip_prefix('r'))?.parse().ok()?;
            Some(random_inclusion_data(seed))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_entries_are_valid() {
        for d in fixed() {
            d.build().unwrap();
        }
        assert!((c4().tau() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_inclusions_respect_bounds() {
        for seed in 0..20 {
            let d = random_inclusion_data(seed);
            assert_eq!(d, random_inclusion_data(seed));
            let inc = d.build().unwrap();
            assert!(inc.small.dimension() + inc.big.dimension() <= RANDOM_TOTAL_DIM);
        }
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(by_name("C2").unwrap(), c2_data());
        assert_eq!(by_name("R7").unwrap().name, "R7");
        assert!(by_name("X1").is_none());
    }
}
