//! Line-oriented inclusion files.
//!
//! ```text
//! # comment
//! name = C3
//! dims_N = 1 1
//! dims_M = 1 2
//! G = 1 1
//! G = 0 1
//! depth = 3
//! sigma = 0 1
//! u = 1,0 0,0 0,0
//! u = 0,0 0,1 0,0
//! u = 0,0 0,0 1,0
//! ```
//!
//! `G` and `u` take one row per line. `u` is the block-diagonal unitary of the
//! automorphism block, entries written `re,im`.

use std::fmt;
use std::path::Path;

use crate::automorphisms::{make_automorphism, FdAutomorphism};
use crate::catalog::InclusionData;
use crate::inclusion::{validate_inclusion, Inclusion};
use crate::linalg::{Mat, C64};
use crate::multimatrix::AlgebraElement;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AutomorphismSpec {
    pub sigma: Vec<usize>,
    pub u: Vec<Vec<C64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InclusionSpec {
    pub name: String,
    pub dims_n: Vec<usize>,
    pub dims_m: Vec<usize>,
    pub g: Vec<Vec<usize>>,
    pub depth: Option<usize>,
    pub automorphism: Option<AutomorphismSpec>,
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn ints(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    v.split_whitespace()
        .map(|t| t.parse().map_err(|_| perr(line, format!("{key}: '{t}' is not a nonnegative integer"))))
        .collect()
}

fn complex(line: usize, t: &str) -> Result<C64> {
    let (re, im) = t.split_once(',').ok_or_else(|| perr(line, format!("u: '{t}' is not a 're,im' pair")))?;
    let p = |s: &str| s.parse::<f64>().map_err(|_| perr(line, format!("u: '{t}' is not a 're,im' pair")));
    Ok(C64::new(p(re)?, p(im)?))
}

impl InclusionSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut dims_n: Option<(usize, Vec<usize>)> = None;
        let mut dims_m: Option<(usize, Vec<usize>)> = None;
        let mut g: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut depth = None;
        let mut sigma = None;
        let mut u: Vec<(usize, Vec<C64>)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| perr(line, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            let once = |set: bool| if set { Err(perr(line, format!("duplicate key '{key}'"))) } else { Ok(()) };
            match key {
                "name" => {
                    once(name.is_some())?;
                    if value.is_empty() || value.contains(char::is_whitespace) {
                        return Err(perr(line, "name must be a single nonempty word"));
                    }
                    name = Some(value.to_string());
                }
                "dims_N" => {
                    once(dims_n.is_some())?;
                    dims_n = Some((line, ints(line, key, value)?));
                }
                "dims_M" => {
                    once(dims_m.is_some())?;
                    dims_m = Some((line, ints(line, key, value)?));
                }
                "G" => g.push((line, ints(line, key, value)?)),
                "depth" => {
                    once(depth.is_some())?;
                    depth = Some(value.parse().map_err(|_| perr(line, format!("depth: '{value}' is not an integer")))?);
                }
                "sigma" => {
                    once(sigma.is_some())?;
                    sigma = Some(ints(line, key, value)?);
                }
                "u" => u.push((line, value.split_whitespace().map(|t| complex(line, t)).collect::<Result<_>>()?)),
                other => return Err(perr(line, format!("unknown key '{other}'"))),
            }
        }

        let last = text.lines().count().max(1);
        let name = name.ok_or_else(|| perr(last, "missing key 'name'"))?;
        let (ln_n, dims_n) = dims_n.ok_or_else(|| perr(last, "missing key 'dims_N'"))?;
        let (ln_m, dims_m) = dims_m.ok_or_else(|| perr(last, "missing key 'dims_M'"))?;
        if dims_n.is_empty() {
            return Err(perr(ln_n, "dims_N is empty"));
        }
        if dims_m.is_empty() {
            return Err(perr(ln_m, "dims_M is empty"));
        }
        if g.is_empty() {
            return Err(perr(last, "missing key 'G'"));
        }
        for (r, (line, row)) in g.iter().enumerate() {
            if row.len() != dims_m.len() {
                return Err(perr(
                    *line,
                    format!("G row {} has {} entries, expected {} (one per block of M)", r + 1, row.len(), dims_m.len()),
                ));
            }
        }
        if g.len() != dims_n.len() {
            return Err(perr(
                g.last().map(|x| x.0).unwrap_or(last),
                format!("G has {} rows, expected {} (one per block of N)", g.len(), dims_n.len()),
            ));
        }
        let g: Vec<Vec<usize>> = g.into_iter().map(|(_, r)| r).collect();
        validate_inclusion(&dims_n, &dims_m, g.clone()).map_err(|e| perr(ln_m, e.to_string()))?;

        let automorphism = match (sigma, u.is_empty()) {
            (None, true) => None,
            (None, false) => return Err(perr(u[0].0, "'u' given without 'sigma'")),
            (Some(_), true) => return Err(perr(last, "'sigma' given without 'u'")),
            (Some(sigma), false) => {
                let size: usize = dims_m.iter().sum();
                if u.len() != size {
                    return Err(perr(u.last().unwrap().0, format!("u has {} rows, expected {size}", u.len())));
                }
                for (r, (line, row)) in u.iter().enumerate() {
                    if row.len() != size {
                        return Err(perr(*line, format!("u row {} has {} entries, expected {size}", r + 1, row.len())));
                    }
                }
                Some(AutomorphismSpec { sigma, u: u.into_iter().map(|(_, r)| r).collect() })
            }
        };

        Ok(Self { name, dims_n, dims_m, g, depth, automorphism })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    pub fn from_data(d: &InclusionData) -> Self {
        Self {
            name: d.name.clone(),
            dims_n: d.dims_n.clone(),
            dims_m: d.dims_m.clone(),
            g: d.g.clone(),
            depth: None,
            automorphism: None,
        }
    }

    pub fn data(&self) -> InclusionData {
        InclusionData { name: self.name.clone(), dims_n: self.dims_n.clone(), dims_m: self.dims_m.clone(), g: self.g.clone() }
    }

    pub fn inclusion(&self) -> Result<Inclusion> {
        Inclusion::new(&self.dims_n, &self.dims_m, self.g.clone())
    }

    /// The automorphism block as an automorphism of `M`, if present.
    pub fn automorphism(&self, inc: &Inclusion) -> Result<Option<FdAutomorphism>> {
        let Some(a) = &self.automorphism else { return Ok(None) };
        let n = a.u.len();
        let mut m = Mat::zeros(n, n);
        for (i, row) in a.u.iter().enumerate() {
            for (j, &z) in row.iter().enumerate() {
                m[(i, j)] = z;
            }
        }
        let u = AlgebraElement::from_block_diagonal(&inc.big, &m)?;
        let off = (&u.to_block_diagonal() - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if off > 0.0 {
            return Err(Error::Precondition("u has entries outside the blocks of M".into()));
        }
        make_automorphism(inc, a.sigma.clone(), u).map(Some)
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for InclusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name = {}", self.name)?;
        writeln!(f, "dims_N = {}", join(&self.dims_n))?;
        writeln!(f, "dims_M = {}", join(&self.dims_m))?;
        for row in &self.g {
            writeln!(f, "G = {}", join(row))?;
        }
        if let Some(d) = self.depth {
            writeln!(f, "depth = {d}")?;
        }
        if let Some(a) = &self.automorphism {
            writeln!(f, "sigma = {}", join(&a.sigma))?;
            for row in &a.u {
                let cells: Vec<String> = row.iter().map(|z| format!("{},{}", z.re, z.im)).collect();
                writeln!(f, "u = {}", cells.join(" "))?;
            }
        }
        Ok(())
    }
}
