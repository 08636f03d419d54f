//! Machine-readable verification reports.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// Outcome of one suite: named residuals against a tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    /// The statement the suite checks.
    pub reference: String,
    pub residuals: BTreeMap<String, f64>,
    /// Informational values (dimensions, τ, cardinalities); not compared.
    pub values: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub wall_time_ms: f64,
    /// Items not run, with the reason (usually insufficient depth).
    pub skipped: Vec<String>,
    /// Set when the suite aborted with an error.
    pub error: Option<String>,
}

impl SuiteReport {
    pub fn new(suite: &str, reference: &str, tolerance: f64) -> Self {
        Self {
            suite: suite.to_string(),
            reference: reference.to_string(),
            residuals: BTreeMap::new(),
            values: BTreeMap::new(),
            tolerance,
            passed: true,
            wall_time_ms: 0.0,
            skipped: Vec::new(),
            error: None,
        }
    }

    /// Records a residual; the maximum is kept when the name repeats.
    pub fn residual(&mut self, name: impl Into<String>, value: f64) {
        let entry = self.residuals.entry(name.into()).or_insert(0.0);
        *entry = if value.is_nan() || entry.is_nan() { f64::NAN } else { entry.max(value) };
    }

    pub fn value(&mut self, name: impl Into<String>, value: f64) {
        self.values.insert(name.into(), value);
    }

    pub fn skip(&mut self, what: impl Into<String>) {
        self.skipped.push(what.into());
    }

    /// Pass iff no error and every residual is finite, nonnegative and within tolerance.
    pub fn finalize(&mut self) {
        self.passed = self.error.is_none()
            && self.residuals.values().all(|&r| r.is_finite() && r >= 0.0 && r <= self.tolerance);
    }

    pub fn failures(&self) -> Vec<(&str, f64)> {
        self.residuals
            .iter()
            .filter(|(_, &r)| !(r.is_finite() && r >= 0.0 && r <= self.tolerance))
            .map(|(k, &r)| (k.as_str(), r))
            .collect()
    }
}

/// All suites run for one inclusion.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub inclusion: String,
    pub seed: u64,
    pub depth: Option<usize>,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
    pub wall_time_ms: f64,
}

impl VerificationReport {
    pub fn new(inclusion: &str, seed: u64, depth: Option<usize>, suites: Vec<SuiteReport>) -> Self {
        let passed = suites.iter().all(|s| s.passed);
        let wall_time_ms = suites.iter().map(|s| s.wall_time_ms).sum();
        Self { inclusion: inclusion.to_string(), seed, depth, suites, passed, wall_time_ms }
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "inclusion {}  seed {}", self.inclusion, self.seed)?;
        if let Some(d) = self.depth {
            write!(f, "  depth {d}")?;
        }
        writeln!(f)?;
        for s in &self.suites {
            let worst = s.residuals.values().copied().fold(0.0, crate::par::nan_max);
            writeln!(
                f,
                "{:<10} {:<4} max residual {:>10.3e}  tol {:.0e}  {:>9.1} ms  {}",
                s.suite,
                if s.passed { "PASS" } else { "FAIL" },
                worst,
                s.tolerance,
                s.wall_time_ms,
                s.reference
            )?;
            for (k, v) in &s.values {
                writeln!(f, "    {k:<40} {v}")?;
            }
            for (k, v) in &s.residuals {
                let mark = if v.is_finite() && *v >= 0.0 && *v <= s.tolerance { "" } else { "  <-- exceeds tolerance" };
                writeln!(f, "    {k:<40} {v:.3e}{mark}")?;
            }
            for k in &s.skipped {
                writeln!(f, "    skipped: {k}")?;
            }
            if let Some(e) = &s.error {
                writeln!(f, "    error: {e}")?;
            }
        }
        write!(f, "{}", if self.passed { "all suites passed" } else { "some suites failed" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_requires_finite_residuals_within_tolerance() {
        let mut s = SuiteReport::new("x", "", 1e-8);
        s.residual("a", 1e-9);
        s.finalize();
        assert!(s.passed);
        s.residual("a", 1e-3);
        s.finalize();
        assert!(!s.passed);
        assert_eq!(s.failures(), vec![("a", 1e-3)]);

        let mut n = SuiteReport::new("y", "", 1e-8);
        n.residual("b", f64::NAN);
        n.residual("b", 0.0);
        n.finalize();
        assert!(!n.passed);

        let mut e = SuiteReport::new("z", "", 1e-8);
        e.error = Some("boom".into());
        e.finalize();
        assert!(!e.passed);
    }

    #[test]
    fn report_aggregates() {
        let mut a = SuiteReport::new("a", "", 1.0);
        a.finalize();
        let mut b = SuiteReport::new("b", "", 1.0);
        b.residual("r", 2.0);
        b.finalize();
        let r = VerificationReport::new("C2", 0, None, vec![a.clone()]);
        assert!(r.passed);
        let r = VerificationReport::new("C2", 0, None, vec![a, b]);
        assert!(!r.passed);
        let text = r.to_string();
        assert!(text.contains("FAIL") && text.contains("exceeds tolerance"));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["suites"][1]["residuals"]["r"], 2.0);
    }
}
