//! Named residual checks and the versioned report they are collected into.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA: u32 = 1;

/// One verified identity: its residual, the tolerance it was held to, and a
/// formula label naming what was checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub paper_ref: String,
}

impl CheckEntry {
    /// `pass` is `residual ≤ tolerance`; NaN never passes.
    pub fn new(check: impl Into<String>, residual: f64, tolerance: f64, anchor: &str) -> Self {
        CheckEntry {
            check: check.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            paper_ref: anchor.to_string(),
        }
    }

    /// A check whose outcome is a predicate rather than a residual bound.
    pub fn flag(check: impl Into<String>, ok: bool, anchor: &str) -> Self {
        CheckEntry {
            check: check.into(),
            residual: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            pass: ok,
            paper_ref: anchor.to_string(),
        }
    }

    /// Lower-bound check: passes when `value ≥ bound`; residual is the shortfall.
    pub fn at_least(check: impl Into<String>, value: f64, bound: f64, anchor: &str) -> Self {
        CheckEntry {
            check: check.into(),
            residual: (bound - value).max(0.0),
            tolerance: 0.0,
            pass: value >= bound,
            paper_ref: anchor.to_string(),
        }
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.check = format!("{prefix}.{}", self.check);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub bundle: String,
    pub checks: Vec<CheckEntry>,
    pub pass: bool,
}

impl Report {
    /// Sorts checks by name so the output is independent of evaluation order.
    pub fn new(bundle: impl Into<String>, mut checks: Vec<CheckEntry>) -> Self {
        checks.sort_by(|a, b| a.check.cmp(&b.check));
        let pass = checks.iter().all(|c| c.pass);
        Report {
            schema: REPORT_SCHEMA,
            bundle: bundle.into(),
            checks,
            pass,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn render_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bundle: {}", self.bundle)?;
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {:<48} residual {:>10.3e}  tol {:>9.2e}  {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.check,
                c.residual,
                c.tolerance,
                c.paper_ref
            )?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "{}: {} checks, {} failed",
            if self.pass { "PASS" } else { "FAIL" },
            self.checks.len(),
            failed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_residual_fails() {
        assert!(!CheckEntry::new("x", f64::NAN, 1.0, "").pass);
        assert!(CheckEntry::new("x", 0.5, 1.0, "").pass);
    }

    #[test]
    fn checks_are_sorted_and_aggregated() {
        let r = Report::new(
            "b",
            vec![
                CheckEntry::new("z", 0.0, 1.0, ""),
                CheckEntry::new("a", 2.0, 1.0, ""),
            ],
        );
        assert_eq!(r.checks[0].check, "a");
        assert!(!r.pass);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["schema"], 1);
        assert!(r.render_text().contains("[FAIL] a"));
    }
}
