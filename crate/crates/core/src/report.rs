//! Verification outcomes shared by the function and sequence checks.

use serde::{Deserialize, Serialize};

/// One failed check: where it happened, which property, and by how much.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: i64,
    pub check: String,
    /// Amount by which the check was missed, in log units unless noted by `check`.
    pub slack: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub violations: Vec<Violation>,
    /// Named measured quantities (window-edge values, worst slacks, ...).
    pub values: Vec<(String, f64)>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn violate(&mut self, index: i64, check: &str, slack: f64) {
        self.violations.push(Violation {
            index,
            check: check.to_string(),
            slack,
        });
    }

    pub(crate) fn record(&mut self, name: &str, value: f64) {
        self.values.push((name.to_string(), value));
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}
