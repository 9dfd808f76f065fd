//! Pass/fail records produced by the verification suites.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// A check passes when `deviation <= tolerance` (NaN never passes).
    pub fn new(name: impl Into<String>, deviation: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            deviation,
            tolerance,
            passed: deviation <= tolerance,
        }
    }

    /// A boolean condition recorded with the slack by which it held (or failed).
    pub fn holds(name: impl Into<String>, passed: bool, slack: f64) -> Check {
        Check {
            name: name.into(),
            deviation: slack,
            tolerance: 0.0,
            passed,
        }
    }

    pub fn condition(name: impl Into<String>, passed: bool) -> Check {
        Check::holds(name, passed, if passed { 0.0 } else { 1.0 })
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}
