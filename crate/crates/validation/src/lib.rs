//! Reporting helpers for the acceptance target in `tests/acceptance.rs`.
//!
//! The criteria live in a crate of their own so that the workspace test run
//! reaches them after every other suite.

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

pub fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

impl Outcome {
    pub fn line(&self, id: usize, name: &str, secs: f64) -> String {
        format!(
            "criterion {id:>2} [{name}]: {} ({secs:.1}s) {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

pub fn summary_line(total: usize, failed: &[usize], secs: f64) -> String {
    let mut s = format!(
        "acceptance: {} of {total} passed in {secs:.1}s",
        total - failed.len()
    );
    if !failed.is_empty() {
        s.push_str(&format!("; failed: {failed:?}"));
    }
    s
}
