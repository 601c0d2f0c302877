//! Report-valued results for validators and family checkers.

use std::fmt;

/// Accumulated invariant violations; empty means the object validates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    violations: Vec<String>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn violation(&mut self, message: impl Into<String>) {
        self.violations.push(message.into());
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            write!(f, "ok")
        } else {
            write!(f, "{}", self.violations.join("; "))
        }
    }
}

/// Outcome of a per-input family check: either clean, or the first
/// violation in enumeration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckReport {
    Ok { inputs_checked: usize },
    Violation { input_index: usize, location: String, detail: String },
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        matches!(self, CheckReport::Ok { .. })
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckReport::Ok { inputs_checked } => write!(f, "ok ({inputs_checked} inputs)"),
            CheckReport::Violation { input_index, location, detail } => {
                write!(f, "violation on input #{input_index} at {location}: {detail}")
            }
        }
    }
}
