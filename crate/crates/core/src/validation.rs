use std::fmt;

use serde::{Deserialize, Serialize};

/// A single finding, addressed by a stable location path such as
/// `slots[2].possible_values`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl Issue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Outcome of validating a schema or a dialogue. Violations are data, not
/// errors: an empty `errors` list means the input is accepted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

/// Name used by the schema layer.
pub type SchemaValidationReport = ValidationReport;

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Issue::new(path, message));
    }

    pub fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Issue::new(path, message));
    }

    /// Appends another report, prefixing its paths.
    pub fn extend_prefixed(&mut self, prefix: &str, other: ValidationReport) {
        let join = |issue: Issue| Issue {
            path: if issue.path.is_empty() {
                prefix.to_string()
            } else if issue.path.starts_with('[') {
                format!("{prefix}{}", issue.path)
            } else {
                format!("{prefix}.{}", issue.path)
            },
            message: issue.message,
        };
        self.errors.extend(other.errors.into_iter().map(join));
        self.warnings.extend(other.warnings.into_iter().map(join));
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.errors {
            writeln!(f, "error: {issue}")?;
        }
        for issue in &self.warnings {
            writeln!(f, "warning: {issue}")?;
        }
        Ok(())
    }
}
