use serde::Serialize;
use serde_json::json;

/// One violated invariant of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),

    #[error("invalid configuration: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error(transparent)]
    Core(#[from] qutrit_otto::Error),

    #[error("{failed} of {total} oracle draws exceeded tolerance")]
    OracleMismatch { failed: usize, total: usize },

    #[error("{0}")]
    Usage(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| format!("{}: {}", v.field, v.reason)).collect::<Vec<_>>().join("; ")
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "ParseError",
            CliError::Validation(_) => "ValidationError",
            CliError::Core(e) => e.kind(),
            CliError::OracleMismatch { .. } => "OracleMismatch",
            CliError::Usage(_) => "UsageError",
            CliError::Io { .. } => "IoError",
            CliError::Csv(_) => "CsvError",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::Validation(list) => v["violations"] = json!(list),
            CliError::OracleMismatch { failed, total } => {
                v["failed"] = json!(failed);
                v["total"] = json!(total);
            }
            _ => {}
        }
        v
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
