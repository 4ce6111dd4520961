use thiserror::Error;

/// Failures that abort a command before any verdict is reached. All of them
/// map to exit code 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("symmetry error: P has relative asymmetry {asymmetry:e} above sym_tol {tolerance:e}")]
    Symmetry { asymmetry: f64, tolerance: f64 },
    #[error("usage error: {0}")]
    Usage(String),
}

impl CliError {
    pub fn from_json(err: serde_json::Error) -> Self {
        CliError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
