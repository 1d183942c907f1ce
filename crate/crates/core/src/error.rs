//! Error and result types shared across the crate.

use std::fmt;

/// Crate-wide error type.
///
/// The CLI maps variants to exit codes: configuration, usage, metric, and
/// format problems are user-fixable (exit 2); training failures are exit 3;
/// filesystem problems are exit 4.
#[derive(Debug)]
pub enum Error {
    /// Rejected configuration values (invalid beam constants, bad orders,
    /// unsupported damping, malformed experiment files).
    Config(String),
    /// API misuse: mismatched operands, out-of-range indices, bad shapes.
    Usage(String),
    /// Training produced a non-finite loss; carries the offending epoch.
    Training { epoch: usize, message: String },
    /// A network evaluation produced a non-finite value.
    Evaluation(String),
    /// Undefined metric, e.g. relative error against an all-zero truth.
    Metric(String),
    /// Filesystem failure, wrapped with the offending path.
    Io {
        path: String,
        source: std::io::Error,
    },
    /// Malformed on-disk data: CSV fields, checkpoint headers, report files.
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::Training { epoch, message } => {
                write!(f, "training error at epoch {epoch}: {message}")
            }
            Error::Evaluation(msg) => write!(f, "evaluation error: {msg}"),
            Error::Metric(msg) => write!(f, "metric error: {msg}"),
            Error::Io { path, source } => write!(f, "i/o error on {path}: {source}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    /// Wraps an I/O error with the path it touched.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_includes_context() {
        let e = Error::Training {
            epoch: 17,
            message: "loss became NaN".into(),
        };
        let s = e.to_string();
        assert!(s.contains("epoch 17"));
        assert!(s.contains("NaN"));
    }

    #[test]
    fn io_source_is_chained() {
        use std::error::Error as _;
        let e = Error::io(
            "/tmp/x",
            std::io::Error::new(std::io::ErrorKind::NotFound, "gone"),
        );
        assert!(e.source().is_some());
    }
}
