use std::path::PathBuf;

use thiserror::Error;

/// Harness-level errors, classified for the CLI exit codes: input problems
/// exit 1, numerical failures exit 2, I/O failures exit 3.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Model(#[from] pknn::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: u64, message: impl Into<String>) -> Self {
        HarnessError::Parse {
            line,
            message: message.into(),
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Model(pknn::Error::Numerical(_)) => 2,
            HarnessError::Io { .. } => 3,
            _ => 1,
        }
    }
}

/// Map a csv-crate error onto parse/io, keeping the line number when known.
pub(crate) fn from_csv_error(err: csv::Error, path: Option<&std::path::Path>) -> HarnessError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::Io {
            path: path.unwrap_or_else(|| std::path::Path::new("<reader>")).into(),
            source: io,
        },
        other => HarnessError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(
            HarnessError::Config("bad".into()).exit_code(),
            1
        );
        assert_eq!(HarnessError::parse(3, "boom").exit_code(), 1);
        assert_eq!(
            HarnessError::Model(pknn::Error::Numerical("x".into())).exit_code(),
            2
        );
        assert_eq!(
            HarnessError::Model(pknn::Error::KOutOfRange { k: 9, max: 3 }).exit_code(),
            1
        );
        assert_eq!(
            HarnessError::io("/tmp/x", std::io::Error::other("gone")).exit_code(),
            3
        );
    }
}
