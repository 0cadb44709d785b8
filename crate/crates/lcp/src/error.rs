use std::path::{Path, PathBuf};

/// Errors of the file layer and the command pipeline.
#[derive(Debug, thiserror::Error)]
pub enum LcpError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// A malformed record, with its 1-based line number.
    #[error("{}:{line}: {msg}", .path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] lcp_core::Error),
}

pub type Result<T, E = LcpError> = std::result::Result<T, E>;

impl LcpError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        LcpError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        LcpError::Parse { path: path.to_path_buf(), line, msg: msg.into() }
    }

    /// Process exit status: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> u8 {
        use lcp_core::Error as E;
        match self {
            LcpError::Usage(_) | LcpError::Core(E::Usage(_)) => 1,
            LcpError::Core(E::Singular(_) | E::NonFiniteLoss { .. } | E::Diverged(_) | E::UndefinedCorrelation(_)) => 3,
            _ => 2,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> LcpError {
    LcpError::Usage(msg.into())
}

pub(crate) fn data(msg: impl Into<String>) -> LcpError {
    LcpError::Data(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(usage("x").exit_code(), 1);
        assert_eq!(LcpError::from(lcp_core::Error::Usage("x".into())).exit_code(), 1);
        assert_eq!(data("x").exit_code(), 2);
        assert_eq!(LcpError::from(lcp_core::Error::MissingContext(vec!["a".into()])).exit_code(), 2);
        assert_eq!(LcpError::from(lcp_core::Error::Diverged("x".into())).exit_code(), 3);
        assert_eq!(LcpError::from(lcp_core::Error::NonFiniteLoss { epoch: 0, batch: 1 }).exit_code(), 3);
        let e = LcpError::parse(Path::new("a.tsv"), 4, "bad");
        assert_eq!(e.to_string(), "a.tsv:4: bad");
    }
}
