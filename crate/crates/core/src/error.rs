use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GwccaError> = std::result::Result<T, E>;

/// Broad category of a failure, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
    Configuration,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Input => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Configuration => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum GwccaError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("schema error: column `{column}` not found in {path}")]
    MissingColumn { column: String, path: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate neighborhood at location {target}: {reason}")]
    DegenerateNeighborhood { target: usize, reason: String },

    #[error("zero variance in `{variable}`")]
    DegenerateVariance { variable: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid synthetic configuration: {0}")]
    Validity(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("at location {target}: {source}")]
    AtLocation {
        target: usize,
        #[source]
        source: Box<GwccaError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl GwccaError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            GwccaError::Input(_)
            | GwccaError::MissingColumn { .. }
            | GwccaError::Io { .. }
            | GwccaError::Csv { .. } => ErrorKind::Input,
            GwccaError::DegenerateNeighborhood { .. }
            | GwccaError::DegenerateVariance { .. }
            | GwccaError::Numerical(_)
            | GwccaError::DegenerateFit(_)
            | GwccaError::Validity(_) => ErrorKind::Numerical,
            GwccaError::Parameter(_) | GwccaError::Capacity(_) | GwccaError::Configuration(_) => {
                ErrorKind::Configuration
            }
            GwccaError::AtLocation { source, .. } => source.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }

    pub(crate) fn at_location(self, target: usize) -> Self {
        match self {
            e @ GwccaError::AtLocation { .. } => e,
            e @ GwccaError::DegenerateNeighborhood { .. } => e,
            e => GwccaError::AtLocation {
                target,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GwccaError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        GwccaError::Csv {
            path: path.into(),
            source,
        }
    }
}
