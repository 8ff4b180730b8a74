use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report.
///
/// Variants are grouped into three coarse [`ErrorClass`]es so the CLI can map
/// them onto exit codes without matching on each variant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: missing column `{column}`")]
    Schema { column: String },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("coverage error: no indicators for {}", .missing.join(", "))]
    Coverage { missing: Vec<String> },

    #[error("degenerate data: column `{column}` has zero variance")]
    DegenerateData { column: String },

    #[error("referential-integrity error: {0}")]
    ReferentialIntegrity(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("unknown relation `{0}`")]
    Lookup(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("numeric overflow in layer {layer}")]
    NumericOverflow { layer: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("internal-consistency error: {0}")]
    InternalConsistency(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse grouping used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Training,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Calibration(_)
            | Error::Io { .. }
            | Error::Schema { .. }
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Coverage { .. }
            | Error::DegenerateData { .. }
            | Error::ReferentialIntegrity(_)
            | Error::Stratification(_)
            | Error::Lookup(_)
            | Error::Input(_) => ErrorClass::Data,
            Error::Evaluation(_)
            | Error::NumericOverflow { .. }
            | Error::Numeric(_)
            | Error::InternalConsistency(_)
            | Error::Training { .. } => ErrorClass::Training,
            Error::Stage { source, .. } => source.class(),
        }
    }

    /// Innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| Error::Stage {
            stage,
            source: Box::new(source),
        })
    }
}
