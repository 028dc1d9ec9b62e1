use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Invariant or argument violation detected at runtime.
    #[error("{0}")]
    Invalid(String),

    /// Pipeline configuration rejected during validation.
    #[error("config error: {0}")]
    Config(String),

    #[error("word {word:?} not found in slice {slice:?}{}", hint_suffix(.hints))]
    WordNotFound {
        word: String,
        slice: String,
        hints: Vec<String>,
    },

    #[error("no shared vocabulary between slices {from:?} and {to:?}")]
    EmptyIntersection { from: String, to: String },

    #[error("training failed on slice {slice:?}: {message}")]
    Train { slice: String, message: String },

    #[error("stage {stage:?} requires missing artifact {path}; run the upstream stage first")]
    MissingArtifact { stage: String, path: PathBuf },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

fn hint_suffix(hints: &[String]) -> String {
    if hints.is_empty() {
        String::new()
    } else {
        format!(" (near matches: {})", hints.join(", "))
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn stage(stage: impl Into<String>, source: Error) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(source),
        }
    }

    /// Process exit code contract: 1 validation, 2 stage failure, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Stage { .. } => 2,
            _ => 1,
        }
    }
}
