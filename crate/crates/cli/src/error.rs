use std::fmt;
use std::path::PathBuf;

use diachron_core::ErrorKind;
use thiserror::Error;

/// Pipeline stage, used to prefix error messages and name manifest entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Config,
    Ingest,
    Terms,
    Cluster,
    Map,
    Link,
    Report,
    Syngen,
    Run,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Terms => "terms",
            Stage::Cluster => "cluster",
            Stage::Map => "map",
            Stage::Link => "link",
            Stage::Report => "report",
            Stage::Syngen => "syngen",
            Stage::Run => "run",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Core {
        stage: Stage,
        #[source]
        source: diachron_core::Error,
    },

    #[error("{stage}: missing {what} artifact `{file}` (run `{needs}` first)")]
    MissingArtifact {
        stage: Stage,
        what: &'static str,
        file: String,
        needs: &'static str,
    },

    #[error("{stage}: malformed artifact `{file}`: {message}")]
    BadArtifact {
        stage: Stage,
        file: String,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {path}: {source}")]
    Io {
        stage: Stage,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } => match source.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Input => 3,
                ErrorKind::Numeric => 4,
                ErrorKind::Io => 5,
            },
            CliError::MissingArtifact { .. } | CliError::BadArtifact { .. } => 3,
            CliError::Io { .. } => 5,
        }
    }

    pub fn io(stage: Stage, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            stage,
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attach a stage to core errors.
pub trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for diachron_core::Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|source| CliError::Core { stage, source })
    }
}
