// SPDX-License-Identifier: MIT OR Apache-2.0

use bimetal_core::changepoint::CpError;
use bimetal_core::data::DataError;
use bimetal_core::msar::MsError;
use bimetal_core::som::SomError;

/// Pipeline failure, tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{stage}: {source}")]
    Data {
        stage: &'static str,
        #[source]
        source: DataError,
    },
    #[error("{stage}: {source}")]
    Som {
        stage: &'static str,
        #[source]
        source: SomError,
    },
    #[error("{stage}: {source}")]
    Ms {
        stage: &'static str,
        #[source]
        source: MsError,
    },
    #[error("{stage}: {source}")]
    Cp {
        stage: &'static str,
        #[source]
        source: CpError,
    },
    #[error("missing artifact {file}; run `bimetal {command}` first")]
    MissingArtifact { file: String, command: String },
    #[error("{path}: {message}")]
    Artifact { path: String, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit status: 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Data { .. }
            | PipelineError::MissingArtifact { .. }
            | PipelineError::Artifact { .. }
            | PipelineError::Io { .. } => 2,
            PipelineError::Som { source, .. } => match source {
                SomError::Empty | SomError::ZeroDimension | SomError::DimensionMismatch { .. } => 2,
                SomError::EmptyGrid | SomError::ClassCount { .. } | SomError::Schedule(_) => 1,
            },
            PipelineError::Ms { source, .. } => match source {
                MsError::InvalidSpec(_) | MsError::InvalidParams(_) => 1,
                MsError::SeriesTooShort { .. } | MsError::NonFinite { .. } | MsError::Misaligned(_) => 2,
                _ => 3,
            },
            PipelineError::Cp { source, .. } => match source {
                CpError::InvalidConfig(_) => 1,
                _ => 2,
            },
        }
    }

    /// Stage name for stage-tagged errors.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            PipelineError::Data { stage, .. }
            | PipelineError::Som { stage, .. }
            | PipelineError::Ms { stage, .. }
            | PipelineError::Cp { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        PipelineError::Io {
            context: context.into(),
            source,
        }
    }
}
