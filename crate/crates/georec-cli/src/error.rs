//! Error type carrying the process exit code.
//!
//! Exit taxonomy: 1 for I/O and unusable files, 2 for parse/argument
//! problems, 3 for data problems (e.g. not enough training examples),
//! 4 for failed lookups (e.g. unknown user).

use georec::{GraphError, IngestError, PipelineError, QueryError, RankError, ScoreError, SnapshotError};

#[derive(Debug)]
pub struct AppError {
    pub code: u8,
    pub message: String,
}

impl AppError {
    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn lookup(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<SnapshotError> for AppError {
    fn from(e: SnapshotError) -> Self {
        // A snapshot that cannot be opened, read, or trusted is an I/O-level
        // failure from the command's point of view.
        Self::io(e.to_string())
    }
}

impl From<IngestError> for AppError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(inner) => Self::io(inner.to_string()),
            IngestError::Parse { .. } => Self::parse(e.to_string()),
            IngestError::StarsOutOfRange(_) => Self::parse(e.to_string()),
            IngestError::Graph(inner) => Self::data(inner.to_string()),
        }
    }
}

impl From<RankError> for AppError {
    fn from(e: RankError) -> Self {
        match e {
            RankError::Io(inner) => Self::io(inner.to_string()),
            RankError::UnsupportedModelVersion(_) | RankError::CorruptModel(_) => {
                Self::io(e.to_string())
            }
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<QueryError> for AppError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::UnknownNode(_) | QueryError::OriginNotUser(_) => Self::lookup(e.to_string()),
            QueryError::EmptyKeywords | QueryError::WeightOutOfRange(_) => Self::parse(e.to_string()),
        }
    }
}

impl From<ScoreError> for AppError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::InvalidParams { .. } => Self::parse(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<PipelineError> for AppError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Rank(inner) => inner.into(),
            PipelineError::Score(inner) => inner.into(),
        }
    }
}

impl From<GraphError> for AppError {
    fn from(e: GraphError) -> Self {
        Self::data(e.to_string())
    }
}
