use thiserror::Error;

#[derive(Debug, Error)]
pub enum RavuError {
    #[error("parse error at line {line}: {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("backend timed out: {0}")]
    Timeout(String),

    #[error("content blocked by provider")]
    BlockedContent,

    #[error("malformed backend response for {role}: {detail}")]
    MalformedResponse { role: String, detail: String },

    #[error("index is empty")]
    EmptyIndex,

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<RavuError>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RavuError>;

impl RavuError {
    pub fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        RavuError::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn malformed(role: impl std::fmt::Display, detail: impl Into<String>) -> Self {
        RavuError::MalformedResponse {
            role: role.to_string(),
            detail: detail.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        RavuError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips any [`RavuError::Context`] wrappers.
    pub fn root(&self) -> &RavuError {
        match self {
            RavuError::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_blocked(&self) -> bool {
        matches!(self.root(), RavuError::BlockedContent)
    }
}
