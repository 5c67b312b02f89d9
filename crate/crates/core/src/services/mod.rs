//! Emulated resource services. Each gated operation checks its permission
//! before touching the resource, so denial never reveals existence.

pub mod compute;
pub mod functions;
pub mod logging;
pub mod metadata;
pub mod registry;
pub mod repo;
pub mod runtime;
pub mod storage;

use thiserror::Error;

use crate::handler::ParseError;
use crate::iam::IamError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Iam(#[from] IamError),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0} already exists")]
    AlreadyExists(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("ssh key rejected")]
    KeyRejected,
    #[error("this function requires an identity token whose audience is its URL")]
    AuthRequired,
    #[error("handler source does not parse: {0}")]
    Parse(#[from] ParseError),
    /// Runtime failure inside a handler. The detail goes to the log, not to
    /// the caller.
    #[error("handler failed; see the function's logs")]
    Handler,
    #[error("handler exceeded an execution limit: {0}")]
    LimitExceeded(String),
    #[error("missing required metadata header `{0}`")]
    MissingHeader(String),
    #[error("unknown metadata path `{0}`")]
    UnknownPath(String),
    #[error("unknown commit `{0}`")]
    UnknownCommit(String),
    #[error("path `{0}` is not in this commit")]
    PathNotInCommit(String),
    #[error("unknown image `{0}`")]
    UnknownImage(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl ServiceError {
    pub fn is_permission_denied(&self) -> bool {
        matches!(self, ServiceError::Iam(IamError::PermissionDenied(_)))
    }
}

pub type ServiceResult<T> = Result<T, ServiceError>;
