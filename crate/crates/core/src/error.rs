use thiserror::Error;

use crate::rig::Rig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("rig mismatch in {op}: {left} vs {right}")]
    RigMismatch {
        op: &'static str,
        left: Rig,
        right: Rig,
    },

    #[error("cannot compose: codomain {left} does not match domain {right}")]
    Composition { left: String, right: String },

    #[error("`{prim}` is not defined over {rig}")]
    RigSupport { prim: String, rig: Rig },

    #[error("ill-typed expression at {path}: {detail}")]
    Type { path: String, detail: String },

    #[error("unknown {kind} `{name}`")]
    Catalogue { kind: &'static str, name: String },

    #[error("invalid argument: {0}")]
    Argument(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
