use serde_json::{json, Value};

/// Why a command stopped; each kind maps to one exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{message}")]
    Assertion { message: String, detail: Value },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Assertion { .. } => 4,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, detail) = match self {
            Failure::Validation(_) => ("validation", Value::Null),
            Failure::Infeasible(_) => ("infeasible", Value::Null),
            Failure::Assertion { detail, .. } => ("assertion", detail.clone()),
        };
        json!({ "error": { "kind": kind, "message": self.to_string(), "detail": detail } })
    }
}

impl From<fretsync::Error> for Failure {
    fn from(e: fretsync::Error) -> Self {
        match e {
            fretsync::Error::Infeasible { .. } | fretsync::Error::Placement { .. } => Failure::Infeasible(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;
