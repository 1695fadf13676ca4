use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid guitar spec: {0}")]
    InvalidSpec(String),
    #[error("joint `{joint}` = {value} outside [{lo}, {hi}]")]
    JointLimit {
        joint: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("note {note}: {msg}")]
    Infeasible { note: usize, msg: String },
    #[error("empty score")]
    EmptyScore,
    #[error("note {note}: shift by {offset} moves fret {fret} out of range")]
    ShiftOutOfRange { note: usize, offset: i32, fret: u8 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("note {note}: placement did not converge (max residual {residual:.6} m)")]
    Placement { note: usize, residual: f64 },
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
