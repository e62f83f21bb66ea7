use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{field}: {reason}")]
    Invariant { field: String, reason: String },

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("unknown inlet `{0}`")]
    UnknownInlet(String),

    #[error("position ({x:.1}, {y:.1}) µm lies outside the chamber")]
    OutsideChamber { x: f64, y: f64 },

    #[error("diffusion step {dt} s exceeds the stability bound {bound} s")]
    Unstable { dt: f64, bound: f64 },

    #[error("non-finite state at t = {t} s: {what}")]
    NonFinite { t: f64, what: String },

    #[error("calibration infeasible: violated {0:?}")]
    Infeasible(Vec<String>),

    #[error("target unreachable: {0}")]
    Unreachable(String),

    #[error("malformed event log at line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn invariant(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Invariant {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
