use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion is not unit norm (|q| = {norm})")]
    NonUnitQuaternion { norm: f64 },

    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("innovation covariance is singular (condition number {condition:e})")]
    SingularInnovation { condition: f64 },

    #[error("length mismatch: {estimates} estimates vs {truth} ground-truth samples")]
    LengthMismatch { estimates: usize, truth: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("line {line}: timestamp is not strictly increasing")]
    NonMonotoneTime { line: u64 },

    #[error("line {line}: accelerometer or magnetometer vector has zero norm")]
    DegenerateSample { line: u64 },

    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
