use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin layout: {0}")]
    Layout(String),
    #[error("unknown subsystem label {0:?}")]
    UnknownLabel(String),
    #[error("operator specification must name every subsystem exactly once: {0}")]
    OperatorSpec(String),
    #[error("density state invariant violated: {0}")]
    InvalidState(String),
    #[error("parameter out of range: {name} = {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("assembled Hamiltonian is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("negative duration {0}")]
    NegativeDuration(f64),
    #[error("envelope produced a non-positive state (minimum eigenvalue {0:e})")]
    EnvelopeNotPositive(f64),
    #[error("gate recipe verification failed: {0}")]
    Recipe(String),
    #[error("fit did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("rank-deficient Jacobian")]
    RankDeficient,
    #[error("invalid fit input: {0}")]
    FitInput(String),
    #[error("zero signal slope")]
    ZeroSlope,
    #[error("all readout amplitudes are zero")]
    ZeroAmplitudes,
    #[error("invalid sequence: {0}")]
    Sequence(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
