use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal contains non-finite samples")]
    NonFinite,
    #[error("signal of length {len} is too short for {levels} decomposition levels")]
    TooShort { len: usize, levels: usize },
    #[error("decomposition mode does not match the requested inverse transform")]
    ModeMismatch,
    #[error("inconsistent decomposition: {0}")]
    LevelMismatch(String),
    #[error("unknown wavelet basis `{0}`")]
    UnknownBasis(String),
    #[error("invalid wavelet basis `{0}`: {1}")]
    InvalidBasis(String, String),
    #[error("invalid sensor parameters: {0}")]
    InvalidParams(String),
    #[error("invalid acquisition plan: {0}")]
    InvalidPlan(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error(
        "correlation maximum at grid boundary (omega = {omega:e} rad/s); widen the search grid"
    )]
    MaximumAtBoundary { omega: f64 },
    #[error("trace is constant after DC removal; correlation is identically zero")]
    DegenerateTrace,
    #[error("trace and margins disagree: {0}")]
    GridMismatch(String),
    #[error("detection window [{t_i:e}, {t_f:e}] s holds {found} negative-slope crossings, {wanted} requested")]
    WindowTooShort {
        t_i: f64,
        t_f: f64,
        found: usize,
        wanted: usize,
    },
    #[error("ensemble needs at least {needed} experiments, got {got}")]
    EnsembleTooSmall { needed: usize, got: usize },
    #[error("noise-free input: mean squared error is zero")]
    ZeroMse,
    #[error("scaling fit: {0}")]
    InvalidFit(String),
    #[error("beta grid: {0}")]
    InvalidBetaGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
