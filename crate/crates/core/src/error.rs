use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("point {point} at time index {time} lies outside the ball of radius {radius} (norm {norm})")]
    DomainViolation {
        time: usize,
        point: usize,
        norm: f64,
        radius: f64,
    },

    #[error("time grid: {0}")]
    Grid(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("simulation failed on path {path} at t={time}: {reason}")]
    Simulation {
        path: usize,
        time: f64,
        reason: String,
    },

    #[error("binning error: {0}")]
    Binning(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("capacity exceeded: {size} cells > {cap}")]
    Capacity { size: usize, cap: usize },

    #[error("degenerate plan: row {row} has zero mass")]
    DegeneratePlan { row: usize },

    #[error("chain consistency: marginal {index} mismatch {mismatch:.3e} exceeds {tol:.1e}")]
    ChainConsistency { index: usize, mismatch: f64, tol: f64 },

    #[error("degenerate fit: convolution at datum {datum} underflows (log value {log_value:.1})")]
    DegenerateFit { datum: usize, log_value: f64 },

    #[error("divergence at iteration {iteration}: marginal {marginal}, particle {particle}")]
    Divergence {
        iteration: usize,
        marginal: usize,
        particle: usize,
    },

    #[error("ledger error: {0}")]
    Ledger(String),

    #[error("composition error: {0}")]
    Composition(String),

    #[error("degenerate clustering: {0}")]
    DegenerateCluster(String),

    #[error("time {time} outside the sampled range [{lo}, {hi}]")]
    Range { time: f64, lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
