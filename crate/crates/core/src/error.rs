use thiserror::Error;

/// Errors raised by the solvers, the harness and the configuration layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CFL violation in {stage}: number {number:.4} exceeds limit {limit:.4}")]
    Cfl {
        stage: &'static str,
        number: f64,
        limit: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("density lost positivity in cell {cell}: rho = {value:e}")]
    NegativeDensity { cell: usize, value: f64 },

    #[error("smoothness lost at t = {time:.6}: max|grad u_f| * dt = {indicator:.4}")]
    SmoothnessLost { time: f64, indicator: f64 },

    #[error("initial data rejected: {0}")]
    InitialData(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("sweep aborted at epsilon = {epsilon:e}: {source}")]
    SweepAborted {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
