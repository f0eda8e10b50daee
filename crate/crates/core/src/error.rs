use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid step function: {0}")]
    InvalidStep(String),

    #[error("location {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("need at least 2 points for an envelope, got {0}")]
    TooFewPoints(usize),

    #[error("envelope abscissae must be strictly increasing (index {0})")]
    UnsortedPoints(usize),

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {error:e})")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("invalid model specification: {0}")]
    InvalidModel(String),

    #[error("dataset does not match the model: {0}")]
    DatasetMismatch(String),

    #[error("inverse-CDF bracketing failed: {0}")]
    Bracketing(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("exponent p = {p} outside the admissible range {range}")]
    ExponentRange { p: f64, range: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "argmax hit the simulation window in {rate:.4} of replicates (limit 0.001); increase the half-width"
    )]
    WindowEscape { rate: f64 },

    #[error(
        "no Chernoff estimate cached at {0}; run `monoslope chernoff --p <p> --reps <reps> --seed <seed>` first"
    )]
    MissingChernoff(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
