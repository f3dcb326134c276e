use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter {xi} outside the knot domain [{lo}, {hi}]")]
    OutOfDomain { xi: f64, lo: f64, hi: f64 },

    #[error("least-squares normal matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("arclength {s} is off the path [0, {length}]")]
    OffPath { s: f64, length: f64 },

    #[error("support at s = {0} m is not on the path")]
    SupportOffPath(f64),

    #[error("singular saddle system at t = {t} s (condition estimate {condition:e})")]
    SingularSystem { t: f64, condition: f64 },

    #[error("scenario error at `{key}`: {message}")]
    Scenario { key: String, message: String },

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
