use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid orbital elements: {0}")]
    InvalidElements(String),

    #[error("Kepler iteration did not converge (e = {eccentricity}, M = {mean_anomaly})")]
    KeplerNonConvergence { eccentricity: f64, mean_anomaly: f64 },

    #[error("degenerate state vector: {0}")]
    DegenerateState(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("instance too large for exhaustive search: {0} joint paths")]
    TooLarge(u128),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("malformed binary container: {0}")]
    Format(String),

    #[error("track `{track}`, model {model}: {source}")]
    Job {
        track: String,
        model: String,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
