use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed configuration: {0}")]
    Parse(String),

    #[error("`{field}` = {value} is out of range ({bound})")]
    OutOfRange {
        field: String,
        value: String,
        bound: String,
    },

    #[error("relevant-image count {count} exceeds images per device {images}")]
    CountTooLarge { count: u64, images: u64 },

    #[error("frame index {frame} outside 1..={max}")]
    FrameOutOfRange { frame: usize, max: usize },

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("probability of an actually relevant image is zero; conditional collection probability undefined")]
    ZeroActualRelevance,

    #[error("{compositions} compositions exceed the enumeration budget of {budget}; use the MCMC estimator")]
    BudgetExceeded { compositions: f64, budget: u64 },

    #[error("baseline energy must be positive, got {0}")]
    ZeroBaseline(f64),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn out_of_range(field: &str, value: impl ToString, bound: &str) -> Error {
    Error::OutOfRange {
        field: field.to_string(),
        value: value.to_string(),
        bound: bound.to_string(),
    }
}
