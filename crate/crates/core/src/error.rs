use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("excursion law is not summable: c = {0} (need c > 1)")]
    NonSummable(f64),
    #[error("requested length {requested} exceeds the tabulated cap {cap}")]
    CapTooSmall { requested: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no sign change found while bracketing {what} up to {limit}")]
    BracketFailure { what: &'static str, limit: f64 },
    #[error("root solve for {0} did not converge")]
    NoConvergence(&'static str),
    #[error("crossover equation has no root: {0}")]
    NoRoot(String),
    #[error("value {y} lies outside the grid image [{lo}, {hi}]")]
    OutOfRange { y: f64, lo: f64, hi: f64 },
    #[error("N = {n} is not a multiple of the block size {block}")]
    BlockMisaligned { n: usize, block: usize },
    #[error("enumeration size N = {0} exceeds the limit of 20")]
    TooLarge(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
