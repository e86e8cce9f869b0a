use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("{instrument}: expected {expected} items, got {got}")]
    WrongItemCount {
        instrument: String,
        expected: usize,
        got: usize,
    },
    #[error("{instrument}: item {item} has value {value}, allowed {min}..={max}")]
    OutOfRange {
        instrument: String,
        item: usize,
        value: i32,
        min: i32,
        max: i32,
    },
    #[error("unknown instrument `{0}`")]
    UnknownInstrument(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("need more rows than parameters (n = {n}, p = {p})")]
    TooFewRows { n: usize, p: usize },
    #[error("mixed model needs at least two groups of observations, got {0}")]
    TooFewGroups(usize),
    #[error("mixed model design is singular: {0}")]
    SingularDesign(String),
    #[error("likelihood search failed: {0}")]
    NonConvergence(String),
    #[error("{file}:{row}:{column}: {message}")]
    Csv {
        file: String,
        row: usize,
        column: String,
        message: String,
    },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;
