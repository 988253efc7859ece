use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight must have at least one entry")]
    EmptyWeight,
    #[error("entry {index} is {value}; entries must be finite and nonnegative")]
    NegativeEntry { index: usize, value: f64 },
    #[error("weight entry {index} is zero; strictly positive entries are required")]
    ZeroWeightEntry { index: usize },
    #[error("prefix sum ending at index {index} is zero")]
    ZeroPrefixSum { index: usize },
    #[error("bad exponent: {0}")]
    BadExponent(String),
    #[error("lambda = {lambda} outside (-1, {upper})")]
    LambdaOutOfRange { lambda: f64, upper: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("alpha = {0} outside (0, 1]")]
    AlphaOutOfRange(f64),
    #[error("gamma = {0} outside (0, 1]")]
    GammaOutOfRange(f64),
    #[error("exponent grid must be strictly increasing")]
    GridNotIncreasing,
    #[error("tail sum diverges for power weight lambda = {lambda} at p = {p}")]
    DivergentTail { lambda: f64, p: f64 },
    #[error("budget must be at least 1")]
    BudgetTooSmall,
    #[error("unsupported operator `{0}`")]
    UnsupportedOperator(String),
    #[error("term norms stopped decaying at term {term}; K is likely below the operator norm")]
    NonconvergentSeries { term: usize },
    #[error("exponent order: {0}")]
    ExponentOrder(String),
    #[error("invalid constant: {0}")]
    BadConstant(String),
    #[error("bad phi0 descriptor: {0}")]
    BadPhiDescriptor(String),
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("bad inequality form `{0}`")]
    BadForm(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("sequence too short: need at least {need} entries, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("bad generator spec: {0}")]
    BadGenerator(String),
    #[error("unsupported output format `{0}`")]
    UnsupportedFormat(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
