use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("empty dimension")]
    EmptyDimension,

    #[error("schedule undefined for m = 0")]
    ScheduleUndefined,

    #[error("order below 2: p = {0}")]
    OrderBelowTwo(f64),

    #[error("moment order below 1: q = {0}")]
    OrderBelowOne(f64),

    #[error("selector exceeded cap: no n <= {cap} meets eps = {eps}")]
    SelectorCap { cap: u32, eps: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("point has dimension {got}, problem has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("tree too large: base {base}^{n} exceeds 2^63")]
    TreeTooLarge { base: u64, n: u32 },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("degenerate roots: beta1^2 + 4 beta2 is numerically zero")]
    DegenerateRoots,

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("no reference available for problem '{0}'")]
    NoReference(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("csv output failed: {0}")]
    Csv(String),

    #[error("predicted cost {predicted} of one realization at n = {n} exceeds the budget {budget}")]
    CostBudget { n: u32, predicted: u64, budget: u64 },
}

pub type Result<T> = std::result::Result<T, MlpError>;
