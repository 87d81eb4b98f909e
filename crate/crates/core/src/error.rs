use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilityVector(String),

    #[error("row {row} of the kernel is not stochastic: {reason}")]
    RowSum { row: usize, reason: String },

    #[error("detailed balance fails at ({i}, {j}): pi_i k_ij = {lhs:e}, pi_j k_ji = {rhs:e}")]
    DetailedBalance { i: usize, j: usize, lhs: f64, rhs: f64 },

    #[error("stationarity fails at coordinate {coord}: (pi K)_j - pi_j = {deviation:e}")]
    Stationarity { coord: usize, deviation: f64 },

    #[error("observable value g({state}) = {value} is outside [0, 1]")]
    ObservableRange { state: usize, value: f64 },

    #[error("stationary distribution has zero mass at state {0}")]
    DegenerateStationary(usize),

    #[error("relaxation time is infinite; the bound is undefined")]
    InfiniteRelaxation,

    #[error("enumeration of {states}^{m} paths exceeds the limit of {limit}")]
    EnumerationTooLarge { states: usize, m: usize, limit: u64 },

    #[error("budget of {required} paper steps exceeds the cap of {cap}")]
    BudgetOverflow { required: f64, cap: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown gallery chain `{0}`")]
    UnknownGalleryChain(String),

    #[error("chain file error: {0}")]
    ChainFile(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
