use thiserror::Error;

pub type Result<T, E = G3mError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum G3mError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid reserves: {0}")]
    InvalidReserves(String),

    #[error("invalid prices: {0}")]
    InvalidPrices(String),

    #[error("infeasible trade: invariant moved from {before} to {after}")]
    InfeasibleTrade { before: f64, after: f64 },

    #[error("trade leaves non-positive reserve in asset {asset}")]
    NonPositiveReserve { asset: usize },

    #[error("asset {asset} has zero weight")]
    ZeroWeight { asset: usize },

    #[error("asset {asset} holds reserves but has zero weight")]
    ZeroWeightReserve { asset: usize },

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("invalid market parameters: {0}")]
    InvalidMarket(String),

    #[error("correlation matrix is not positive semidefinite (pivot {pivot} = {value:e})")]
    NotPositiveSemidefinite { pivot: usize, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("state mismatch: {0}")]
    InconsistentState(String),

    #[error("payoff value {value} at x={x}, t={t} is not positive")]
    NonPositivePayoff { x: f64, t: f64, value: f64 },

    #[error("weight {weight} at x={x}, t={t} lies outside [0, 1]")]
    WeightOutOfRange { x: f64, t: f64, weight: f64 },

    #[error("evaluation time {t} is at or past expiry {expiry}")]
    PastExpiry { t: f64, expiry: f64 },

    #[error("invalid option parameters: {0}")]
    InvalidOption(String),

    #[error("reserve claim has zero elasticity at x={x}")]
    ZeroElasticity { x: f64 },

    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidMcConfig(String),

    #[error("unknown statistic: {0}")]
    UnknownStat(String),
}

impl G3mError {
    /// True for failures of the numerics (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            G3mError::NotPositiveSemidefinite { .. }
                | G3mError::WeightOutOfRange { .. }
                | G3mError::NonPositivePayoff { .. }
                | G3mError::ZeroElasticity { .. }
        )
    }
}
