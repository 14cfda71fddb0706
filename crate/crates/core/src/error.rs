use thiserror::Error;

/// Errors raised by network construction, feasibility tests and the
/// optimization routines.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum Error {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("channel references unknown node `{0}`")]
    UnknownNode(String),
    #[error("channel endpoints must be distinct (saw `{0}` twice)")]
    RepeatedEndpoint(String),
    #[error("channel needs at least two endpoints")]
    TooFewEndpoints,
    #[error("channel capacity must be positive, got {0}")]
    NonpositiveCapacity(i64),
    #[error("node id `{0}` must not contain `:`")]
    ReservedCharInNodeId(String),
    #[error("integer overflow while {0}")]
    Overflow(&'static str),
    #[error("wealth must be nonnegative, got {0} for node `{1}`")]
    NegativeWealth(i64, String),
    #[error("wealth sums to {got} but the network holds {expected} coins")]
    WealthTotalMismatch { expected: i64, got: i64 },
    #[error("liquidity state invalid: {0}")]
    InvalidLiquidity(String),
    #[error("circulation invalid: {0}")]
    InvalidCirculation(String),
    #[error("operation requires a network with only two-party channels")]
    HyperchannelPresent,
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("cut set must be a nonempty proper subset of the nodes")]
    ImproperCut,
    #[error("state space too large: {vol} states exceeds bound {bound}")]
    StateSpaceTooLarge { vol: u128, bound: u128 },
    #[error("payer {payer} holds {balance} coins, cannot send {amount}")]
    InsufficientPayerBalance {
        payer: String,
        balance: i64,
        amount: i64,
    },
    #[error("amount must be nonnegative, got {0}")]
    NegativeAmount(i64),
    #[error("rejection sampling exhausted {budget} retries per sample; r(G) is too small")]
    RetryBudgetExceeded { budget: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cycle invalid: {0}")]
    InvalidCycle(String),
    #[error("fee schedule invalid: {0}")]
    InvalidSchedule(String),
    #[error("series is empty")]
    EmptySeries,
    #[error("target wealth is infeasible on this network")]
    InfeasibleWealth,
    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
