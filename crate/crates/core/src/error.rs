use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("p out of range: crossover probability {0} is not in [0, 1/2]")]
    CrossoverOutOfRange(f64),

    #[error("{name} out of range: {value} is not in {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("binomial index {i} exceeds the number of draws {d}")]
    IndexExceedsDraws { i: u64, d: u64 },

    #[error("strand density beta = {beta} must be below the index rate R_ix = {r_ix}")]
    IndexOverhead { beta: f64, r_ix: f64 },

    #[error("draw vector has {got} entries, block size is {expected}")]
    DrawVectorLength { got: usize, expected: usize },

    #[error("block size K = {k} does not divide the number of strands M = {m}")]
    BlockSizeMismatch { k: usize, m: usize },

    #[error("exact enumeration needs {needed} draw configurations (cap {cap}); use Monte-Carlo")]
    EnumerationTooLarge { needed: u128, cap: u128 },

    #[error("no index rate candidate leaves a positive payload (every C_d <= beta)")]
    NoIndexRateCandidate,

    #[error("simulation needs about {needed:.3e} bit operations, budget is {budget:.3e}; try M <= {suggested_m}")]
    BudgetExceeded {
        needed: f64,
        budget: f64,
        suggested_m: usize,
    },

    #[error("malformed channel dump: {0}")]
    MalformedDump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
