//! Error type shared by all hpx-core modules.

use thiserror::Error;

/// Errors produced by hpx-core operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("group must have at least one block")]
    EmptyDims,
    #[error("group size p^{total_dim} exceeds the 2^31 dense-table limit")]
    GroupTooLarge { total_dim: u32 },
    #[error("index {index} out of range for group of size {size}")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("residue {value} out of range for modulus {p}")]
    BadResidue { value: u64, p: u64 },
    #[error("elements belong to mismatched group specs")]
    SpecMismatch,
    #[error("value table has length {got}, group has {want} elements")]
    BadTableLength { got: usize, want: usize },
    #[error("function value {0} outside [0,1]")]
    ValueOutOfRange(f64),
    #[error("evaluation points must be distinct mod p")]
    PointsNotDistinct,
    #[error("need 1 <= k <= p, got k={k}, p={p}")]
    BadK { k: usize, p: u64 },
    #[error("coefficient {index} violates its tail-subgroup constraint")]
    TailConstraint { index: usize },
    #[error("wrong tuple/coefficient arity: got {got}, want {want}")]
    BadArity { got: usize, want: usize },
    #[error("Hall-Petresco group size overflows u64")]
    SizeOverflow,
    #[error("budget exceeded: operation needs {needed} units, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("exact search supports groups up to {limit} elements, got {size}")]
    ExactRangeExceeded { size: u64, limit: u64 },
    #[error("delta {0} outside [0,1]")]
    BadDelta(f64),
    #[error("operation requires a single-block group (m = 1)")]
    NotSingleBlock,
    #[error("operation requires odd p, got p = 2")]
    EvenPrime,
    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
