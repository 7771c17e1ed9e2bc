use thiserror::Error;

/// Error type for all core operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet product must have at least one variable")]
    EmptySpace,

    #[error("variable {0} has size 0; every alphabet must be non-empty")]
    EmptyAlphabet(String),

    #[error("total alphabet size overflows addressable memory")]
    SpaceTooLarge,

    #[error("duplicate variable label: {0}")]
    DuplicateVariable(String),

    #[error("unknown variable: {0}")]
    UnknownVariable(String),

    #[error("variable subset must be non-empty")]
    EmptySubset,

    #[error("subsets must be disjoint: variable index {0} appears in both")]
    OverlappingSubsets(usize),

    #[error("distributions live on different alphabet products")]
    ShapeMismatch,

    #[error("mass array has length {got}, expected {expected}")]
    MassLength { expected: usize, got: usize },

    #[error("negative mass {value} at cell {index}")]
    NegativeMass { index: usize, value: f64 },

    #[error("mass sums to {sum}, outside the 1e-12 normalization tolerance")]
    NotNormalized { sum: f64 },

    #[error("invalid coefficient or table entry: {0}")]
    BadSpec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("projection map failed in factor {factor}: {detail}")]
    MapFactor { factor: String, detail: String },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("enumeration would visit {required} points, over the cap {cap}; raise the cap or coarsen the grid")]
    EnumerationCap { required: u128, cap: u64 },

    #[error("feasible set is empty at this grid resolution")]
    EmptyGrid,

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
