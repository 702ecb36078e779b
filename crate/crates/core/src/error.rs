use alloc::string::String;

/// Errors raised by the core library.
///
/// Axiom violations of a well-shaped model are not errors; they are listed in a
/// [`ValidationReport`](crate::model::ValidationReport). Errors are reserved for
/// inputs the algorithms cannot even interpret.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {field}: expected {expected}, found {found}")]
    Dimension {
        field: String,
        expected: usize,
        found: usize,
    },
    /// A model property required by the algorithm (for example conservative
    /// rates) does not hold.
    #[error("model axiom violated: {0}")]
    Axiom(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("action {action} is not admissible at state {state}")]
    InadmissibleAction { state: usize, action: usize },
    #[error("cost index {index} out of range (model has {count} cost functions)")]
    CostIndex { index: usize, count: usize },
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("constrained set empty: the occupation LP is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("policy enumeration needs {needed} policies, cap is {cap}")]
    EnumerationCap { needed: u128, cap: usize },
    #[error("measure is infeasible for the polytope (residual {residual:e})")]
    InfeasibleMeasure { residual: f64 },
    #[error("no mixture reproduces the target measure (best residual {residual:e})")]
    NoDecomposition { residual: f64 },
    #[error("rate bound violated at {location}: intensity {rate} exceeds bound {bound}")]
    RateBound { location: String, rate: f64, bound: f64 },
    #[error("trajectory exploded: more than {jumps} jumps before time {time}")]
    Explosion { jumps: usize, time: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
