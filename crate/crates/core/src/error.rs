use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    Dimension(usize),
    #[error("resolution {0} below the minimum of 4 nodes per axis")]
    Resolution(usize),
    #[error("invalid period {0}")]
    Period(f64),
    #[error("field has {got} values, grid expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("grids do not match")]
    GridMismatch,
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("non-positive value {value} at node {node} of {field}")]
    NonPositive { field: &'static str, node: usize, value: f64 },
    #[error("masses differ by {0:e}")]
    Unbalanced(f64),
    #[error("problem too large for the dense solver: {nodes} nodes (limit {limit})")]
    TooLarge { nodes: usize, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{solver} did not converge after {iterations} iterations (last error {last_error:e})")]
    NotConverged { solver: &'static str, iterations: usize, last_error: f64 },
    #[error("NaN encountered in {0}")]
    NaN(&'static str),
    #[error("transport map not injective at node {node}: 1 + h F'' = {value:e} (h lambda <= 1/8 violated?)")]
    NonInjective { node: usize, value: f64 },
    #[error("continuation failed at s = {s} (last good s = {last_good_s}, lambda = {lambda})")]
    Continuation { s: f64, last_good_s: f64, lambda: f64 },
    #[error("linear solve broke down: {0}")]
    LinearSolve(&'static str),
    #[error("eigenvector is not positive; build the problem in manufactured mode instead")]
    IndefiniteEigenvector,
    #[error("time {t} outside [0, {k}]")]
    TimeOutOfRange { t: f64, k: f64 },
}
