use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bracket [{lo}, {hi}] does not enclose target {target} (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64, target: f64 },

    #[error("unsupported capability: {0}")]
    Capability(String),

    #[error("matrix is numerically singular at pivot column {column} (|pivot| = {pivot:e})")]
    Singular { column: usize, pivot: f64 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex iteration limit reached after {0} pivots")]
    IterationLimit(usize),

    #[error("kernel integrity violated: row {row} sums to {sum}")]
    KernelIntegrity { row: usize, sum: f64 },

    #[error("chain has no unique absorbing communicating class: {0}")]
    Structural(String),

    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("operator I - K is numerically singular: y*_{k} = {value:e}")]
    Invertibility { k: usize, value: f64 },

    #[error("support violation: y_bar + s_bar = {0} exceeds 1")]
    Support(f64),

    #[error("fluid approximation needs lambda > mu (lambda = {lambda}, mu = {mu})")]
    Regime { lambda: f64, mu: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
