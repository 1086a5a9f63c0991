use thiserror::Error;

/// Errors raised by grid construction, assembly, solves and analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported domain descriptor `{0}`")]
    UnsupportedDomain(String),

    #[error("resolution {got} is below the minimum of {min}")]
    ResolutionTooSmall { got: usize, min: usize },

    #[error("compact subset with margin {delta} is empty")]
    EmptySubset { delta: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "atom at distance {distance} from the boundary is closer than the spread radius {radius}"
    )]
    AtomTooCloseToBoundary { distance: f64, radius: f64 },

    #[error("atom location ({0}, {1}) lies outside the domain")]
    AtomOutsideDomain(f64, f64),

    #[error("ellipticity violated at node {node}: eigenvalues ({lo}, {hi}) not within [{alpha}, {beta}]")]
    EllipticityViolated {
        node: usize,
        lo: f64,
        hi: f64,
        alpha: f64,
        beta: f64,
    },

    #[error("coefficient at node {node} breaks the M-matrix property: |a12| = {a12} exceeds min(a11, a22) = {diag}")]
    NotMonotone { node: usize, a12: f64, diag: f64 },

    #[error("exponent p = {p} outside the admissible range ({lo}, {hi})")]
    ExponentOutOfRange { p: f64, lo: f64, hi: f64 },

    #[error("linear solver did not reach tolerance {tol:e} in {iterations} iterations (residual {residual:e})")]
    LinearSolverDiverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last change {change:e})")]
    FixedPointDiverged { iterations: usize, change: f64 },

    #[error("Newton iteration stagnated after {iterations} iterations (residual {residual:e})")]
    NewtonStagnated { iterations: usize, residual: f64 },

    #[error("solution is negative ({value:e}) at node {node}; the maximum principle is broken")]
    NegativeSolution { node: usize, value: f64 },

    #[error("sandwich violated by {gap:e} at node {node}")]
    SandwichViolated { node: usize, gap: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("level {level} lies outside the admissible range [1, {sup}]")]
    OutsideRange { level: f64, sup: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
