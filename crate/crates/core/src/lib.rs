//! Finite-difference solvers for singular semilinear elliptic problems
//!
//! ```text
//! -div(A(x) ∇u) = f / u^γ + μ   in Ω,      u = 0 on ∂Ω,
//! ```
//!
//! with a nonnegative datum `f` and a nonnegative bounded measure `μ`,
//! together with the tools used to check the discrete solutions against
//! the a-priori estimates such problems satisfy.
//!
//! The pipeline is: build a [`Grid`], describe the data ([`ScalarField`],
//! [`RadonMeasure`]), assemble an operator, solve the regularized problems
//! `-div(A ∇u_n) = f_n / (u_n + 1/n)^γ + μ_n` along an `n` schedule and
//! analyse the results.

// Negated comparisons (`!(x > 0.0)`) are used on purpose so that NaN is
// rejected together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod measure;
pub mod operators;
pub mod solver;
pub mod verify;

pub use analysis::{EstimateReport, PredictedSpace, Region, Row, Rule, Verdict};
pub use error::{Error, Result};
pub use field::{FieldRole, ScalarField};
pub use grid::{build_grid, Domain, Grid, GridKind, NodeSet};
pub use measure::{mollify, mollify_with, truncate_datum, Atom, DensityExpr, Kernel, RadonMeasure};
pub use operators::{
    apply_leray_lions, assemble_linear, DiscreteOperator, LerayLionsOperator, LerayLionsSpec,
    MatrixField,
};
pub use solver::{
    solve_approximating, solve_approximating_from, solve_linear, solve_measure_only,
    solve_p_laplacian_approximating, solve_p_laplacian_sequence, solve_pure_singular,
    solve_sequence, sub_supersolution_iterate, Principal, ProblemSpec, Scheme, SolutionSequence,
    SolveParams, Start,
};
pub use verify::{Check, CheckOutcome, Suite};
