//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use singular_core::{build_grid, Domain, FieldRole, Grid, ProblemSpec, RadonMeasure, ScalarField};

pub fn grid(domain: Domain, resolution: usize) -> Arc<Grid> {
    Arc::new(build_grid(domain, resolution).expect("valid benchmark grid"))
}

/// `f ≡ 1` with a unit point mass at the centre.
pub fn unit_datum_with_dirac(grid: &Arc<Grid>, gamma: f64, n: u64) -> ProblemSpec {
    let f = ScalarField::constant(grid, FieldRole::Datum, 1.0).unwrap();
    let mu = RadonMeasure::dirac(grid, grid.center(), 1.0).unwrap();
    ProblemSpec::laplacian(f, mu, gamma, n).unwrap()
}
