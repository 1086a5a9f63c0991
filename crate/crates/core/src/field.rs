use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// What a nodal field stands for; it decides which invariants are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    /// Problem data (`f`, `f_n`): nonnegative.
    Datum,
    /// A computed solution: zero on boundary nodes.
    Solution,
    /// Density of a measure (`μ_n`): nonnegative.
    Density,
    /// Derived quantity of either sign (operator output, residuals).
    Residual,
}

/// Nodal values of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    role: FieldRole,
    index: Option<u64>,
}

impl ScalarField {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>, role: FieldRole) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                got: values.len(),
                expected: grid.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at node {i}"
            )));
        }
        match role {
            FieldRole::Datum | FieldRole::Density => {
                if let Some(i) = values.iter().position(|&v| v < 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "negative data value {} at node {i}",
                        values[i]
                    )));
                }
            }
            FieldRole::Residual => {}
            FieldRole::Solution => {
                if let Some(i) = (0..grid.len()).find(|&i| !grid.is_interior(i) && values[i] != 0.0)
                {
                    return Err(Error::InvalidParameter(format!(
                        "solution is nonzero on boundary node {i}"
                    )));
                }
            }
        }
        Ok(ScalarField {
            grid: Arc::clone(grid),
            values,
            role,
            index: None,
        })
    }

    /// Samples `f(x, y)` at every node (radial grids pass `(r, 0)`).
    /// Solutions are forced to zero on boundary nodes.
    pub fn from_fn(grid: &Arc<Grid>, role: FieldRole, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|n| {
                if role == FieldRole::Solution && !grid.is_interior(n) {
                    0.0
                } else {
                    let [x, y] = grid.coord(n);
                    f(x, y)
                }
            })
            .collect();
        Self::new(grid, values, role)
    }

    pub fn constant(grid: &Arc<Grid>, role: FieldRole, value: f64) -> Result<Self> {
        Self::from_fn(grid, role, |_, _| value)
    }

    pub fn zeros(grid: &Arc<Grid>, role: FieldRole) -> Self {
        ScalarField {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
            role,
            index: None,
        }
    }

    /// Attaches the regularization index `n` the field was computed for.
    pub fn with_index(mut self, n: u64) -> Self {
        self.index = Some(n);
        self
    }

    pub fn index(&self) -> Option<u64> {
        self.index
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫ |u|` with the grid's cell measures.
    pub fn l1_norm(&self) -> f64 {
        self.integrate_with(|v| v.abs())
    }

    /// `∫ u` with the grid's cell measures.
    pub fn integral(&self) -> f64 {
        self.integrate_with(|v| v)
    }

    pub fn integrate_with(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .zip(self.grid.measures())
            .map(|(&v, &m)| m * g(v))
            .sum()
    }

    /// `∫ |u|^q` over all cells.
    pub fn power_integral(&self, q: f64) -> f64 {
        self.integrate_with(|v| v.abs().powf(q))
    }

    /// `(∫ |u|^q)^{1/q}`.
    pub fn lq_norm(&self, q: f64) -> f64 {
        self.power_integral(q).powf(1.0 / q)
    }

    /// `∫ |u - v|`.
    pub fn l1_distance(&self, other: &ScalarField) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.measures())
            .map(|((a, b), m)| m * (a - b).abs())
            .sum())
    }

    /// Minimum over a node set.
    pub fn min_over(&self, nodes: &[usize]) -> f64 {
        nodes
            .iter()
            .map(|&n| self.values[n])
            .fold(f64::INFINITY, f64::min)
    }
}
