//! Discrete divergence-form operators.
//!
//! Both the linear operator `-div(A ∇u)` and the Leray–Lions operator
//! `-div(a(x, ∇u))` are written in flux form: the linear one as a weighted
//! graph Laplacian, the nonlinear one as the gradient of a discrete convex
//! energy. Pointwise values are fluxes divided by the control-volume measure.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{FieldRole, ScalarField};
use crate::grid::{unit_sphere_area, Grid, GridKind};
use crate::linalg::CsrMatrix;

/// Regularization of the p-Laplacian face gradients.
pub const P_EPSILON: f64 = 1e-8;

/// Symmetric coefficient matrix `A(x)` sampled at every node.
///
/// Entries are stored as `[a11, a12, a22]`; radial grids carry a scalar
/// coefficient stored as `[a, 0, a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    entries: Vec<[f64; 3]>,
    alpha: f64,
    beta: f64,
}

fn eigenvalues([a11, a12, a22]: [f64; 3]) -> (f64, f64) {
    let mean = 0.5 * (a11 + a22);
    let rad = (0.5 * (a11 - a22)).hypot(a12);
    (mean - rad, mean + rad)
}

impl MatrixField {
    /// Validates `α|ξ|² ≤ Aξ·ξ` and `|A| ≤ β` at every node.
    pub fn new(entries: Vec<[f64; 3]>, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta >= alpha && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < alpha <= beta, got alpha = {alpha}, beta = {beta}"
            )));
        }
        for (node, &e) in entries.iter().enumerate() {
            let (lo, hi) = eigenvalues(e);
            let slack = 1e-12 * beta;
            if !(lo >= alpha - slack && hi <= beta + slack) {
                return Err(Error::EllipticityViolated {
                    node,
                    lo,
                    hi,
                    alpha,
                    beta,
                });
            }
        }
        Ok(MatrixField {
            entries,
            alpha,
            beta,
        })
    }

    pub fn identity(grid: &Grid) -> Self {
        MatrixField {
            entries: vec![[1.0, 0.0, 1.0]; grid.len()],
            alpha: 1.0,
            beta: 1.0,
        }
    }

    /// Same matrix at every node; `α`, `β` taken from its eigenvalues.
    pub fn constant(grid: &Grid, a11: f64, a12: f64, a22: f64) -> Result<Self> {
        let e = [a11, a12, a22];
        let (lo, hi) = eigenvalues(e);
        if grid.kind() == GridKind::Radial && (a12 != 0.0 || a11 != a22) {
            return Err(Error::Unsupported(
                "radial grids take a scalar coefficient".into(),
            ));
        }
        Self::new(vec![e; grid.len()], lo, hi)
    }

    /// Samples `A(x, y)` at every node of a planar grid.
    pub fn from_fn(
        grid: &Grid,
        alpha: f64,
        beta: f64,
        a: impl Fn(f64, f64) -> [f64; 3],
    ) -> Result<Self> {
        if grid.kind() == GridKind::Radial {
            return Err(Error::Unsupported(
                "radial grids take a scalar coefficient".into(),
            ));
        }
        let entries = (0..grid.len())
            .map(|n| {
                let [x, y] = grid.coord(n);
                a(x, y)
            })
            .collect();
        Self::new(entries, alpha, beta)
    }

    /// Scalar coefficient `a(r)` on a radial grid.
    pub fn radial(grid: &Grid, alpha: f64, beta: f64, a: impl Fn(f64) -> f64) -> Result<Self> {
        let entries = (0..grid.len())
            .map(|n| {
                let v = a(grid.radius(n));
                [v, 0.0, v]
            })
            .collect();
        Self::new(entries, alpha, beta)
    }

    pub fn entry(&self, node: usize) -> [f64; 3] {
        self.entries[node]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.entries.iter().all(|e| *e == [1.0, 0.0, 1.0])
    }
}

/// Assembled linear operator: edge weights over all nodes plus the system
/// matrix restricted to interior unknowns (boundary values are zero).
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Arc<Grid>,
    edges: Vec<(usize, usize, f64)>,
    matrix: CsrMatrix,
}

/// Assembles `-div(A ∇·)`.
///
/// Planar grids split the cell energy
/// `a11 gx² + 2 a12 gx gy + a22 gy²` into
/// `(a11 - |a12|) gx² + (a22 - |a12|) gy² + |a12| (gx ± gy)²`,
/// giving the 5-point stencil plus one diagonal per cell. All weights are
/// nonnegative when `|a12| ≤ min(a11, a22)`, which keeps the M-matrix
/// property; other coefficients are rejected. Radial grids use the
/// conservative stencil with face weights `ω r_f^{N-1} a_f / h`.
pub fn assemble_linear(grid: &Arc<Grid>, a: &MatrixField) -> Result<DiscreteOperator> {
    if a.len() != grid.len() {
        return Err(Error::LengthMismatch {
            got: a.len(),
            expected: grid.len(),
        });
    }
    let mut edges = Vec::new();
    match grid.kind() {
        GridKind::Planar => {
            for (node, &[a11, a12, a22]) in a.entries.iter().enumerate() {
                let diag = a11.min(a22);
                if a12.abs() > diag * (1.0 + 1e-12) {
                    return Err(Error::NotMonotone {
                        node,
                        a12: a12.abs(),
                        diag,
                    });
                }
            }
            let (nx, ny) = grid.shape();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let n00 = grid.planar_node(i, j);
                    let n10 = grid.planar_node(i + 1, j);
                    let n01 = grid.planar_node(i, j + 1);
                    let n11 = grid.planar_node(i + 1, j + 1);
                    let mut avg = [0.0; 3];
                    for n in [n00, n10, n01, n11] {
                        for (s, v) in avg.iter_mut().zip(a.entries[n]) {
                            *s += 0.25 * v;
                        }
                    }
                    let [a11, a12, a22] = avg;
                    let wx = 0.5 * (a11 - a12.abs()).max(0.0);
                    let wy = 0.5 * (a22 - a12.abs()).max(0.0);
                    edges.push((n00, n10, wx));
                    edges.push((n01, n11, wx));
                    edges.push((n00, n01, wy));
                    edges.push((n10, n11, wy));
                    if a12 > 0.0 {
                        edges.push((n00, n11, a12));
                    } else if a12 < 0.0 {
                        edges.push((n10, n01, -a12));
                    }
                }
            }
        }
        GridKind::Radial => {
            let h = grid.h();
            let area = unit_sphere_area(grid.dim());
            for i in 0..grid.len() - 1 {
                let rf = (i as f64 + 0.5) * h;
                let af = 0.5 * (a.entries[i][0] + a.entries[i + 1][0]);
                edges.push((i, i + 1, area * rf.powi(grid.dim() as i32 - 1) * af / h));
            }
        }
    }
    edges.retain(|&(a, b, w)| w > 0.0 && (grid.is_interior(a) || grid.is_interior(b)));

    let mut triplets = Vec::with_capacity(4 * edges.len());
    for &(a, b, w) in &edges {
        let (ia, ib) = (grid.unknown_index(a), grid.unknown_index(b));
        if let Some(ia) = ia {
            triplets.push((ia, ia, w));
        }
        if let Some(ib) = ib {
            triplets.push((ib, ib, w));
        }
        if let (Some(ia), Some(ib)) = (ia, ib) {
            triplets.push((ia, ib, -w));
            triplets.push((ib, ia, -w));
        }
    }
    let matrix = CsrMatrix::from_triplets(grid.unknowns(), triplets);
    Ok(DiscreteOperator {
        grid: Arc::clone(grid),
        edges,
        matrix,
    })
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// System matrix over the interior unknowns.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Net outward flux `Σ w (u_i - u_j)` at every node, using all nodal
    /// values (boundary values included).
    pub fn flux(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for &(a, b, w) in &self.edges {
            let d = w * (u[a] - u[b]);
            out[a] += d;
            out[b] -= d;
        }
        out
    }

    /// Pointwise `-div(A ∇u)`: flux over control volume on interior nodes,
    /// zero on boundary nodes.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        if !Arc::ptr_eq(u.grid(), &self.grid) && **u.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        let flux = self.flux(u.values());
        pointwise(&self.grid, flux)
    }
}

fn pointwise(grid: &Arc<Grid>, mut flux: Vec<f64>) -> Result<ScalarField> {
    for (n, v) in flux.iter_mut().enumerate() {
        *v = if grid.is_interior(n) {
            *v / grid.measure(n)
        } else {
            0.0
        };
    }
    ScalarField::new(grid, flux, FieldRole::Residual)
}

/// Open interval of admissible exponents `(2 - 1/N, N)`.
pub fn admissible_p_range(dim: usize) -> (f64, f64) {
    let n = dim as f64;
    (2.0 - 1.0 / n, n)
}

/// Leray–Lions flux `a(x, ξ) = w(x) (|ξ|² + ε²)^{(p-2)/2} ξ`.
///
/// `ε` is zero for `p = 2` and [`P_EPSILON`] otherwise. The growth density
/// `c(x)` is carried for the structure checks; the shipped fluxes use `c ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LerayLionsSpec {
    p: f64,
    weight: Vec<f64>,
    c: Vec<f64>,
    alpha: f64,
    beta: f64,
    epsilon: f64,
}

impl LerayLionsSpec {
    /// `-div(|∇u|^{p-2} ∇u)`.
    pub fn p_laplacian(grid: &Grid, p: f64) -> Result<Self> {
        Self::weighted(grid, p, |_, _| 1.0)
    }

    /// `-div(w(x) |∇u|^{p-2} ∇u)` with a positive bounded weight.
    pub fn weighted(grid: &Grid, p: f64, w: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (lo, hi) = admissible_p_range(grid.dim());
        if !(p > lo && p < hi) {
            return Err(Error::ExponentOutOfRange { p, lo, hi });
        }
        Self::unchecked(grid, p, w)
    }

    /// Skips the exponent range check (planar `p = 2` comparisons).
    pub(crate) fn unchecked(grid: &Grid, p: f64, w: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let weight: Vec<f64> = (0..grid.len())
            .map(|n| {
                let [x, y] = grid.coord(n);
                w(x, y)
            })
            .collect();
        if let Some(n) = weight.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "flux weight {} at node {n} is not positive",
                weight[n]
            )));
        }
        let min = weight.iter().copied().fold(f64::INFINITY, f64::min);
        let max = weight.iter().copied().fold(0.0, f64::max);
        Ok(LerayLionsSpec {
            p,
            c: vec![0.0; weight.len()],
            weight,
            alpha: min * (1.0 - 1e-6),
            beta: max * (1.0 + 1e-6),
            epsilon: if p == 2.0 { 0.0 } else { P_EPSILON },
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.weight[node]
    }

    pub fn growth_density(&self, node: usize) -> f64 {
        self.c[node]
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// `a(x_node, ξ)`.
    pub fn flux(&self, node: usize, xi: [f64; 2]) -> [f64; 2] {
        let s = flux_scale(self.p, self.epsilon, xi[0] * xi[0] + xi[1] * xi[1]);
        let w = self.weight[node];
        [w * s * xi[0], w * s * xi[1]]
    }

    /// `(a(x, ξ) - a(x, η)) · (ξ - η)`.
    pub fn monotonicity_gap(&self, node: usize, xi: [f64; 2], eta: [f64; 2]) -> f64 {
        let a = self.flux(node, xi);
        let b = self.flux(node, eta);
        (a[0] - b[0]) * (xi[0] - eta[0]) + (a[1] - b[1]) * (xi[1] - eta[1])
    }

    /// `a(x, ξ) · ξ ≥ α |ξ|^p`; meaningful for `|ξ| ≫ ε`.
    pub fn is_coercive_at(&self, node: usize, xi: [f64; 2]) -> bool {
        let a = self.flux(node, xi);
        let norm = xi[0].hypot(xi[1]);
        a[0] * xi[0] + a[1] * xi[1] >= self.alpha * norm.powf(self.p)
    }

    /// `|a(x, ξ)| ≤ β (c(x) + |ξ|^{p-1})`; meaningful for `|ξ| ≫ ε`.
    pub fn has_growth_bound_at(&self, node: usize, xi: [f64; 2]) -> bool {
        let a = self.flux(node, xi);
        let norm = xi[0].hypot(xi[1]);
        a[0].hypot(a[1]) <= self.beta * (self.c[node] + norm.powf(self.p - 1.0))
    }
}

/// `(t + ε²)^{(p-2)/2}` with `t = |ξ|²`.
fn flux_scale(p: f64, eps: f64, t: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        (t + eps * eps).powf(0.5 * (p - 2.0))
    }
}

/// `((t + ε²)^{p/2} - ε^p) / p`.
fn energy_density(p: f64, eps: f64, t: f64) -> f64 {
    if p == 2.0 {
        0.5 * t
    } else {
        ((t + eps * eps).powf(0.5 * p) - eps.powf(p)) / p
    }
}

#[derive(Debug, Clone)]
enum Stencil {
    /// Lattice cells: corners `[n00, n10, n01, n11]` and averaged weight.
    Planar {
        h: f64,
        cells: Vec<([usize; 4], f64)>,
    },
    /// Radial faces: `(inner, outer, ω r_f^{N-1} w_f)`.
    Radial {
        h: f64,
        faces: Vec<(usize, usize, f64)>,
    },
}

/// The four one-sided gradients of a cell, as (x-edge, y-edge) node pairs.
fn corner_gradients([n00, n10, n01, n11]: [usize; 4]) -> [((usize, usize), (usize, usize)); 4] {
    [
        ((n00, n10), (n00, n01)),
        ((n00, n10), (n10, n11)),
        ((n01, n11), (n00, n01)),
        ((n01, n11), (n10, n11)),
    ]
}

/// Discrete Leray–Lions operator as the gradient of the convex energy
/// `E(u) = Σ_cells Σ_corners (h²/4) w_c Φ(∇u)` (planar) or
/// `E(u) = Σ_faces ω r_f^{N-1} h w_f Φ(u')` (radial), with `Φ' = a`.
///
/// Averaging the four corner gradients of each cell makes `p = 2` reproduce
/// the 5-point Laplacian exactly.
#[derive(Debug, Clone)]
pub struct LerayLionsOperator {
    grid: Arc<Grid>,
    spec: LerayLionsSpec,
    stencil: Stencil,
}

impl LerayLionsOperator {
    pub fn new(grid: &Arc<Grid>, spec: &LerayLionsSpec) -> Result<Self> {
        let (lo, hi) = admissible_p_range(grid.dim());
        if !(spec.p > lo && spec.p < hi) && spec.p != 2.0 {
            return Err(Error::ExponentOutOfRange { p: spec.p, lo, hi });
        }
        if spec.len() != grid.len() {
            return Err(Error::LengthMismatch {
                got: spec.len(),
                expected: grid.len(),
            });
        }
        let h = grid.h();
        let stencil = match grid.kind() {
            GridKind::Planar => {
                let (nx, ny) = grid.shape();
                let mut cells = Vec::with_capacity((nx - 1) * (ny - 1));
                for j in 0..ny - 1 {
                    for i in 0..nx - 1 {
                        let c = [
                            grid.planar_node(i, j),
                            grid.planar_node(i + 1, j),
                            grid.planar_node(i, j + 1),
                            grid.planar_node(i + 1, j + 1),
                        ];
                        if c.iter().any(|&n| grid.is_interior(n)) {
                            let w = 0.25 * c.iter().map(|&n| spec.weight[n]).sum::<f64>();
                            cells.push((c, w));
                        }
                    }
                }
                Stencil::Planar { h, cells }
            }
            GridKind::Radial => {
                let area = unit_sphere_area(grid.dim());
                let faces = (0..grid.len() - 1)
                    .map(|i| {
                        let rf = (i as f64 + 0.5) * h;
                        let w = 0.5 * (spec.weight[i] + spec.weight[i + 1]);
                        (i, i + 1, area * rf.powi(grid.dim() as i32 - 1) * w)
                    })
                    .collect();
                Stencil::Radial { h, faces }
            }
        };
        Ok(LerayLionsOperator {
            grid: Arc::clone(grid),
            spec: spec.clone(),
            stencil,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &LerayLionsSpec {
        &self.spec
    }

    pub fn p(&self) -> f64 {
        self.spec.p
    }

    /// Discrete energy of nodal values `u`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let (p, eps) = (self.spec.p, self.spec.epsilon);
        match &self.stencil {
            Stencil::Planar { h, cells } => {
                let mut e = 0.0;
                for &(c, w) in cells {
                    for ((a0, a1), (b0, b1)) in corner_gradients(c) {
                        let gx = (u[a1] - u[a0]) / h;
                        let gy = (u[b1] - u[b0]) / h;
                        e += 0.25 * h * h * w * energy_density(p, eps, gx * gx + gy * gy);
                    }
                }
                e
            }
            Stencil::Radial { h, faces } => faces
                .iter()
                .map(|&(i, o, c)| {
                    let g = (u[o] - u[i]) / h;
                    c * h * energy_density(p, eps, g * g)
                })
                .sum(),
        }
    }

    /// `∂E/∂u_i` at every node: the discrete flux `-div a(∇u)` integrated
    /// over each control volume.
    pub fn flux(&self, u: &[f64]) -> Vec<f64> {
        let (p, eps) = (self.spec.p, self.spec.epsilon);
        let mut out = vec![0.0; self.grid.len()];
        match &self.stencil {
            Stencil::Planar { h, cells } => {
                for &(c, w) in cells {
                    for ((a0, a1), (b0, b1)) in corner_gradients(c) {
                        let gx = (u[a1] - u[a0]) / h;
                        let gy = (u[b1] - u[b0]) / h;
                        let s = 0.25 * h * w * flux_scale(p, eps, gx * gx + gy * gy);
                        out[a1] += s * gx;
                        out[a0] -= s * gx;
                        out[b1] += s * gy;
                        out[b0] -= s * gy;
                    }
                }
            }
            Stencil::Radial { h, faces } => {
                for &(i, o, c) in faces {
                    let g = (u[o] - u[i]) / h;
                    let f = c * flux_scale(p, eps, g * g) * g;
                    out[o] += f;
                    out[i] -= f;
                }
            }
        }
        out
    }

    /// Hessian of the energy over the interior unknowns (symmetric positive
    /// definite; tridiagonal on radial grids).
    pub fn jacobian(&self, u: &[f64]) -> CsrMatrix {
        let (p, eps) = (self.spec.p, self.spec.epsilon);
        let grid = &self.grid;
        let mut triplets = Vec::new();
        let mut push = |a: usize, b: usize, v: f64| {
            if let (Some(ia), Some(ib)) = (grid.unknown_index(a), grid.unknown_index(b)) {
                triplets.push((ia, ib, v));
            }
        };
        match &self.stencil {
            Stencil::Planar { h, cells } => {
                for &(c, w) in cells {
                    for ((a0, a1), (b0, b1)) in corner_gradients(c) {
                        let gx = (u[a1] - u[a0]) / h;
                        let gy = (u[b1] - u[b0]) / h;
                        let t = gx * gx + gy * gy + eps * eps;
                        let s = flux_scale(p, eps, gx * gx + gy * gy);
                        let q = if p == 2.0 { 0.0 } else { (p - 2.0) * s / t };
                        let hxx = 0.25 * w * (s + q * gx * gx);
                        let hxy = 0.25 * w * (q * gx * gy);
                        let hyy = 0.25 * w * (s + q * gy * gy);
                        let x = [(a1, 1.0), (a0, -1.0)];
                        let y = [(b1, 1.0), (b0, -1.0)];
                        for &(m, sm) in &x {
                            for &(n, sn) in &x {
                                push(m, n, sm * sn * hxx);
                            }
                            for &(n, sn) in &y {
                                push(m, n, sm * sn * hxy);
                                push(n, m, sm * sn * hxy);
                            }
                        }
                        for &(m, sm) in &y {
                            for &(n, sn) in &y {
                                push(m, n, sm * sn * hyy);
                            }
                        }
                    }
                }
            }
            Stencil::Radial { h, faces } => {
                for &(i, o, c) in faces {
                    let g = (u[o] - u[i]) / h;
                    let d = if p == 2.0 {
                        c / h
                    } else {
                        let t = g * g + eps * eps;
                        c * t.powf(0.5 * (p - 4.0)) * ((p - 1.0) * g * g + eps * eps) / h
                    };
                    push(i, i, d);
                    push(o, o, d);
                    push(i, o, -d);
                    push(o, i, -d);
                }
            }
        }
        CsrMatrix::from_triplets(grid.unknowns(), triplets)
    }

    /// Pointwise residual `-div a(∇u)` on interior nodes, zero on the boundary.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        if !Arc::ptr_eq(u.grid(), &self.grid) && **u.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        pointwise(&self.grid, self.flux(u.values()))
    }
}

/// Pointwise `-div a(x, ∇u)` for the given flux rule.
pub fn apply_leray_lions(
    grid: &Arc<Grid>,
    spec: &LerayLionsSpec,
    u: &ScalarField,
) -> Result<ScalarField> {
    LerayLionsOperator::new(grid, spec)?.apply(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};

    fn square(res: usize) -> Arc<Grid> {
        Arc::new(build_grid(Domain::UnitSquare, res).unwrap())
    }

    fn ball(dim: usize, res: usize) -> Arc<Grid> {
        Arc::new(build_grid(Domain::UnitBallRadial { dim }, res).unwrap())
    }

    fn field(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField::from_fn(grid, FieldRole::Residual, f).unwrap()
    }

    #[test]
    fn identity_gives_five_point_stencil() {
        let g = square(8);
        let op = assemble_linear(&g, &MatrixField::identity(&g)).unwrap();
        let m = op.matrix();
        let c = g.unknown_index(g.planar_node(4, 4)).unwrap();
        let e = g.unknown_index(g.planar_node(5, 4)).unwrap();
        let ne = g.unknown_index(g.planar_node(5, 5)).unwrap();
        assert_eq!(m.get(c, c), 4.0);
        assert_eq!(m.get(c, e), -1.0);
        assert_eq!(m.get(c, ne), 0.0);
        assert!(m.is_symmetric());
        assert!(m.is_m_matrix());
    }

    #[test]
    fn anisotropic_quadratic() {
        let g = square(16);
        let a = MatrixField::constant(&g, 2.0, 0.0, 1.0).unwrap();
        let out = assemble_linear(&g, &a)
            .unwrap()
            .apply(&field(&g, |x, _| x * x))
            .unwrap();
        for &n in g.interior_nodes() {
            assert!((out.value(n) + 4.0).abs() < 1e-9, "{}", out.value(n));
        }
    }

    #[test]
    fn mixed_derivative_is_exact_on_quadratics() {
        let g = square(16);
        for a12 in [0.5, -0.5] {
            let a = MatrixField::constant(&g, 1.0, a12, 1.5).unwrap();
            let op = assemble_linear(&g, &a).unwrap();
            assert!(op.matrix().is_m_matrix());
            assert!(op.matrix().is_symmetric());
            let out = op.apply(&field(&g, |x, y| x * y + x * x)).unwrap();
            // -(a11 u_xx + 2 a12 u_xy + a22 u_yy) = -(2 + 2 a12)
            for &n in g.interior_nodes() {
                assert!((out.value(n) + 2.0 + 2.0 * a12).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_non_monotone_and_non_elliptic() {
        let g = square(8);
        let a = MatrixField::constant(&g, 1.0, 1.2, 4.0).unwrap();
        assert!(matches!(
            assemble_linear(&g, &a),
            Err(Error::NotMonotone { .. })
        ));
        assert!(matches!(
            MatrixField::new(vec![[1.0, 0.0, -1.0]; g.len()], 0.5, 2.0),
            Err(Error::EllipticityViolated { .. })
        ));
    }

    #[test]
    fn radial_paraboloid() {
        let g = ball(3, 100);
        let op = assemble_linear(&g, &MatrixField::identity(&g)).unwrap();
        let out = op.apply(&field(&g, |r, _| 1.0 - r * r)).unwrap();
        for &n in g.interior_nodes() {
            assert!((out.value(n) - 6.0).abs() < 1e-8);
        }
        assert!(op.matrix().is_tridiagonal());
    }

    #[test]
    fn p_two_matches_linear() {
        for g in [square(12), ball(3, 40)] {
            let u = field(&g, |x, y| (3.0 * x).sin() + x * y * y);
            let lin = assemble_linear(&g, &MatrixField::identity(&g))
                .unwrap()
                .apply(&u)
                .unwrap();
            let spec = LerayLionsSpec::unchecked(&g, 2.0, |_, _| 1.0).unwrap();
            let nl = apply_leray_lions(&g, &spec, &u).unwrap();
            for (a, b) in lin.values().iter().zip(nl.values()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
            let op = LerayLionsOperator::new(&g, &spec).unwrap();
            let jac = op.jacobian(u.values());
            let lin_op = assemble_linear(&g, &MatrixField::identity(&g)).unwrap();
            for i in 0..g.unknowns() {
                for (j, v) in jac.row(i) {
                    assert!((v - lin_op.matrix().get(i, j)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn constant_has_zero_residual() {
        let g = square(8);
        let spec = LerayLionsSpec::p_laplacian(&g, 1.8).unwrap();
        let out = apply_leray_lions(&g, &spec, &field(&g, |_, _| 3.0)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fundamental_profile_is_p_harmonic() {
        let p = 1.8;
        let e = (p - 3.0) / (p - 1.0);
        let mut worst = Vec::new();
        for res in [200, 400] {
            let g = ball(3, res);
            let spec = LerayLionsSpec::p_laplacian(&g, p).unwrap();
            let u = field(&g, |r, _| if r > 0.0 { r.powf(e) - 1.0 } else { 0.0 });
            let out = apply_leray_lions(&g, &spec, &u).unwrap();
            // Scale: one face flux over the cell volume.
            let mut w: f64 = 0.0;
            for n in 0..g.len() {
                let r = g.radius(n);
                if (0.3..=0.9).contains(&r) {
                    let scale = 4.0
                        * std::f64::consts::PI
                        * (e.abs() * r.powf(e - 1.0)).powf(p - 1.0)
                        * r
                        * r
                        / g.measure(n);
                    w = w.max(out.value(n).abs() / scale);
                }
            }
            worst.push(w);
        }
        assert!(worst[0] < 0.05, "{worst:?}");
        assert!(worst[1] < 0.6 * worst[0], "{worst:?}");
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        let g = square(8);
        let spec = LerayLionsSpec::p_laplacian(&g, 1.7).unwrap();
        let op = LerayLionsOperator::new(&g, &spec).unwrap();
        let u = field(&g, |x, y| (x * 4.0).sin() * y + 0.3 * x);
        let grad = op.flux(u.values());
        let jac = op.jacobian(u.values());
        let node = g.planar_node(3, 2);
        let k = g.unknown_index(node).unwrap();
        let d = 1e-6;
        let mut up = u.values().to_vec();
        let mut dn = u.values().to_vec();
        up[node] += d;
        dn[node] -= d;
        let fd = (op.energy(&up) - op.energy(&dn)) / (2.0 * d);
        assert!((fd - grad[node]).abs() < 1e-6 * (1.0 + grad[node].abs()));
        let fu = op.flux(&up);
        let fl = op.flux(&dn);
        for (m, &nm) in g.interior_nodes().iter().enumerate() {
            let fd = (fu[nm] - fl[nm]) / (2.0 * d);
            assert!(
                (fd - jac.get(m, k)).abs() < 1e-4 * (1.0 + fd.abs()),
                "{fd} vs {}",
                jac.get(m, k)
            );
        }
        for i in 0..g.unknowns() {
            for (j, v) in jac.row(i) {
                assert!((v - jac.get(j, i)).abs() < 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn exponent_range() {
        let g = ball(3, 10);
        assert!(matches!(
            LerayLionsSpec::p_laplacian(&g, 1.5),
            Err(Error::ExponentOutOfRange { .. })
        ));
        assert!(matches!(
            LerayLionsSpec::p_laplacian(&g, 3.0),
            Err(Error::ExponentOutOfRange { .. })
        ));
        assert!(LerayLionsSpec::p_laplacian(&g, 2.5).is_ok());
    }
}
