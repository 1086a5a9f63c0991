//! Solvers for the regularized problems
//!
//! ```text
//! -div(A ∇u_n) = f_n / (u_n + 1/n)^γ + μ_n,    f_n = min(f, n),
//! ```
//!
//! their companions (no measure, measure only), the `n`-schedule driver and
//! the monotone iteration between a sub- and a supersolution.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{FieldRole, ScalarField};
use crate::grid::Grid;
use crate::linalg::{norm2, solve_spd, CsrMatrix};
use crate::measure::{mollify_with, truncate_datum, Kernel, RadonMeasure};
use crate::operators::{
    assemble_linear, DiscreteOperator, LerayLionsOperator, LerayLionsSpec, MatrixField,
};

/// Values below `-NEGATIVITY_SLACK · max(1, sup u)` are reported as a broken
/// maximum principle.
pub const NEGATIVITY_SLACK: f64 = 1e-12;

/// Principal part of the equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Principal {
    Linear(MatrixField),
    LerayLions(LerayLionsSpec),
}

/// One regularized problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: Arc<Grid>,
    principal: Principal,
    f: ScalarField,
    mu: RadonMeasure,
    gamma: f64,
    n: u64,
    kernel: Kernel,
}

impl ProblemSpec {
    pub fn new(
        principal: Principal,
        f: ScalarField,
        mu: RadonMeasure,
        gamma: f64,
        n: u64,
    ) -> Result<Self> {
        let grid = Arc::clone(f.grid());
        if !Arc::ptr_eq(mu.grid(), &grid) && **mu.grid() != *grid {
            return Err(Error::GridMismatch);
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "singularity exponent must be positive, got {gamma}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter(
                "regularization index must be at least 1".into(),
            ));
        }
        if let Some(i) = f.values().iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "datum is negative at node {i}"
            )));
        }
        let len = match &principal {
            Principal::Linear(a) => a.len(),
            Principal::LerayLions(s) => s.len(),
        };
        if len != grid.len() {
            return Err(Error::LengthMismatch {
                got: len,
                expected: grid.len(),
            });
        }
        let spec = ProblemSpec {
            grid,
            principal,
            f,
            mu,
            gamma,
            n,
            kernel: Kernel::default(),
        };
        if spec.datum_is_zero() && spec.mu.is_zero() {
            return Err(Error::InvalidParameter(
                "datum and measure are both identically zero".into(),
            ));
        }
        Ok(spec)
    }

    /// `-Δu = f/u^γ + μ`.
    pub fn laplacian(f: ScalarField, mu: RadonMeasure, gamma: f64, n: u64) -> Result<Self> {
        let a = MatrixField::identity(f.grid());
        Self::new(Principal::Linear(a), f, mu, gamma, n)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn principal(&self) -> &Principal {
        &self.principal
    }

    pub fn datum(&self) -> &ScalarField {
        &self.f
    }

    pub fn measure(&self) -> &RadonMeasure {
        &self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn with_n(&self, n: u64) -> Self {
        ProblemSpec {
            n: n.max(1),
            ..self.clone()
        }
    }

    pub fn with_kernel(&self, kernel: Kernel) -> Self {
        ProblemSpec {
            kernel,
            ..self.clone()
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.principal.clone(),
            self.f.clone(),
            self.mu.clone(),
            gamma,
            self.n,
        )
        .map(|s| s.with_kernel(self.kernel))
    }

    /// Same problem with `μ = 0`.
    pub fn without_measure(&self) -> Result<Self> {
        let mu = RadonMeasure::zero(&self.grid);
        Self::new(
            self.principal.clone(),
            self.f.clone(),
            mu,
            self.gamma,
            self.n,
        )
        .map(|s| s.with_kernel(self.kernel))
    }

    /// Same problem with `f = 0`.
    pub fn without_datum(&self) -> Result<Self> {
        let f = ScalarField::zeros(&self.grid, FieldRole::Datum);
        Self::new(
            self.principal.clone(),
            f,
            self.mu.clone(),
            self.gamma,
            self.n,
        )
        .map(|s| s.with_kernel(self.kernel))
    }

    pub fn datum_is_zero(&self) -> bool {
        self.f.values().iter().all(|&v| v == 0.0)
    }

    /// `f_n` and `μ_n` for the current index.
    pub fn regularized_data(&self) -> Result<(ScalarField, ScalarField)> {
        let fn_ = truncate_datum(&self.f, self.n as f64)?;
        let mun = mollify_with(&self.mu, self.n, &self.grid, self.kernel)?;
        Ok((fn_, mun))
    }
}

/// Iteration used for the fixed point of the singular term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Damped fixed point `v ↦ θ G(v) + (1 - θ) v`, where `G(v)` solves the
    /// problem with the singular term frozen at `v`.
    #[default]
    Picard,
    /// Newton's method on the discrete equation with a backtracking line
    /// search on its convex energy.
    Newton,
}

/// Iteration controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    /// Initial damping `θ ∈ (0, 1]`, halved whenever the residual grows.
    pub damping: f64,
    /// Stop when `sup |G(v) - v| ≤ tol · sup |G(v)|`.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Relative residual for linear solves and inner Newton solves.
    pub inner_tol: f64,
    /// Increasing regularization indices.
    pub schedule: Vec<u64>,
    /// Successive solutions along the schedule count as stabilized when
    /// `∫|u_n - u_m| ≤ tol · ∫|u_n|`.
    pub stabilization_tol: f64,
    pub scheme: Scheme,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            damping: 0.7,
            outer_tol: 1e-10,
            max_outer: 2000,
            inner_tol: 1e-10,
            schedule: vec![4, 16, 64, 256, 1024],
            stabilization_tol: 1e-3,
            scheme: Scheme::Picard,
        }
    }
}

/// Smallest damping tried before giving up.
const MIN_DAMPING: f64 = 1.0 / 1024.0;

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        for (name, v) in [
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("stabilization_tol", self.stabilization_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter("max_outer must be positive".into()));
        }
        if self.schedule.is_empty()
            || self.schedule[0] == 0
            || self.schedule.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(
                "schedule must be a nonempty strictly increasing list of positive integers".into(),
            ));
        }
        Ok(())
    }

    pub fn with_schedule(mut self, schedule: Vec<u64>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }
}

/// What a single solve did.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub outer_iterations: usize,
    /// Last relative fixed-point change (Picard) or Newton step (Newton).
    pub last_change: f64,
    /// `‖K u - V (F(u) + μ_n)‖₂ / ‖V (F(u) + μ_n)‖₂` over interior nodes.
    pub relative_residual: f64,
    pub final_damping: f64,
    pub inner_iterations: usize,
}

/// A solution with its diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: ScalarField,
    pub diagnostics: Diagnostics,
}

/// The principal part assembled on a grid.
#[derive(Debug, Clone)]
pub enum Assembled {
    Linear(DiscreteOperator),
    LerayLions(LerayLionsOperator),
}

impl Assembled {
    pub fn new(grid: &Arc<Grid>, principal: &Principal) -> Result<Self> {
        Ok(match principal {
            Principal::Linear(a) => Assembled::Linear(assemble_linear(grid, a)?),
            Principal::LerayLions(s) => Assembled::LerayLions(LerayLionsOperator::new(grid, s)?),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            Assembled::Linear(op) => op.grid(),
            Assembled::LerayLions(op) => op.grid(),
        }
    }

    /// Integrated flux at every node.
    pub fn flux(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Assembled::Linear(op) => op.flux(u),
            Assembled::LerayLions(op) => op.flux(u),
        }
    }

    /// Discrete energy whose gradient is [`Assembled::flux`].
    pub fn energy(&self, u: &[f64]) -> f64 {
        match self {
            Assembled::Linear(op) => {
                let k = op.flux(u);
                0.5 * k.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
            }
            Assembled::LerayLions(op) => op.energy(u),
        }
    }

    fn hessian(&self, u: &[f64]) -> CsrMatrix {
        match self {
            Assembled::Linear(op) => op.matrix().clone(),
            Assembled::LerayLions(op) => op.jacobian(u),
        }
    }
}

/// Pointwise source as a function of the nodal value:
/// `s_i(t) = f_i / (max(t, 0) + ε)^γ + μ_i`, or a frozen right-hand side.
struct Source<'a> {
    f: &'a [f64],
    mu: &'a [f64],
    gamma: f64,
    eps: f64,
    /// Optional pointwise clamp `[lo, hi]` applied to `t` before evaluating.
    clamp: Option<(&'a [f64], &'a [f64])>,
}

impl Source<'_> {
    fn value(&self, node: usize, t: f64) -> f64 {
        let t = match self.clamp {
            Some((lo, hi)) => t.max(lo[node]).min(hi[node]),
            None => t,
        };
        let fi = self.f[node];
        let sing = if fi == 0.0 {
            0.0
        } else {
            fi / (t.max(0.0) + self.eps).powf(self.gamma)
        };
        sing + self.mu[node]
    }

    /// `-d s_i / dt ≥ 0` (unclamped).
    fn slope(&self, node: usize, t: f64) -> f64 {
        let fi = self.f[node];
        if fi == 0.0 || t < 0.0 {
            0.0
        } else {
            self.gamma * fi / (t + self.eps).powf(self.gamma + 1.0)
        }
    }

    /// Primitive `∫_0^t s_i` for `t > -ε` (concave in `t`).
    fn primitive(&self, node: usize, t: f64) -> f64 {
        let fi = self.f[node];
        let sing = if fi == 0.0 {
            0.0
        } else if (self.gamma - 1.0).abs() < 1e-14 {
            fi * ((t + self.eps) / self.eps).ln()
        } else {
            let e = 1.0 - self.gamma;
            fi * ((t + self.eps).powf(e) - self.eps.powf(e)) / e
        };
        sing + self.mu[node] * t
    }
}

fn interior_max_abs(grid: &Grid, u: &[f64]) -> f64 {
    grid.interior_nodes()
        .iter()
        .map(|&n| u[n].abs())
        .fold(0.0, f64::max)
}

fn check_sign(grid: &Grid, u: &[f64]) -> Result<()> {
    let slack = NEGATIVITY_SLACK * interior_max_abs(grid, u).max(1.0);
    for &node in grid.interior_nodes() {
        if u[node] < -slack {
            return Err(Error::NegativeSolution {
                node,
                value: u[node],
            });
        }
    }
    Ok(())
}

/// Solves the problem with a frozen pointwise right-hand side `rhs`
/// (nodal values, density units), warm-started from `u`.
fn solve_frozen(
    op: &Assembled,
    rhs: &[f64],
    u: &mut [f64],
    tol: f64,
    max_newton: usize,
) -> Result<usize> {
    let grid = Arc::clone(op.grid());
    match op {
        Assembled::Linear(lin) => {
            let b: Vec<f64> = grid
                .interior_nodes()
                .iter()
                .map(|&n| grid.measure(n) * rhs[n])
                .collect();
            let mut x: Vec<f64> = grid.interior_nodes().iter().map(|&n| u[n]).collect();
            let stats = solve_spd(lin.matrix(), &b, &mut x, tol)?;
            for (k, &n) in grid.interior_nodes().iter().enumerate() {
                u[n] = x[k];
            }
            Ok(stats.iterations)
        }
        Assembled::LerayLions(_) => {
            let zero = vec![0.0; grid.len()];
            let src = Source {
                f: &zero,
                mu: rhs,
                gamma: 1.0,
                eps: 1.0,
                clamp: None,
            };
            newton(op, &src, u, tol, max_newton)
        }
    }
}

/// Relative residual `‖flux(u) - V s(u)‖₂ / ‖V s(u)‖₂` over interior nodes.
fn relative_residual(op: &Assembled, src: &Source<'_>, u: &[f64]) -> f64 {
    let grid = op.grid();
    let flux = op.flux(u);
    let mut r = Vec::with_capacity(grid.unknowns());
    let mut b = Vec::with_capacity(grid.unknowns());
    for &n in grid.interior_nodes() {
        let s = grid.measure(n) * src.value(n, u[n]);
        r.push(flux[n] - s);
        b.push(s);
    }
    let bn = norm2(&b);
    if bn > 0.0 {
        norm2(&r) / bn
    } else {
        norm2(&r)
    }
}

/// Newton's method for `flux(u) = V s(u)` with Armijo backtracking on the
/// convex energy `E(u) - Σ V_i S_i(u_i)`. Iterates stay above `-ε/2`.
fn newton(
    op: &Assembled,
    src: &Source<'_>,
    u: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let grid = Arc::clone(op.grid());
    let nodes = grid.interior_nodes();
    let objective = |u: &[f64]| -> f64 {
        op.energy(u)
            - nodes
                .iter()
                .map(|&n| grid.measure(n) * src.primitive(n, u[n]))
                .sum::<f64>()
    };
    let mut inner = 0;
    let mut res = f64::INFINITY;
    for it in 1..=max_iter {
        let flux = op.flux(u);
        let mut g = Vec::with_capacity(nodes.len());
        let mut b = Vec::with_capacity(nodes.len());
        let mut d = Vec::with_capacity(nodes.len());
        for &n in nodes {
            let v = grid.measure(n);
            let s = v * src.value(n, u[n]);
            g.push(flux[n] - s);
            b.push(s);
            d.push(v * src.slope(n, u[n]));
        }
        let bn = norm2(&b).max(f64::MIN_POSITIVE);
        res = norm2(&g) / bn;
        let h = op.hessian(u).with_added_diagonal(&d);
        let mut step = vec![0.0; nodes.len()];
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let stats = solve_spd(&h, &rhs, &mut step, 1e-3 * tol.max(1e-12))
            .or_else(|_| solve_spd(&h, &rhs, &mut step, 1e-6))?;
        inner += stats.iterations;
        let scale = interior_max_abs(&grid, u).max(f64::MIN_POSITIVE);
        let step_max = step.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        if res <= tol && step_max <= tol.sqrt() * scale {
            return Ok(inner + it);
        }
        // Largest admissible step keeping u > -ε/2.
        let mut t: f64 = 1.0;
        for (k, &n) in nodes.iter().enumerate() {
            if step[k] < 0.0 {
                let room = u[n] + 0.5 * src.eps;
                t = t.min(0.99 * room / -step[k]);
            }
        }
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        let j0 = objective(u);
        let base: Vec<f64> = u.to_vec();
        let mut accepted = false;
        for _ in 0..60 {
            for (k, &n) in nodes.iter().enumerate() {
                u[n] = base[n] + t * step[k];
            }
            let j1 = objective(u);
            if j1 <= j0 + 1e-4 * t * slope || (j1 - j0).abs() <= 1e-15 * j0.abs() {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            u.copy_from_slice(&base);
            // Energy differences are at round-off; accept if already small.
            if res <= tol.sqrt() {
                return Ok(inner + it);
            }
            return Err(Error::NewtonStagnated {
                iterations: it,
                residual: res,
            });
        }
        if step_max * t <= 1e-15 * scale && res <= tol.sqrt() {
            return Ok(inner + it);
        }
    }
    Err(Error::NewtonStagnated {
        iterations: max_iter,
        residual: res,
    })
}

/// Solves `-div(A ∇u) = rhs` with zero boundary values.
pub fn solve_linear(op: &DiscreteOperator, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    let grid = op.grid();
    if !Arc::ptr_eq(rhs.grid(), grid) && **rhs.grid() != **grid {
        return Err(Error::GridMismatch);
    }
    let mut u = vec![0.0; grid.len()];
    solve_frozen(&Assembled::Linear(op.clone()), rhs.values(), &mut u, tol, 0)?;
    ScalarField::new(grid, u, FieldRole::Solution)
}

const MAX_NEWTON: usize = 200;

/// Fixed-point driver shared by the approximating solves and the monotone
/// iteration. `clamp` restricts the argument of the singular term.
#[allow(clippy::too_many_arguments)]
fn fixed_point(
    op: &Assembled,
    f_n: &[f64],
    mu_n: &[f64],
    gamma: f64,
    n: u64,
    clamp: Option<(&[f64], &[f64])>,
    start: Vec<f64>,
    params: &SolveParams,
) -> Result<(Vec<f64>, Diagnostics)> {
    let grid = Arc::clone(op.grid());
    let src = Source {
        f: f_n,
        mu: mu_n,
        gamma,
        eps: 1.0 / n as f64,
        clamp,
    };
    let mut v = start;
    for (i, x) in v.iter_mut().enumerate() {
        if !grid.is_interior(i) {
            *x = 0.0;
        }
    }
    let mut diag = Diagnostics {
        final_damping: params.damping,
        ..Diagnostics::default()
    };

    if params.scheme == Scheme::Newton && clamp.is_none() {
        diag.inner_iterations = newton(
            op,
            &src,
            &mut v,
            params.outer_tol,
            MAX_NEWTON.max(params.max_outer),
        )?;
        check_sign(&grid, &v)?;
        diag.outer_iterations = 1;
        diag.relative_residual = relative_residual(op, &src, &v);
        return Ok((v, diag));
    }

    // A source that does not depend on u needs a single solve.
    let frozen = f_n.iter().all(|&x| x == 0.0);
    let mut theta = params.damping;
    let mut last = f64::INFINITY;
    for it in 1..=params.max_outer {
        let rhs: Vec<f64> = (0..grid.len())
            .map(|i| {
                if grid.is_interior(i) {
                    src.value(i, v[i])
                } else {
                    0.0
                }
            })
            .collect();
        let mut g = v.clone();
        // Intermediate iterates may dip below zero through inexact solves;
        // the source clips them, and only the returned solution is checked.
        diag.inner_iterations += solve_frozen(op, &rhs, &mut g, params.inner_tol, MAX_NEWTON)?;
        let change = grid
            .interior_nodes()
            .iter()
            .map(|&i| (g[i] - v[i]).abs())
            .fold(0.0, f64::max);
        let rel = change / interior_max_abs(&grid, &g).max(f64::MIN_POSITIVE);
        diag.outer_iterations = it;
        diag.last_change = rel;
        if frozen || rel <= params.outer_tol {
            diag.final_damping = theta;
            check_sign(&grid, &g)?;
            diag.relative_residual = relative_residual(op, &src, &g);
            return Ok((g, diag));
        }
        if rel > last {
            theta *= 0.5;
            if theta < MIN_DAMPING {
                return Err(Error::FixedPointDiverged {
                    iterations: it,
                    change: rel,
                });
            }
        }
        last = rel;
        for i in 0..v.len() {
            v[i] += theta * (g[i] - v[i]);
        }
    }
    Err(Error::FixedPointDiverged {
        iterations: params.max_outer,
        change: diag.last_change,
    })
}

/// Solves the regularized problem for `spec.n()`, starting from `start`
/// (zero when `None`).
pub fn solve_approximating_from(
    spec: &ProblemSpec,
    params: &SolveParams,
    start: Option<&ScalarField>,
) -> Result<Solution> {
    params.validate()?;
    let op = Assembled::new(&spec.grid, &spec.principal)?;
    solve_with_operator(&op, spec, params, start)
}

pub(crate) fn solve_with_operator(
    op: &Assembled,
    spec: &ProblemSpec,
    params: &SolveParams,
    start: Option<&ScalarField>,
) -> Result<Solution> {
    let (f_n, mu_n) = spec.regularized_data()?;
    let v0 = match start {
        Some(s) => {
            s.ensure_same_grid(&spec.f)?;
            s.values().to_vec()
        }
        None if params.scheme == Scheme::Picard && !spec.datum_is_zero() => {
            // From zero the singular term starts at f n^γ, far outside the
            // region where the damped map contracts. Cold starts therefore
            // walk up the indices 1, 4, 16, ... below n first.
            let mut v = vec![0.0; spec.grid.len()];
            let mut m = 1;
            while m < spec.n {
                let f_m = truncate_datum(&spec.f, m as f64)?;
                v = fixed_point(
                    op,
                    f_m.values(),
                    mu_n.values(),
                    spec.gamma,
                    m,
                    None,
                    v,
                    params,
                )?
                .0;
                m *= 4;
            }
            v
        }
        None => vec![0.0; spec.grid.len()],
    };
    let (u, diagnostics) = fixed_point(
        op,
        f_n.values(),
        mu_n.values(),
        spec.gamma,
        spec.n,
        None,
        v0,
        params,
    )?;
    let u = ScalarField::new(&spec.grid, u, FieldRole::Solution)?.with_index(spec.n);
    Ok(Solution { u, diagnostics })
}

/// Solves the regularized problem for `spec.n()` from a zero start.
pub fn solve_approximating(spec: &ProblemSpec, params: &SolveParams) -> Result<Solution> {
    solve_approximating_from(spec, params, None)
}

/// Pure singular companion (`μ = 0`).
pub fn solve_pure_singular(spec: &ProblemSpec, params: &SolveParams) -> Result<Solution> {
    solve_approximating(&spec.without_measure()?, params)
}

/// Measure-only companion `-div(A ∇w_n) = μ_n`.
pub fn solve_measure_only(spec: &ProblemSpec, params: &SolveParams) -> Result<Solution> {
    solve_approximating(&spec.without_datum()?, params)
}

/// Leray–Lions approximating problem; the principal part of `spec` must be
/// a [`Principal::LerayLions`].
pub fn solve_p_laplacian_approximating(
    spec: &ProblemSpec,
    params: &SolveParams,
) -> Result<Solution> {
    if !matches!(spec.principal, Principal::LerayLions(_)) {
        return Err(Error::InvalidParameter(
            "expected a Leray-Lions principal part".into(),
        ));
    }
    solve_approximating(spec, params)
}

/// One element of a schedule run.
#[derive(Debug, Clone)]
pub struct SequenceEntry {
    pub n: u64,
    pub u: ScalarField,
    pub diagnostics: Diagnostics,
    /// `∫|u_n - u_prev| / ∫|u_n|`; `None` for the first element.
    pub relative_change: Option<f64>,
}

/// Solutions along an `n` schedule.
#[derive(Debug, Clone)]
pub struct SolutionSequence {
    pub entries: Vec<SequenceEntry>,
    /// Whether the last two elements differ by less than the stabilization
    /// tolerance.
    pub stabilized: bool,
}

impl SolutionSequence {
    /// Limit candidate: the last element.
    pub fn limit(&self) -> &ScalarField {
        &self.entries.last().expect("schedule is nonempty").u
    }

    pub fn get(&self, n: u64) -> Option<&ScalarField> {
        self.entries.iter().find(|e| e.n == n).map(|e| &e.u)
    }
}

/// Runs the schedule, warm-starting each index from the previous solution.
pub fn solve_sequence(spec: &ProblemSpec, params: &SolveParams) -> Result<SolutionSequence> {
    params.validate()?;
    let op = Assembled::new(&spec.grid, &spec.principal)?;
    let mut entries: Vec<SequenceEntry> = Vec::with_capacity(params.schedule.len());
    for &n in &params.schedule {
        let prev = entries.last().map(|e| &e.u);
        let sol = solve_with_operator(&op, &spec.with_n(n), params, prev)?;
        let relative_change = match prev {
            Some(p) => {
                let norm = sol.u.l1_norm();
                Some(sol.u.l1_distance(p)? / norm.max(f64::MIN_POSITIVE))
            }
            None => None,
        };
        entries.push(SequenceEntry {
            n,
            u: sol.u,
            diagnostics: sol.diagnostics,
            relative_change,
        });
    }
    let stabilized = entries
        .last()
        .and_then(|e| e.relative_change)
        .is_some_and(|c| c <= params.stabilization_tol);
    Ok(SolutionSequence {
        entries,
        stabilized,
    })
}

/// [`solve_sequence`] for a Leray–Lions principal part.
pub fn solve_p_laplacian_sequence(
    spec: &ProblemSpec,
    params: &SolveParams,
) -> Result<SolutionSequence> {
    if !matches!(spec.principal, Principal::LerayLions(_)) {
        return Err(Error::InvalidParameter(
            "expected a Leray-Lions principal part".into(),
        ));
    }
    solve_sequence(spec, params)
}

/// Where the monotone iteration starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Subsolution,
    Supersolution,
}

/// Result of the sub/supersolution iteration.
#[derive(Debug, Clone)]
pub struct Bracketed {
    pub u: Solution,
    /// Subsolution `v_n` (problem without the measure).
    pub lower: ScalarField,
    /// Supersolution `v_n + w_n`.
    pub upper: ScalarField,
}

/// Iterates `t ↦ (-Δ)^{-1}(f_n / (clamp(t) + 1/n)^γ + μ_n)` where `clamp`
/// projects onto `[v_n, v_n + w_n]`, starting from either bound. Requires
/// `A = I` and `γ < 1`; fails if the result leaves the bracket by more
/// than `10 × outer_tol × sup u`.
pub fn sub_supersolution_iterate(
    spec: &ProblemSpec,
    params: &SolveParams,
    start: Start,
) -> Result<Bracketed> {
    params.validate()?;
    match &spec.principal {
        Principal::Linear(a) if a.is_identity() => {}
        _ => {
            return Err(Error::Unsupported(
                "the monotone iteration is implemented for A = I".into(),
            ))
        }
    }
    if spec.gamma >= 1.0 {
        return Err(Error::Unsupported(format!(
            "the monotone iteration needs γ < 1, got {}",
            spec.gamma
        )));
    }
    let op = Assembled::new(&spec.grid, &spec.principal)?;
    let (f_n, mu_n) = spec.regularized_data()?;
    let zero = vec![0.0; spec.grid.len()];

    let picard = SolveParams {
        scheme: Scheme::Picard,
        ..params.clone()
    };
    let (lower, _) = fixed_point(
        &op,
        f_n.values(),
        &zero,
        spec.gamma,
        spec.n,
        None,
        zero.clone(),
        params,
    )?;
    let (w, _) = fixed_point(
        &op,
        &zero,
        mu_n.values(),
        spec.gamma,
        spec.n,
        None,
        zero.clone(),
        params,
    )?;
    let upper: Vec<f64> = lower.iter().zip(&w).map(|(a, b)| a + b).collect();
    let init = match start {
        Start::Subsolution => lower.clone(),
        Start::Supersolution => upper.clone(),
    };
    let (u, diagnostics) = fixed_point(
        &op,
        f_n.values(),
        mu_n.values(),
        spec.gamma,
        spec.n,
        Some((&lower, &upper)),
        init,
        &picard,
    )?;
    let slack = 10.0 * params.outer_tol * interior_max_abs(&spec.grid, &u).max(1.0);
    for &node in spec.grid.interior_nodes() {
        let gap = (u[node] - lower[node]).min(upper[node] - u[node]);
        if gap < -slack {
            return Err(Error::SandwichViolated { node, gap });
        }
    }
    let field = |v: Vec<f64>| {
        ScalarField::new(&spec.grid, v, FieldRole::Solution).map(|f| f.with_index(spec.n))
    };
    Ok(Bracketed {
        u: Solution {
            u: field(u)?,
            diagnostics,
        },
        lower: field(lower)?,
        upper: field(upper)?,
    })
}
