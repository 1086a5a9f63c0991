//! The verification checks: each one builds a problem, solves it and
//! judges the result with the estimates of [`crate::analysis`].
//!
//! Checks are grouped into named suites for the command line front end.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::analysis::{
    boundary_layer, comparison_report, fundamental_exponent_check, gradient_quasinorm,
    hopf_lax_check, level_grid, regularity_classify, sobolev_seminorm, truncation_energy_scan,
    truncation_residual_scan, EstimateReport, Region, RegularityConfig, Row, Rule,
};
use crate::error::{Error, Result};
use crate::field::{FieldRole, ScalarField};
use crate::grid::{build_grid, Domain, Grid};
use crate::measure::{dyadic_levels, marcinkiewicz_quasinorm, RadonMeasure};
use crate::operators::LerayLionsSpec;
use crate::solver::{
    solve_approximating, solve_measure_only, solve_p_laplacian_approximating, solve_pure_singular,
    solve_sequence, sub_supersolution_iterate, Principal, ProblemSpec, SolveParams, Start,
};

/// A single verification check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    /// Second-order convergence against `sin(πx) sin(πy)`.
    ManufacturedConvergence,
    /// Radial Green function value at `r = 1/2`.
    GreenFunction,
    /// `max(v, w) ≤ u ≤ v + w` nodally.
    Sandwich,
    /// Interior minimum of `u_n` bounded below independently of `n`.
    UniformLowerBound,
    /// Growth of truncation energies in `k`.
    TruncationEnergy,
    /// Weak and strong integrability thresholds of the Green function.
    WeakLebesgue,
    /// Summability classes for power-law data.
    RegularityTable,
    /// Residual of the transformed problem `v = u^{γ+1}`.
    HopfLax,
    /// Near-origin exponent of the p-Laplacian fundamental solution.
    FundamentalExponent,
    /// Boundary layer average for a strongly singular term.
    BoundaryLayer,
    /// Monotone iterations from below and above agree.
    Uniqueness,
    /// Decay in `k` of the residual mass of the truncated equation.
    ResidualDecay,
}

impl Check {
    pub const ALL: [Check; 12] = [
        Check::ManufacturedConvergence,
        Check::GreenFunction,
        Check::Sandwich,
        Check::UniformLowerBound,
        Check::TruncationEnergy,
        Check::WeakLebesgue,
        Check::RegularityTable,
        Check::HopfLax,
        Check::FundamentalExponent,
        Check::BoundaryLayer,
        Check::Uniqueness,
        Check::ResidualDecay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::ManufacturedConvergence => "manufactured-convergence",
            Check::GreenFunction => "green-function",
            Check::Sandwich => "sandwich",
            Check::UniformLowerBound => "uniform-lower-bound",
            Check::TruncationEnergy => "truncation-energy",
            Check::WeakLebesgue => "weak-lebesgue-thresholds",
            Check::RegularityTable => "regularity-table",
            Check::HopfLax => "hopf-lax",
            Check::FundamentalExponent => "fundamental-exponent",
            Check::BoundaryLayer => "boundary-layer",
            Check::Uniqueness => "uniqueness",
            Check::ResidualDecay => "residual-decay",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Check::ManufacturedConvergence => "L∞ order >= 1.8 on res 33/65/129, gamma 0.5 and 2, under 2 min",
            Check::GreenFunction => "radial N=3 Dirac solution at r=0.5 within 2% of 1/(4π)",
            Check::Sandwich => "disk, f=1, Dirac, gamma 0.5, n=256: gaps >= -1e-8",
            Check::UniformLowerBound => "min of u_n on d>=0.25 >= min v_1 and stable after n=16",
            Check::TruncationEnergy => "disk, mass-20 Dirac, k in [1, sup u]: slopes <= 1.15 (gamma 0.5), <= 2.15 (gamma 2)",
            Check::WeakLebesgue => "M^3 norm stable, grad L^1.6 grows, grad L^1.4 stable",
            Check::RegularityTable => "probes below the predicted exponent stable, above grow",
            Check::HopfLax => "transformed residual <= 10x original, gamma 0.5 and 1",
            Check::FundamentalExponent => "exponent within 5% of (p-N)/(p-1), p=2 equals linear",
            Check::BoundaryLayer => "layer average shrinks by <= 0.9 per halving, gamma 3",
            Check::Uniqueness => "sub/supersolution starts agree within 1e-6 in L1",
            Check::ResidualDecay => "residual mass slope <= -gamma+0.2 for gamma 2",
        }
    }

    /// Wall-clock budget, for checks that have one.
    pub fn time_limit(self) -> Option<Duration> {
        match self {
            Check::ManufacturedConvergence => Some(Duration::from_secs(120)),
            _ => None,
        }
    }

    pub fn run(self) -> Result<CheckOutcome> {
        let start = Instant::now();
        let reports = match self {
            Check::ManufacturedConvergence => manufactured()?,
            Check::GreenFunction => green_function()?,
            Check::Sandwich => sandwich()?,
            Check::UniformLowerBound => uniform_lower_bound()?,
            Check::TruncationEnergy => truncation_energy()?,
            Check::WeakLebesgue => weak_lebesgue()?,
            Check::RegularityTable => regularity_table()?,
            Check::HopfLax => hopf_lax()?,
            Check::FundamentalExponent => fundamental_exponent()?,
            Check::BoundaryLayer => layer()?,
            Check::Uniqueness => uniqueness()?,
            Check::ResidualDecay => residual_decay()?,
        };
        Ok(CheckOutcome {
            check: self,
            reports,
            elapsed: start.elapsed(),
        })
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Reports produced by one check, with its running time.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub check: Check,
    pub reports: Vec<EstimateReport>,
    pub elapsed: Duration,
}

impl CheckOutcome {
    pub fn within_time(&self) -> bool {
        self.check.time_limit().is_none_or(|t| self.elapsed <= t)
    }

    pub fn passed(&self) -> bool {
        !self.reports.is_empty()
            && self.reports.iter().all(EstimateReport::passed)
            && self.within_time()
    }

    /// `PASS name (1.2 s): description`.
    pub fn line(&self) -> String {
        format!(
            "{} {} ({:.1} s): {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.check,
            self.elapsed.as_secs_f64(),
            self.check.description()
        )
    }
}

/// Named groups of checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Manufactured,
    Sandwich,
    TruncationEnergy,
    Marcinkiewicz,
    RegularityTable,
    HopfLax,
    PLaplacian,
    BoundaryLayer,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Manufactured,
        Suite::Sandwich,
        Suite::TruncationEnergy,
        Suite::Marcinkiewicz,
        Suite::RegularityTable,
        Suite::HopfLax,
        Suite::PLaplacian,
        Suite::BoundaryLayer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Manufactured => "manufactured",
            Suite::Sandwich => "sandwich",
            Suite::TruncationEnergy => "truncation-energy",
            Suite::Marcinkiewicz => "marcinkiewicz",
            Suite::RegularityTable => "regularity-table",
            Suite::HopfLax => "hopf-lax",
            Suite::PLaplacian => "p-laplacian",
            Suite::BoundaryLayer => "boundary-layer",
        }
    }

    pub fn checks(self) -> &'static [Check] {
        match self {
            Suite::Manufactured => &[Check::ManufacturedConvergence],
            Suite::Sandwich => &[Check::Sandwich, Check::UniformLowerBound, Check::Uniqueness],
            Suite::TruncationEnergy => &[Check::TruncationEnergy, Check::ResidualDecay],
            Suite::Marcinkiewicz => &[Check::GreenFunction, Check::WeakLebesgue],
            Suite::RegularityTable => &[Check::RegularityTable],
            Suite::HopfLax => &[Check::HopfLax],
            Suite::PLaplacian => &[Check::FundamentalExponent],
            Suite::BoundaryLayer => &[Check::BoundaryLayer],
        }
    }

    pub fn run(self) -> Result<Vec<CheckOutcome>> {
        self.checks().iter().map(|c| c.run()).collect()
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite '{s}'")))
    }
}

fn radial(res: usize) -> Result<Arc<Grid>> {
    Ok(Arc::new(build_grid(
        Domain::UnitBallRadial { dim: 3 },
        res,
    )?))
}

fn planar(domain: Domain, res: usize) -> Result<Arc<Grid>> {
    Ok(Arc::new(build_grid(domain, res)?))
}

fn origin_dirac_problem(grid: &Arc<Grid>, n: u64) -> Result<ProblemSpec> {
    let mu = RadonMeasure::dirac(grid, [0.0, 0.0], 1.0)?;
    ProblemSpec::laplacian(ScalarField::zeros(grid, FieldRole::Datum), mu, 0.5, n)
}

/// Disk, `f ≡ 1`, unit Dirac mass at the center.
fn disk_problem(gamma: f64, n: u64) -> Result<ProblemSpec> {
    weighted_disk_problem(gamma, n, 1.0)
}

fn weighted_disk_problem(gamma: f64, n: u64, mass: f64) -> Result<ProblemSpec> {
    let grid = planar(Domain::UnitDisk, 64)?;
    let f = ScalarField::constant(&grid, FieldRole::Datum, 1.0)?;
    let mu = RadonMeasure::dirac(&grid, grid.center(), mass)?;
    ProblemSpec::laplacian(f, mu, gamma, n)
}

fn manufactured() -> Result<Vec<EstimateReport>> {
    let params = SolveParams::default();
    let mut reports = Vec::new();
    for gamma in [0.5, 2.0] {
        let mut errors = Vec::new();
        for res in [33, 65, 129] {
            let grid = planar(Domain::UnitSquare, res)?;
            let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
            let f = ScalarField::from_fn(&grid, FieldRole::Datum, |x, y| {
                2.0 * PI * PI * exact(x, y).max(0.0).powf(1.0 + gamma)
            })?;
            let spec = ProblemSpec::laplacian(f, RadonMeasure::zero(&grid), gamma, 1_000_000)?;
            let u = solve_approximating(&spec, &params)?.u;
            let err = (0..grid.len())
                .map(|n| {
                    let [x, y] = grid.coord(n);
                    (u.value(n) - exact(x, y)).abs()
                })
                .fold(0.0, f64::max);
            errors.push((res, grid.h(), err));
        }
        let rows = errors
            .windows(2)
            .map(|w| {
                Row::bounded(
                    w[1].0 as f64,
                    (w[0].2 / w[1].2).ln() / (w[0].1 / w[1].1).ln(),
                    1.8,
                )
            })
            .collect();
        reports.push(EstimateReport::new(
            format!("manufactured-order[gamma={gamma}]"),
            "resolution",
            rows,
            Rule::AtLeastBound,
        ));
    }
    Ok(reports)
}

fn green_function() -> Result<Vec<EstimateReport>> {
    let grid = radial(400)?;
    let w = solve_measure_only(
        &origin_dirac_problem(&grid, 1 << 40)?,
        &SolveParams::default(),
    )?
    .u;
    let exact = 1.0 / (4.0 * PI);
    let got = w.value(grid.nearest_node([0.5, 0.0]));
    let rows = vec![Row::bounded(0.5, ((got - exact) / exact).abs(), 0.02)];
    Ok(vec![EstimateReport::new(
        "green-function-relative-error",
        "r",
        rows,
        Rule::AtMostBound,
    )])
}

fn sandwich() -> Result<Vec<EstimateReport>> {
    let spec = disk_problem(0.5, 256)?;
    let params = SolveParams::default();
    let u = solve_approximating(&spec, &params)?.u;
    let v = solve_pure_singular(&spec, &params)?.u;
    let w = solve_measure_only(&spec, &params)?.u;
    Ok(vec![comparison_report(&u, &v, &w)?])
}

fn uniform_lower_bound() -> Result<Vec<EstimateReport>> {
    let spec = disk_problem(0.5, 256)?;
    let params = SolveParams::default().with_schedule(vec![4, 16, 64, 256]);
    let inner = spec.grid().compact_subset(0.25)?;
    let v1 = solve_pure_singular(&spec.with_n(1), &params)?.u;
    let floor = v1.min_over(inner.nodes()) - 1e-8;
    let seq = solve_sequence(&spec, &params)?;
    let mins: Vec<(u64, f64)> = seq
        .entries
        .iter()
        .map(|e| (e.n, e.u.min_over(inner.nodes())))
        .collect();
    let bounded = mins
        .iter()
        .map(|&(n, m)| Row::bounded(n as f64, m, floor))
        .collect();
    let stable = mins
        .iter()
        .filter(|&&(n, _)| n >= 16)
        .map(|&(n, m)| Row::new(n as f64, m))
        .collect();
    Ok(vec![
        EstimateReport::new("interior-minimum-floor", "n", bounded, Rule::AtLeastBound),
        EstimateReport::new("interior-minimum-stability", "n", stable, Rule::Stable(0.2)),
    ])
}

fn uniqueness() -> Result<Vec<EstimateReport>> {
    let spec = disk_problem(0.5, 256)?;
    let params = SolveParams::default();
    let below = sub_supersolution_iterate(&spec, &params, Start::Subsolution)?
        .u
        .u;
    let above = sub_supersolution_iterate(&spec, &params, Start::Supersolution)?
        .u
        .u;
    let rows = vec![Row::bounded(spec.gamma(), below.l1_distance(&above)?, 1e-6)];
    Ok(vec![EstimateReport::new(
        "two-start-l1-distance",
        "gamma",
        rows,
        Rule::AtMostBound,
    )])
}

fn truncation_energy() -> Result<Vec<EstimateReport>> {
    let mut reports = Vec::new();
    // A heavier atom lifts sup u well above 1, the smallest admissible level.
    for gamma in [0.5, 2.0] {
        let u = solve_approximating(
            &weighted_disk_problem(gamma, 256, 20.0)?,
            &SolveParams::default(),
        )?
        .u;
        reports.push(truncation_energy_scan(&u, gamma, &level_grid(&u, 8)?)?);
    }
    Ok(reports)
}

fn residual_decay() -> Result<Vec<EstimateReport>> {
    let grid = radial(20_000)?;
    let h = grid.h();
    let f = ScalarField::from_fn(&grid, FieldRole::Datum, |r, _| r.max(0.5 * h).powf(-2.9))?;
    let density = ScalarField::constant(&grid, FieldRole::Density, 1.0)?;
    let mu = RadonMeasure::new(&grid, Vec::new(), Some(density), f64::INFINITY)?;
    let spec = ProblemSpec::laplacian(f, mu, 2.0, 1 << 50)?;
    let u = solve_approximating(&spec, &SolveParams::default())?.u;
    Ok(vec![truncation_residual_scan(
        &u,
        &spec,
        &[1.0, 2.0, 4.0, 8.0],
    )?])
}

fn weak_lebesgue() -> Result<Vec<EstimateReport>> {
    let levels = dyadic_levels(1.0 / 64.0, 30);
    let (mut weak, mut above, mut below, mut grad_weak) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for res in [200, 400, 800] {
        let grid = radial(res)?;
        let u = solve_measure_only(
            &origin_dirac_problem(&grid, 1 << 40)?,
            &SolveParams::default(),
        )?
        .u;
        let r = res as f64;
        weak.push(Row::new(r, marcinkiewicz_quasinorm(&u, 3.0, &levels)?));
        above.push(Row::new(
            r,
            sobolev_seminorm(&u, 1.6, Region::All)?.powf(1.6),
        ));
        below.push(Row::new(
            r,
            sobolev_seminorm(&u, 1.4, Region::All)?.powf(1.4),
        ));
        grad_weak.push(Row::new(r, gradient_quasinorm(&u, 1.5, &levels)?));
    }
    Ok(vec![
        EstimateReport::new("weak-norm-q3", "resolution", weak, Rule::Stable(0.2)),
        EstimateReport::new(
            "gradient-power-integral-q1.6",
            "resolution",
            above,
            Rule::RatioAtLeast(1.15),
        ),
        EstimateReport::new(
            "gradient-power-integral-q1.4",
            "resolution",
            below,
            Rule::Stable(0.2),
        ),
        EstimateReport::new(
            "gradient-weak-norm-q1.5",
            "resolution",
            grad_weak,
            Rule::Stable(0.2),
        ),
    ])
}

/// `(m, r, γ)` points covering the bounded case, each single-source
/// exponent and the minimum of both.
pub const REGULARITY_POINTS: [(f64, f64, f64); 4] = [
    (2.0, 2.0, 1.0),
    (1.2, 2.0, 1.0),
    (2.0, 1.2, 1.0),
    (1.2, 1.2, 0.5),
];

fn regularity_table() -> Result<Vec<EstimateReport>> {
    let params = SolveParams::default();
    let mut reports = Vec::new();
    for (m, r, gamma) in REGULARITY_POINTS {
        let verdict = regularity_classify(&RegularityConfig::new(m, r, gamma), &params)?;
        reports.push(verdict.below);
        reports.extend(verdict.above);
    }
    Ok(reports)
}

fn hopf_lax() -> Result<Vec<EstimateReport>> {
    let grid = planar(Domain::UnitSquare, 64)?;
    let f = ScalarField::constant(&grid, FieldRole::Datum, 1.0)?;
    let density = ScalarField::constant(&grid, FieldRole::Density, 1.0)?;
    let mu = RadonMeasure::new(&grid, Vec::new(), Some(density.clone()), f64::INFINITY)?;
    let inner = grid.compact_subset(0.25)?;
    let mut reports = Vec::new();
    for gamma in [0.5, 1.0] {
        let spec = ProblemSpec::laplacian(f.clone(), mu.clone(), gamma, 1 << 40)?;
        let u = solve_approximating(&spec, &SolveParams::default())?.u;
        let mut report = hopf_lax_check(&u, gamma, &f, &density, &inner)?;
        report.id = format!("hopf-lax-residual[gamma={gamma}]");
        reports.push(report);
    }
    Ok(reports)
}

fn fundamental_exponent() -> Result<Vec<EstimateReport>> {
    let grid = radial(800)?;
    let params = SolveParams::default();
    let zero = ScalarField::zeros(&grid, FieldRole::Datum);
    let mu = RadonMeasure::dirac(&grid, [0.0, 0.0], 1.0)?;
    let p_problem = |p: f64| -> Result<ProblemSpec> {
        let principal = Principal::LerayLions(LerayLionsSpec::p_laplacian(&grid, p)?);
        ProblemSpec::new(principal, zero.clone(), mu.clone(), 0.5, 1 << 40)
    };
    let mut reports = Vec::new();
    for p in [1.8, 2.5] {
        let u = solve_p_laplacian_approximating(&p_problem(p)?, &params)?.u;
        let mut report = fundamental_exponent_check(&u, p, 8.0 * grid.h(), 0.25, 0.05)?;
        report.id = format!("fundamental-exponent[p={p}]");
        reports.push(report);
    }
    let quadratic = solve_p_laplacian_approximating(&p_problem(2.0)?, &params)?.u;
    let linear = solve_measure_only(
        &ProblemSpec::laplacian(zero.clone(), mu.clone(), 0.5, 1 << 40)?,
        &params,
    )?
    .u;
    let gap = quadratic
        .values()
        .iter()
        .zip(linear.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let rows = vec![Row::bounded(2.0, gap, 1e-8)];
    reports.push(EstimateReport::new(
        "quadratic-matches-linear",
        "p",
        rows,
        Rule::AtMostBound,
    ));
    Ok(reports)
}

fn layer() -> Result<Vec<EstimateReport>> {
    let grid = radial(1024)?;
    let f = ScalarField::constant(&grid, FieldRole::Datum, 1.0)?;
    let spec = ProblemSpec::laplacian(f, RadonMeasure::zero(&grid), 3.0, 1 << 40)?;
    let u = solve_approximating(&spec, &SolveParams::default())?.u;
    Ok(vec![boundary_layer(
        &u,
        &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
    )?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn every_check_belongs_to_one_suite() {
        for c in Check::ALL {
            assert_eq!(
                Suite::ALL
                    .iter()
                    .filter(|s| s.checks().contains(&c))
                    .count(),
                1,
                "{c}"
            );
        }
    }
}
