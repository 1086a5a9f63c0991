use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use singular_core::analysis::{
    boundary_layer, comparison_report, fmt_num, hopf_lax_check, level_grid, radial_exponent,
    regularity_classify, sobolev_seminorm, truncation_energy_scan, truncation_residual_scan,
    EstimateReport, PredictedSpace, Region, RegularityConfig, Row, Rule, Verdict,
};
use singular_core::solver::Assembled;
use singular_core::{
    solve_approximating, solve_measure_only, solve_pure_singular, solve_sequence, GridKind,
    ProblemSpec, ScalarField, SolveParams, Suite,
};

use crate::config::{OperatorKind, ProblemConfig, ReportKind, RunConfig};
use crate::output::{report_svg, reports_csv, slug, solution_csv, solution_svg, write_atomic};

pub struct Options<'a> {
    pub out: &'a Path,
    pub plot: bool,
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn write_plots(out: &Path, reports: &[EstimateReport]) -> Result<()> {
    let dir = out.join("plots");
    std::fs::create_dir_all(&dir)?;
    for r in reports {
        if let Some(svg) = report_svg(r) {
            write_atomic(&dir.join(format!("{}.svg", slug(&r.id))), &svg)?;
        }
    }
    Ok(())
}

/// Runs `solve`; returns `true` when every report passed or was not
/// judged a failure.
pub fn solve(cfg: &RunConfig, opts: &Options<'_>) -> Result<bool> {
    prepare(opts.out)?;
    let spec = cfg.problem.build()?;
    let params = &cfg.solver;
    let mut diagnostics = String::new();
    let solution = if cfg.sequence {
        let seq = solve_sequence(&spec, params)?;
        let mut table = String::from("n,relative_change,outer_iterations,sup_u\n");
        for e in &seq.entries {
            let _ = writeln!(
                table,
                "{},{},{},{}",
                e.n,
                e.relative_change.map_or_else(String::new, fmt_num),
                e.diagnostics.outer_iterations,
                fmt_num(e.u.max())
            );
        }
        write_atomic(&opts.out.join("sequence.csv"), &table)?;
        let _ = writeln!(diagnostics, "stabilized = {}", seq.stabilized);
        let last = seq.entries.last().expect("schedule is nonempty");
        let _ = writeln!(diagnostics, "n = {}", last.n);
        (last.u.clone(), last.diagnostics)
    } else {
        let sol = solve_approximating(&spec, params)?;
        let _ = writeln!(diagnostics, "n = {}", spec.n());
        (sol.u, sol.diagnostics)
    };
    let (u, diag) = solution;
    let _ = writeln!(diagnostics, "outer_iterations = {}", diag.outer_iterations);
    let _ = writeln!(diagnostics, "inner_iterations = {}", diag.inner_iterations);
    let _ = writeln!(diagnostics, "last_change = {}", fmt_num(diag.last_change));
    let _ = writeln!(
        diagnostics,
        "relative_residual = {}",
        fmt_num(diag.relative_residual)
    );
    let _ = writeln!(
        diagnostics,
        "final_damping = {}",
        fmt_num(diag.final_damping)
    );
    let _ = writeln!(diagnostics, "sup_u = {}", fmt_num(u.max()));
    write_atomic(&opts.out.join("solution.csv"), &solution_csv(&u))?;
    write_atomic(&opts.out.join("diagnostics.txt"), &diagnostics)?;

    let mut reports = Vec::new();
    for kind in &cfg.analysis.reports {
        match kind {
            ReportKind::Regularity => {
                let (rows, mut regularity) = regularity_reports(cfg)?;
                write_atomic(&opts.out.join("regularity.csv"), &rows)?;
                reports.append(&mut regularity);
            }
            kind => reports.extend(report(*kind, cfg, &spec, &u)?),
        }
    }
    if !reports.is_empty() {
        write_atomic(&opts.out.join("reports.csv"), &reports_csv(&reports))?;
        for r in &reports {
            println!("{}", r.summary());
        }
    }
    if opts.plot {
        write_plots(opts.out, &reports)?;
        write_atomic(
            &opts.out.join("plots").join("solution.svg"),
            &solution_svg(&u),
        )?;
    }
    println!("wrote {}", opts.out.display());
    Ok(reports.iter().all(|r| r.verdict != Verdict::Fail))
}

fn report(
    kind: ReportKind,
    cfg: &RunConfig,
    spec: &ProblemSpec,
    u: &ScalarField,
) -> Result<Vec<EstimateReport>> {
    let params = &cfg.solver;
    let a = &cfg.analysis;
    Ok(match kind {
        ReportKind::Sandwich => {
            let v = solve_pure_singular(spec, params)?.u;
            let w = solve_measure_only(spec, params)?.u;
            vec![comparison_report(u, &v, &w)?]
        }
        ReportKind::LowerBound => {
            let inner = spec.grid().compact_subset(a.compact_delta)?;
            let floor = solve_pure_singular(&spec.with_n(1), params)?
                .u
                .min_over(inner.nodes())
                - 1e-8;
            let seq = solve_sequence(spec, params)?;
            let mins: Vec<(u64, f64)> = seq
                .entries
                .iter()
                .map(|e| (e.n, e.u.min_over(inner.nodes())))
                .collect();
            let floor_rows = mins
                .iter()
                .map(|&(n, m)| Row::bounded(n as f64, m, floor))
                .collect();
            let stable_rows = mins
                .iter()
                .skip(1)
                .map(|&(n, m)| Row::new(n as f64, m))
                .collect();
            vec![
                EstimateReport::new(
                    "interior-minimum-floor",
                    "n",
                    floor_rows,
                    Rule::AtLeastBound,
                ),
                EstimateReport::new(
                    "interior-minimum-stability",
                    "n",
                    stable_rows,
                    Rule::Stable(0.2),
                ),
            ]
        }
        ReportKind::TruncationEnergy => vec![truncation_energy_scan(
            u,
            spec.gamma(),
            &level_grid(u, a.k_levels)?,
        )?],
        ReportKind::ResidualDecay => vec![truncation_residual_scan(
            u,
            spec,
            &level_grid(u, a.k_levels)?,
        )?],
        ReportKind::BoundaryLayer => vec![boundary_layer(u, &a.layer_widths)?],
        ReportKind::HopfLax => {
            let (f_n, mu_n) = spec.regularized_data()?;
            let inner = spec.grid().compact_subset(a.compact_delta)?;
            vec![hopf_lax_check(u, spec.gamma(), &f_n, &mu_n, &inner)?]
        }
        ReportKind::Regularity => unreachable!("handled by the caller"),
    })
}

fn regularity_reports(cfg: &RunConfig) -> Result<(String, Vec<EstimateReport>)> {
    let mut table = String::from("estimate_id,m,r,gamma,predicted_exponent,verdict\n");
    let mut reports = Vec::new();
    for &(m, r, gamma) in &cfg.analysis.regularity {
        let mut config = RegularityConfig::new(m, r, gamma);
        config.resolutions = cfg.analysis.resolutions.clone();
        let verdict = regularity_classify(&config, &cfg.solver)?;
        let predicted = match verdict.predicted {
            PredictedSpace::Bounded => "inf".to_string(),
            PredictedSpace::Lebesgue { q, .. } => fmt_num(q),
        };
        let _ = writeln!(
            table,
            "regularity-class,{},{},{},{},{}",
            fmt_num(m),
            fmt_num(r),
            fmt_num(gamma),
            predicted,
            if verdict.passed() {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        );
        reports.push(verdict.below);
        reports.extend(verdict.above);
    }
    Ok((table, reports))
}

/// Runs a verification suite; returns `true` when every check passed.
pub fn verify(suite: Suite, out: Option<&Path>, plot: bool) -> Result<bool> {
    let outcomes = suite.run()?;
    let mut all = true;
    let mut reports = Vec::new();
    for o in &outcomes {
        println!("{}", o.line());
        for r in &o.reports {
            println!("    {}", r.summary());
            for row in &r.rows {
                println!(
                    "        {}={:<12} {}",
                    r.parameter,
                    fmt_num(row.parameter),
                    fmt_num(row.value)
                );
            }
        }
        all &= o.passed();
        reports.extend(o.reports.iter().cloned());
    }
    if let Some(out) = out {
        prepare(out)?;
        write_atomic(
            &out.join(format!("verify-{suite}.csv")),
            &reports_csv(&reports),
        )?;
        if plot {
            write_plots(out, &reports)?;
        }
    }
    Ok(all)
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub gamma: f64,
    pub p: f64,
    pub n: u64,
    pub resolution: usize,
    pub mass: f64,
}

pub fn sweep_points(cfg: &RunConfig) -> Result<Vec<SweepPoint>> {
    let s = &cfg.sweep;
    if s.is_empty() {
        bail!("empty sweep grid: give at least one of gamma, p, n, resolution, mass in [sweep]");
    }
    let pr = &cfg.problem;
    let or = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
    let gammas = or(&s.gamma, pr.gamma);
    let ps = or(&s.p, pr.p);
    let ns = if s.n.is_empty() {
        vec![pr.n]
    } else {
        s.n.clone()
    };
    let res = if s.resolution.is_empty() {
        vec![pr.resolution]
    } else {
        s.resolution.clone()
    };
    let masses = or(&s.mass, 1.0);
    let mut points = Vec::new();
    for &gamma in &gammas {
        for &p in &ps {
            for &n in &ns {
                for &resolution in &res {
                    for &mass in &masses {
                        points.push(SweepPoint {
                            gamma,
                            p,
                            n,
                            resolution,
                            mass,
                        });
                    }
                }
            }
        }
    }
    Ok(points)
}

const SWEEP_HEADER: &str =
    "estimate_id,gamma,p,n,resolution,mass,sup_u,min_inner,energy,h1_seminorm,stabilization,exponent,expected_exponent,outer_iterations";

fn sweep_row(cfg: &RunConfig, point: &SweepPoint) -> Result<String> {
    let mut problem: ProblemConfig = cfg.problem.clone();
    problem.gamma = point.gamma;
    problem.p = point.p;
    problem.n = point.n;
    problem.resolution = point.resolution;
    problem.mass_scale = point.mass;
    if !cfg.sweep.p.is_empty() {
        problem.operator = OperatorKind::PLaplacian;
    }
    let spec = problem.build()?;
    let params: &SolveParams = &cfg.solver;
    let sol = solve_approximating(&spec, params)?;
    let u = &sol.u;
    let grid = spec.grid();
    let inner = grid.compact_subset(cfg.analysis.compact_delta)?;
    let energy = Assembled::new(grid, spec.principal())?.energy(u.values());
    let seminorm = sobolev_seminorm(u, 2.0, Region::All)?;
    let coarse = solve_approximating(&spec.with_n((point.n / 4).max(1)), params)?.u;
    let stabilization = u.l1_distance(&coarse)? / u.l1_norm().max(f64::MIN_POSITIVE);
    let (exponent, expected) = if grid.kind() == GridKind::Radial {
        let dim = grid.dim() as f64;
        let p = if problem.operator == OperatorKind::PLaplacian {
            point.p
        } else {
            2.0
        };
        (
            fmt_num(radial_exponent(u, 8.0 * grid.h(), 0.25)?),
            fmt_num((p - dim) / (p - 1.0)),
        )
    } else {
        (String::new(), String::new())
    };
    Ok(format!(
        "sweep-summary,{},{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_num(point.gamma),
        fmt_num(point.p),
        point.n,
        point.resolution,
        fmt_num(point.mass),
        fmt_num(u.max()),
        fmt_num(u.min_over(inner.nodes())),
        fmt_num(energy),
        fmt_num(seminorm),
        fmt_num(stabilization),
        exponent,
        expected,
        sol.diagnostics.outer_iterations
    ))
}

/// Runs every sweep point (in parallel) and writes `sweep.csv` in grid
/// order once all runs are done.
pub fn sweep(cfg: &RunConfig, opts: &Options<'_>) -> Result<()> {
    let points = sweep_points(cfg)?;
    prepare(opts.out)?;
    let rows: Vec<String> = points
        .par_iter()
        .map(|p| sweep_row(cfg, p))
        .collect::<Result<_>>()?;
    let mut table = format!("{SWEEP_HEADER}\n");
    for r in rows {
        table.push_str(&r);
        table.push('\n');
    }
    write_atomic(&opts.out.join("sweep.csv"), &table)?;
    println!(
        "{} sweep points written to {}",
        points.len(),
        opts.out.join("sweep.csv").display()
    );
    Ok(())
}
