//! Discrete solutions against closed forms and independent quadrature.

use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use singular_core::analysis::hopf_lax_check;
use singular_core::grid::unit_sphere_area;
use singular_core::*;

fn radial(res: usize) -> Arc<Grid> {
    Arc::new(build_grid(Domain::UnitBallRadial { dim: 3 }, res).unwrap())
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / (2 * m) as f64;
    let mut s = f(a) + f(b);
    for i in 1..2 * m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `u(r) = ∫_r^1 s^{1-N} ∫_0^s t^{N-1} g(t) dt ds` for `N = 3`.
fn radial_poisson(g: impl Fn(f64) -> f64 + Copy, r: f64) -> f64 {
    simpson(
        |s| {
            if s == 0.0 {
                0.0
            } else {
                simpson(|t| t * t * g(t), 0.0, s, 40) / (s * s)
            }
        },
        r,
        1.0,
        80,
    )
}

#[test]
fn radial_poisson_matches_quadrature() {
    let g = |r: f64| r.cos() + 2.0;
    let mut errors = Vec::new();
    for res in [50, 100] {
        let grid = radial(res);
        let op = assemble_linear(&grid, &MatrixField::identity(&grid)).unwrap();
        let rhs = ScalarField::from_fn(&grid, FieldRole::Residual, |r, _| g(r)).unwrap();
        let u = solve_linear(&op, &rhs, 1e-12).unwrap();
        let err = (0..=res)
            .step_by(res / 10)
            .map(|i| (u.value(i) - radial_poisson(g, grid.radius(i))).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    assert!(errors[1] < 1e-3, "{errors:?}");
    assert!(errors[0] / errors[1] > 3.0, "{errors:?}");
}

#[test]
fn green_function_profile() {
    let grid = radial(400);
    let mu = RadonMeasure::dirac(&grid, [0.0, 0.0], 1.0).unwrap();
    let spec = ProblemSpec::laplacian(
        ScalarField::zeros(&grid, FieldRole::Datum),
        mu,
        0.5,
        1 << 40,
    )
    .unwrap();
    let w = solve_measure_only(&spec, &SolveParams::default())
        .unwrap()
        .u;
    for i in (40..400).step_by(40) {
        let r = grid.radius(i);
        assert_relative_eq!(
            w.value(i),
            (1.0 / r - 1.0) / (4.0 * PI),
            max_relative = 1e-2
        );
    }
}

#[test]
fn singular_solution_conserves_flux() {
    let grid = radial(200);
    let f = ScalarField::constant(&grid, FieldRole::Datum, 1.5).unwrap();
    let mu = RadonMeasure::dirac(&grid, [0.0, 0.0], 0.7).unwrap();
    let spec = ProblemSpec::laplacian(f, mu, 0.5, 1000).unwrap();
    let u = solve_approximating(&spec, &SolveParams::default())
        .unwrap()
        .u;
    let (f_n, mu_n) = spec.regularized_data().unwrap();
    let h = grid.h();
    let mut inside = 0.0;
    for i in 0..200 {
        let s = f_n.value(i) / (u.value(i) + 1e-3).sqrt() + mu_n.value(i);
        inside += grid.measure(i) * s;
        let rf = (i as f64 + 0.5) * h;
        let flux = unit_sphere_area(3) * rf * rf * (u.value(i) - u.value(i + 1)) / h;
        assert_relative_eq!(flux, inside, max_relative = 1e-7);
    }
}

#[test]
fn radial_manufactured_singular() {
    let mut errors = Vec::new();
    for res in [32, 64, 128] {
        let grid = radial(res);
        let gamma = 1.5;
        let k = PI / 2.0;
        let exact = |r: f64| (k * r).cos();
        let lap = |r: f64| {
            k * k * exact(r)
                + if r > 0.0 {
                    2.0 * k * (k * r).sin() / r
                } else {
                    2.0 * k * k
                }
        };
        let f = ScalarField::from_fn(&grid, FieldRole::Datum, |r, _| {
            lap(r) * exact(r).max(0.0).powf(gamma)
        })
        .unwrap();
        let spec = ProblemSpec::laplacian(f, RadonMeasure::zero(&grid), gamma, 1 << 30).unwrap();
        let u = solve_approximating(&spec, &SolveParams::default())
            .unwrap()
            .u;
        errors.push(
            (0..=res)
                .map(|i| (u.value(i) - exact(grid.radius(i))).abs())
                .fold(0.0, f64::max),
        );
    }
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.8, "{errors:?}");
    }
}

#[test]
fn anisotropic_manufactured_linear() {
    let (a11, a12, a22) = (2.0, 0.5, 1.0);
    let mut errors = Vec::new();
    for res in [16, 32, 64] {
        let grid = Arc::new(build_grid(Domain::UnitSquare, res).unwrap());
        let a = MatrixField::constant(&grid, a11, a12, a22).unwrap();
        let op = assemble_linear(&grid, &a).unwrap();
        let rhs = ScalarField::from_fn(&grid, FieldRole::Residual, |x, y| {
            PI * PI
                * ((a11 + a22) * (PI * x).sin() * (PI * y).sin()
                    - 2.0 * a12 * (PI * x).cos() * (PI * y).cos())
        })
        .unwrap();
        let u = solve_linear(&op, &rhs, 1e-12).unwrap();
        errors.push(
            (0..grid.len())
                .map(|n| {
                    let [x, y] = grid.coord(n);
                    (u.value(n) - (PI * x).sin() * (PI * y).sin()).abs()
                })
                .fold(0.0, f64::max),
        );
    }
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.8, "{errors:?}");
    }
}

#[test]
fn transformed_residual_degenerates_for_vanishing_exponent() {
    let grid = Arc::new(build_grid(Domain::UnitSquare, 32).unwrap());
    let f = ScalarField::constant(&grid, FieldRole::Datum, 1.0).unwrap();
    let spec = ProblemSpec::laplacian(f.clone(), RadonMeasure::zero(&grid), 1e-6, 1 << 40).unwrap();
    let u = solve_approximating(&spec, &SolveParams::default())
        .unwrap()
        .u;
    let zero = ScalarField::zeros(&grid, FieldRole::Density);
    let report = hopf_lax_check(&u, 1e-6, &f, &zero, &grid.compact_subset(0.25).unwrap()).unwrap();
    let row = report.rows[0];
    assert_relative_eq!(row.value, row.bound / 10.0, max_relative = 1e-3);
}
