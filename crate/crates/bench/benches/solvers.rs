use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use singular_bench::{grid, unit_datum_with_dirac};
use singular_core::{
    assemble_linear, mollify, solve_approximating, Domain, LerayLionsOperator, LerayLionsSpec,
    MatrixField, Scheme, SolveParams,
};

fn assembly(c: &mut Criterion) {
    let g = grid(Domain::UnitSquare, 128);
    let a = MatrixField::constant(&g, 2.0, 0.5, 1.0).unwrap();
    c.bench_function("assemble_anisotropic_128", |b| {
        b.iter(|| assemble_linear(&g, black_box(&a)).unwrap())
    });
    let spec = LerayLionsSpec::p_laplacian(&g, 1.8).unwrap();
    let op = LerayLionsOperator::new(&g, &spec).unwrap();
    let u: Vec<f64> = (0..g.len()).map(|n| g.distance(n)).collect();
    c.bench_function("p_laplacian_jacobian_128", |b| {
        b.iter(|| op.jacobian(black_box(&u)))
    });
}

fn mollification(c: &mut Criterion) {
    let g = grid(Domain::UnitDisk, 128);
    let spec = unit_datum_with_dirac(&g, 0.5, 256);
    c.bench_function("mollify_dirac_disk_128", |b| {
        b.iter(|| mollify(spec.measure(), black_box(64), &g).unwrap())
    });
}

fn approximating(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_approximating");
    group.sample_size(10);
    for res in [32, 64] {
        let g = grid(Domain::UnitSquare, res);
        let spec = unit_datum_with_dirac(&g, 0.5, 256);
        for scheme in [Scheme::Picard, Scheme::Newton] {
            let params = SolveParams::default().with_scheme(scheme);
            group.bench_with_input(
                BenchmarkId::new(format!("{scheme:?}"), res),
                &spec,
                |b, s| b.iter(|| solve_approximating(s, &params).unwrap()),
            );
        }
    }
    let radial = grid(Domain::UnitBallRadial { dim: 3 }, 4096);
    let spec = unit_datum_with_dirac(&radial, 2.0, 1 << 20);
    group.bench_function("radial_4096_gamma2", |b| {
        b.iter(|| solve_approximating(&spec, &SolveParams::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, assembly, mollification, approximating);
criterion_main!(benches);
