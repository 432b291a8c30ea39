//! Parallel helpers against the forced-sequential path on the same inputs.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use edeq_core::conformal::fecm;
use edeq_core::edem::{edem_step, EdemState};
use edeq_core::fem::{cotangent_laplacian, density_gradient, DensityField};
use edeq_core::metrics::DistortionReport;
use edeq_core::{models, par, EllipsoidRadii};

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    for freq in [20, 40] {
        let mesh = models::bumpy_ellipsoid(freq);
        let p = mesh.vertices();
        let rho: Vec<f64> = p.iter().map(|q| 1.0 + 0.3 * q.x).collect();
        let faces = mesh.num_faces();
        group.bench_with_input(BenchmarkId::new("laplacian/parallel", faces), &mesh, |b, m| {
            b.iter(|| cotangent_laplacian(black_box(m), p).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("laplacian/sequential", faces), &mesh, |b, m| {
            b.iter(|| par::sequential(|| cotangent_laplacian(black_box(m), p).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("gradient/parallel", faces), &mesh, |b, m| {
            b.iter(|| density_gradient(black_box(m), p, &rho).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gradient/sequential", faces), &mesh, |b, m| {
            b.iter(|| par::sequential(|| density_gradient(black_box(m), p, &rho).unwrap()))
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let mesh = models::bumpy_ellipsoid(40);
    let radii = EllipsoidRadii::new(1.0, 1.0, 1.2).unwrap();
    let init = fecm(&mesh, &radii).unwrap();
    let density = DensityField::new(&mesh, &init.positions, mesh.face_areas()).unwrap();
    let state = EdemState { positions: init.positions.clone(), density };

    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("edem_step/parallel", |b| {
        b.iter(|| edem_step(&mesh, black_box(&state), &init.positions, &radii, 0.1).unwrap())
    });
    group.bench_function("edem_step/sequential", |b| {
        b.iter(|| par::sequential(|| edem_step(&mesh, black_box(&state), &init.positions, &radii, 0.1).unwrap()))
    });
    group.bench_function("report/parallel", |b| b.iter(|| DistortionReport::new(&mesh, black_box(&init.positions), None)));
    group.bench_function("report/sequential", |b| {
        b.iter(|| par::sequential(|| DistortionReport::new(&mesh, black_box(&init.positions), None)))
    });
    group.finish();
}

criterion_group!(benches, operators, pipeline);
criterion_main!(benches);
