use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use scurves::c64;
use scurves::contours::{Arc, ContourSystem, FamilySpec};
use scurves::fields::ExternalField;
use scurves::measures::{discretize, kernel_matrix, solve_equilibrium};
use scurves::par::{set_mode, Mode};
use scurves::scurve::{maximize_energy, SearchOptions};

const MODES: [(&str, Mode); 2] = [("sequential", Mode::Sequential), ("parallel", Mode::Parallel)];

fn kernel(c: &mut Criterion) {
    let seg = ContourSystem::segment(c64(-1.0, 0.0), c64(1.0, 0.0));
    let nodes = discretize(&seg, 1200).unwrap();
    let mut g = c.benchmark_group("kernel_matrix_1200");
    for (name, mode) in MODES {
        set_mode(mode);
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| kernel_matrix(&nodes)));
    }
    g.finish();
}

fn equilibrium(c: &mut Criterion) {
    let seg = ContourSystem::segment(c64(-3.0, 0.0), c64(3.0, 0.0));
    let field = ExternalField::quadratic(c64(1.0, 0.0));
    let mut g = c.benchmark_group("equilibrium_400");
    g.sample_size(10);
    for (name, mode) in MODES {
        set_mode(mode);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_equilibrium(&seg, &field, 1.0, 400, 1e-8).unwrap())
        });
    }
    g.finish();
}

fn search(c: &mut Criterion) {
    let arc = Arc::three_point_arc(c64(-1.0, 0.0), c64(0.0, 0.5), c64(1.0, 0.0), 7);
    let family = FamilySpec::new(ContourSystem::new(vec![arc], vec![c64(-1.0, 0.0), c64(1.0, 0.0)]));
    let opts = SearchOptions { n_nodes: 120, max_iter: 20, ..SearchOptions::default() };
    let mut g = c.benchmark_group("scurve_search_20_steps");
    g.sample_size(10);
    for (name, mode) in MODES {
        set_mode(mode);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| maximize_energy(&family, &ExternalField::Zero, opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernel, equilibrium, search);
criterion_main!(benches);
