use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use scalar_ald::kernels::{FieldParams, KernelTable, Method};
use scalar_ald::par::Exec;
use scalar_ald::semiclassical::{integrate_semiclassical, ExternalPotential, IntegratorConfig};
use scalar_ald::stochastic::{noise_covariance, run_ensemble, stride_nodes, NoiseSampler, PsdMode};
use scalar_ald::worldline::{hyperbolic, uniform_grid, FourVector, Worldline};

const PATHS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn params() -> FieldParams {
    FieldParams::new(1.0, 0.5, 1.0).unwrap()
}

fn table_build(c: &mut Criterion) {
    let p = params();
    let mut group = c.benchmark_group("kernel_table");
    group.sample_size(10);
    for (name, exec) in PATHS {
        group.bench_function(BenchmarkId::new("quadrature", name), |b| {
            b.iter(|| black_box(KernelTable::build(&p, Method::Quadrature, exec).unwrap()))
        });
    }
    group.finish();
}

fn covariance(c: &mut Criterion) {
    let p = params();
    let mut group = c.benchmark_group("noise_covariance");
    for nodes in [32usize, 128] {
        let alpha = 0.5;
        let grid = uniform_grid(0.0, 0.02, nodes);
        let jerk = grid.iter().map(|&t| hyperbolic(alpha)(t).1 * (alpha * alpha)).collect();
        let mean = Worldline::from_fn(grid, hyperbolic(alpha)).unwrap().with_jerk(jerk).unwrap();
        let idx: Vec<usize> = (0..nodes).collect();
        for (name, exec) in PATHS {
            group.bench_with_input(BenchmarkId::new(name, nodes), &idx, |b, idx| {
                b.iter(|| black_box(noise_covariance(&mean, idx, &p, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn ensemble(c: &mut Criterion) {
    let p = params();
    let table = KernelTable::build(&p, Method::ClosedForm, Exec::Parallel).unwrap();
    let pot = ExternalPotential::Linear {
        gradient: FourVector::new(0.0, 0.05, 0.0, 0.0),
    };
    let cfg = IntegratorConfig::for_cutoff(1.0, 200);
    let mean = integrate_semiclassical(&p, &table, &pot, FourVector::ZERO, FourVector::new(1.0, 0.0, 0.0, 0.0), &cfg).unwrap();
    let nodes = stride_nodes(mean.len(), 5).unwrap();
    let cov = noise_covariance(&mean, &nodes, &p, Exec::Parallel).unwrap();
    let sampler = NoiseSampler::new(&cov, 1e-12, PsdMode::Strict).unwrap();
    let mut group = c.benchmark_group("langevin_ensemble");
    group.sample_size(10);
    for (name, exec) in PATHS {
        group.bench_function(BenchmarkId::new(name, 32), |b| {
            b.iter(|| black_box(run_ensemble(&mean, &sampler, &pot, &p, &table, &cfg, 1, 32, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, table_build, covariance, ensemble);
criterion_main!(benches);
