//! Compares the rayon-backed batch loops against the sequential fallback
//! on the two data-parallel workloads: Monte Carlo cost estimation and the
//! per-level sweep solves.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ambictrl::analysis::epsilon_sweep;
use ambictrl::exec::ExecMode;
use ambictrl::hjb::{shoot, SolverConfig};
use ambictrl::model::{reduce_instance, MultiClassInstance};
use ambictrl::simulate::{mc_estimate, AdversarySpec, McRun, StrategySpec};

fn bench_instance() -> MultiClassInstance {
    MultiClassInstance {
        class_count: 3,
        lambda: vec![1.0, 1.0 / 3.0, 0.5],
        mu: vec![3.0, 1.0, 1.5],
        lambda_hat: vec![0.0, 0.0, 0.0],
        mu_hat: vec![1.0, 1.0, 1.0],
        h_hat: vec![1.0, 2.5, 1.5],
        r_hat: vec![1.0, 1.0, 1.0],
        b_hat: vec![4.0, 7.0, 6.0],
        eps_hat: vec![1.0, 1.0, 1.0],
        discount: 1.0,
    }
}

fn bench_mc(c: &mut Criterion) {
    let inst = bench_instance();
    let red = reduce_instance(&inst).unwrap();
    let sol = shoot(&red, 1.0, &SolverConfig::default()).unwrap();
    let strat = StrategySpec::Reflecting { beta: sol.beta };

    let mut group = c.benchmark_group("mc_estimate");
    group.sample_size(10);
    for (label, exec) in [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)] {
        group.bench_with_input(BenchmarkId::new(label, 512), &exec, |bench, &exec| {
            let run = McRun { dt: 2e-3, horizon: 4.0, n_paths: 512, seed: 7, antithetic: false, exec };
            bench.iter(|| {
                mc_estimate(&red, &strat, &AdversarySpec::Feedback(&sol), 0.0, 1.0, &run).unwrap()
            });
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let inst = bench_instance();
    let cfg = SolverConfig { cells: 2048, ..SolverConfig::default() };
    let grid = [0.0, 0.1, 0.2, 0.4, 0.8, 1.6];

    let mut group = c.benchmark_group("epsilon_sweep");
    group.sample_size(10);
    for (label, exec) in [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)] {
        group.bench_with_input(BenchmarkId::new(label, grid.len()), &exec, |bench, &exec| {
            bench.iter(|| epsilon_sweep(&inst, &grid, &cfg, exec).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, bench_mc, bench_sweep);
criterion_main!(benches);
