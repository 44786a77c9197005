//! One worker versus the whole machine on the parallel hot spots.
//!
//! Build with `--no-default-features` to time the sequential fallback; the
//! pool sizes then make no difference.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use krig_core::bandwidth::{loo_objective, select_tuning, KernelShapes, TuningConfig};
use krig_core::engine::{Posterior, Target};
use krig_core::exec;
use krig_core::mixture::{weighted_covariance, Points};
use krig_core::model::{CorrelationParams, Dataset, Locations, ModelSpec, NaturalParams, Trend};
use krig_core::priors::{ParameterLayout, PriorSpec};
use krig_core::simulate::{conditional_simulate, PredictionGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn pools() -> Vec<(usize, rayon::ThreadPool)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut sizes = vec![1];
    if all > 1 {
        sizes.push(all);
    }
    sizes
        .into_iter()
        .map(|n| (n, rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()))
        .collect()
}

fn sample(n: usize, p: usize, seed: u64) -> (Points, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = Points::new(p, (0..n * p).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    (pts, raw.into_iter().map(|w| w / total).collect())
}

fn synthetic_data(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.0..1.0)).collect();
    let values = (0..n)
        .map(|i| (4.0 * coords[2 * i]).sin() + coords[2 * i + 1])
        .collect();
    Dataset::new(Locations::new(2, coords).unwrap(), values).unwrap()
}

fn bench_loo(c: &mut Criterion) {
    let mut g = c.benchmark_group("loo_objective_n1000_p4");
    g.sample_size(10);
    let (pts, w) = sample(1000, 4, 1);
    let shapes = KernelShapes::shared(weighted_covariance(&pts, &w).unwrap(), pts.len()).unwrap();
    for (threads, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, _| {
            b.iter(|| pool.install(|| loo_objective(black_box(&pts), &w, &shapes, 0.3).unwrap()))
        });
    }
    g.finish();
}

fn bench_tuning(c: &mut Criterion) {
    let mut g = c.benchmark_group("select_tuning_n500_p4");
    g.sample_size(10);
    let (pts, w) = sample(500, 4, 2);
    for (threads, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, _| {
            b.iter(|| pool.install(|| select_tuning(black_box(&pts), &w, &w, &TuningConfig::default()).unwrap()))
        });
    }
    g.finish();
}

fn bench_posterior(c: &mut Criterion) {
    let mut g = c.benchmark_group("posterior_200_evals_n60");
    g.sample_size(10);
    let data = synthetic_data(60, 3);
    let spec = ModelSpec::isotropic(2, Trend::Constant).with_fixed_kappa(0.5);
    let layout = ParameterLayout::new(&spec).unwrap();
    let prior = PriorSpec::for_domain(1.0).unwrap();
    let target = Posterior {
        spec: &spec,
        layout: &layout,
        prior: &prior,
        data: &data,
    };
    let (pts, _) = sample(200, layout.len(), 4);
    for (threads, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, _| {
            b.iter(|| pool.install(|| exec::map_range(pts.len(), |i| target.log_density(pts.row(i)).ok())))
        });
    }
    g.finish();
}

fn bench_simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("conditional_simulation_16_draws_400_cells");
    g.sample_size(10);
    let data = synthetic_data(40, 5);
    let grid = PredictionGrid::new(vec![0.0, 0.0], vec![0.05, 0.05], vec![20, 20]).unwrap();
    let theta = NaturalParams {
        beta: vec![0.5],
        tau: 0.1,
        sigma2: 1.0,
        corr: CorrelationParams::isotropic(0.5, 0.3, 2),
    };
    for (threads, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, _| {
            b.iter(|| {
                pool.install(|| {
                    exec::map_range(16, |d| {
                        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
                        conditional_simulate(
                            &theta,
                            &Trend::Constant,
                            Some(&data),
                            &grid,
                            Default::default(),
                            &mut rng,
                        )
                        .unwrap()
                    })
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_loo, bench_tuning, bench_posterior, bench_simulation);
criterion_main!(benches);
