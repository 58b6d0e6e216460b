use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ecopull::analytic::{self, SifiModel};
use ecopull::experiments::{self, OptimizeSpec};
use ecopull::mcmc::{self, ChainOptions};
use ecopull::{Execution, ScenarioConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn exact(c: &mut Criterion) {
    let cfg = ScenarioConfig {
        device_count: 5,
        images_per_device: 30,
        ..ScenarioConfig::default()
    };
    let model = SifiModel::new(&cfg).unwrap();
    let mut group = c.benchmark_group("exact_k5_n30");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| analytic::exact_from_model(&model, exec))
        });
    }
    group.finish();
}

fn chains(c: &mut Criterion) {
    let model = SifiModel::new(&ScenarioConfig::default()).unwrap();
    let opts = ChainOptions {
        chains: 8,
        ..ChainOptions::new(20_000, 3)
    };
    let mut group = c.benchmark_group("mcmc_8_chains");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| mcmc::estimate_with_model(&model, &opts, exec))
        });
    }
    group.finish();
}

fn optimize(c: &mut Criterion) {
    let spec = OptimizeSpec {
        thresholds: experiments::threshold_grid(),
        ..OptimizeSpec::new(ScenarioConfig::default(), 0.8, 2_000, 1)
    };
    let mut group = c.benchmark_group("optimize_grid");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| experiments::optimize(&spec, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, exact, chains, optimize);
criterion_main!(benches);
