use binrep::exec::Execution;
use binrep::mcmc::{gibbs_run, GibbsConfig, PriorSpec};
use binrep::scoring::{em_fit, EmConfig};
use binrep::simulation::{simulate_dataset, NDist, SimConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn dataset() -> binrep::ReplicateDataset {
    let cfg = SimConfig { theta: 0.4, p: 0.1, q: 0.05, n: 200, n_dist: NDist::Uniform { lo: 2, hi: 6 }, seed: 1 };
    simulate_dataset(&cfg).unwrap()
}

fn em_restarts(c: &mut Criterion) {
    let data = dataset();
    let mut group = c.benchmark_group("em_fit_20_restarts");
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = EmConfig { seed: 3, exec, ..EmConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| em_fit(black_box(&data), cfg).unwrap())
        });
    }
    group.finish();
}

fn gibbs_chains(c: &mut Criterion) {
    let data = dataset();
    let mut group = c.benchmark_group("gibbs_4_chains");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = GibbsConfig { chains: 4, iters: 1000, burnin: 200, seed: 3, exec };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| gibbs_run(black_box(&data), &PriorSpec::default(), cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, em_restarts, gibbs_chains);
criterion_main!(benches);
