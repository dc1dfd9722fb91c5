use criterion::{criterion_group, criterion_main, Criterion};
use sgfl_bench::cora_or_planted;
use sgfl_core::fedsim::{self, SamplerConfig, Strategy, TrainConfig};
use sgfl_core::graph::SplitRatios;
use sgfl_core::partition::build_disjoint;

fn rounds(c: &mut Criterion) {
    let g = cora_or_planted();
    let clients = build_disjoint(&g, 10, 0, SplitRatios::STANDARD).unwrap();
    let mut group = c.benchmark_group("five rounds, 10 clients");
    group.sample_size(10);
    for (name, sampler) in [("fedavg", None), ("fedavg with sampler", Some(SamplerConfig::default()))] {
        let cfg = TrainConfig {
            strategy: Strategy::FedAvg,
            rounds: 5,
            sampler,
            ..TrainConfig::default()
        };
        group.bench_function(name, |b| b.iter(|| fedsim::run_server(clients.clone(), &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, rounds);
criterion_main!(benches);
