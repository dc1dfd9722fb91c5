use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgfl_bench::planted;
use sgfl_core::gflownet::{self, GfnParams, RolloutConfig};
use sgfl_core::gnn::{self, AdjacencySequence, GcnParams};
use sgfl_core::numerics::{gumbel_top_k, spmm, DenseMatrix};
use sgfl_core::partition::partition_multilevel;

fn sparse_products(c: &mut Criterion) {
    let g = planted(2500, 7, 4.0, 500, 0);
    let ds = g.induced_subgraph(&(0..g.num_nodes()).collect::<Vec<_>>()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = DenseMatrix::from_vec(2500, 128, (0..2500 * 128).map(|_| rng.random::<f64>()).collect()).unwrap();
    c.bench_function("spmm 2500x2500 by 128", |b| {
        b.iter(|| spmm(black_box(ds.normalized_adjacency()), black_box(&h)).unwrap())
    });
}

fn gcn_step(c: &mut Criterion) {
    let g = planted(2500, 7, 4.0, 500, 0);
    let ds = g.induced_subgraph(&(0..g.num_nodes()).collect::<Vec<_>>()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = GcnParams::glorot(&mut rng, 500, 128, 7);
    let adj = AdjacencySequence::full(ds.normalized_adjacency(), 2);
    let mask: Vec<usize> = (0..500).collect();
    c.bench_function("gcn loss and gradient, 2500 nodes", |b| {
        b.iter(|| gnn::loss_and_grad(&params, ds.sparse_features(), &adj, ds.labels(), &mask).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w: Vec<f64> = (0..1000).map(|_| rng.random_range(-3.0..0.0)).collect();
    c.bench_function("gumbel top-64 of 1000", |b| b.iter(|| gumbel_top_k(&mut rng, black_box(&w), 64)));

    let g = planted(800, 4, 5.0, 100, 4);
    let ds = g.induced_subgraph(&(0..g.num_nodes()).collect::<Vec<_>>()).unwrap();
    let gfn = GfnParams::glorot(&mut rng, 100, 32);
    let roots: Vec<usize> = (0..64).collect();
    let config = RolloutConfig::default();
    c.bench_function("rollout, 64 roots, 800 nodes", |b| {
        b.iter(|| gflownet::rollout(&gfn, &ds, &roots, &config, &mut rng).unwrap())
    });
}

fn partitioning(c: &mut Criterion) {
    let g = planted(2500, 7, 4.0, 10, 5);
    let mut seed = 0;
    c.bench_function("multilevel 10-way, 2500 nodes", |b| {
        b.iter_batched(
            || {
                seed += 1;
                seed
            },
            |s| partition_multilevel(&g, 10, s, 0.05).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, sparse_products, gcn_step, sampling, partitioning);
criterion_main!(benches);
