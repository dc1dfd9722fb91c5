//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgfl_core::graph::{read_planetoid, Graph};
use sgfl_core::numerics::DenseMatrix;

/// Planted-partition graph: `blocks` equal communities, denser inside than
/// across, with sparse binary features correlated with the community.
pub fn planted(n: usize, blocks: usize, avg_degree: f64, features: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = |v: usize| v * blocks / n;
    let m = (avg_degree * n as f64 / 2.0) as usize;
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = rng.random_range(0..n);
        let v = if rng.random::<f64>() < 0.8 {
            let b = block(u);
            let lo = b * n / blocks;
            let hi = ((b + 1) * n / blocks).max(lo + 1);
            rng.random_range(lo..hi)
        } else {
            rng.random_range(0..n)
        };
        if u != v {
            edges.push((u, v));
        }
    }
    let mut x = DenseMatrix::zeros(n, features);
    for v in 0..n {
        let row = x.row_mut(v);
        for _ in 0..8 {
            let f = if rng.random::<f64>() < 0.5 {
                (block(v) * 13 + rng.random_range(0..13)) % features
            } else {
                rng.random_range(0..features)
            };
            row[f] = 1.0;
        }
    }
    let labels = (0..n).map(block).collect();
    let mut g = Graph::new(n, &edges, x, labels, blocks).expect("valid planted graph");
    g.row_normalize_features();
    g
}

/// Cora from the repository's data directory, or a planted graph of similar
/// size when the files are absent.
pub fn cora_or_planted() -> Graph {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cora");
    match read_planetoid(dir.join("cora.content.gz"), dir.join("cora.cites.gz"), true) {
        Ok(parsed) => {
            let mut g = parsed.graph;
            g.row_normalize_features();
            g
        }
        Err(_) => planted(2485, 7, 4.1, 1433, 0),
    }
}
