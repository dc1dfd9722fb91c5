use super::Graph;

/// Mean local clustering coefficient; nodes of degree < 2 contribute 0.
pub fn clustering_coefficient(g: &Graph) -> f64 {
    let n = g.num_nodes();
    if n == 0 {
        return 0.0;
    }
    let mut mark = vec![false; n];
    let mut total = 0.0;
    for v in 0..n {
        let nbrs = g.neighbors(v);
        let d = nbrs.len();
        if d < 2 {
            continue;
        }
        nbrs.iter().for_each(|&u| mark[u] = true);
        // each triangle through v is seen from both of its other corners
        let twice: usize = nbrs
            .iter()
            .map(|&u| g.neighbors(u).iter().filter(|&&w| mark[w]).count())
            .sum();
        nbrs.iter().for_each(|&u| mark[u] = false);
        let pairs = (d * (d - 1) / 2) as f64;
        total += (twice / 2) as f64 / pairs;
    }
    total / n as f64
}

/// Count of nodes per degree, indexed `0..=max_degree`.
pub fn degree_histogram(g: &Graph) -> Vec<usize> {
    let max = (0..g.num_nodes()).map(|v| g.degree(v)).max().unwrap_or(0);
    let mut hist = vec![0; max + 1];
    for v in 0..g.num_nodes() {
        hist[g.degree(v)] += 1;
    }
    hist
}

/// Count of nodes per class, indexed `0..num_classes`.
pub fn label_histogram(g: &Graph) -> Vec<usize> {
    let mut hist = vec![0; g.num_classes()];
    for &y in g.labels() {
        hist[y] += 1;
    }
    hist
}
