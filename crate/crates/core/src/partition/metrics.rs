use crate::error::{arg_err, Result};
use crate::graph::{degree_histogram, label_histogram, ClientDataset, Graph};

fn normalize(hist: &[usize]) -> Vec<f64> {
    let total: usize = hist.iter().sum();
    if total == 0 {
        return vec![0.0; hist.len()];
    }
    hist.iter().map(|&c| c as f64 / total as f64).collect()
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(arg_err!("distributions of length {} and {}", p.len(), q.len()));
    }
    Ok(())
}

/// Jensen–Shannon divergence with base-2 logarithms, in `[0, 1]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).log2();
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Hellinger distance `√(½ Σ (√p − √q)²)`, in `[0, 1]`.
pub fn hellinger(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let sum: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((0.5 * sum).sqrt().clamp(0.0, 1.0))
}

/// Median of a nonempty slice; the mean of the two middle values when the
/// length is even.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

fn pairwise(dists: &[Vec<f64>], f: fn(&[f64], &[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dists.len() * dists.len().saturating_sub(1) / 2);
    for i in 0..dists.len() {
        for j in i + 1..dists.len() {
            out.push(f(&dists[i], &dists[j])?);
        }
    }
    Ok(out)
}

/// Median base-2 JS divergence between the label distributions of every
/// unordered pair of clients.
pub fn label_heterogeneity(clients: &[ClientDataset]) -> Result<f64> {
    if clients.len() < 2 {
        return Err(arg_err!("label heterogeneity needs at least 2 clients"));
    }
    let dists: Vec<Vec<f64>> = clients
        .iter()
        .map(|c| normalize(&label_histogram(c.graph())))
        .collect();
    Ok(median(&pairwise(&dists, js_divergence)?).unwrap())
}

/// Mean Hellinger distance between the degree distributions of every
/// unordered pair of clients, with histograms padded to a shared support.
pub fn degree_heterogeneity(clients: &[ClientDataset]) -> Result<f64> {
    if clients.len() < 2 {
        return Err(arg_err!("degree heterogeneity needs at least 2 clients"));
    }
    let hists: Vec<Vec<usize>> = clients.iter().map(|c| degree_histogram(c.graph())).collect();
    let support = hists.iter().map(Vec::len).max().unwrap();
    let dists: Vec<Vec<f64>> = hists
        .into_iter()
        .map(|mut h| {
            h.resize(support, 0);
            normalize(&h)
        })
        .collect();
    let pairs = pairwise(&dists, hellinger)?;
    Ok(pairs.iter().sum::<f64>() / pairs.len() as f64)
}

/// Edges of `g` whose endpoints are not both present in any single client.
pub fn count_missing_links(g: &Graph, clients: &[ClientDataset]) -> usize {
    let mut member_of: Vec<Vec<usize>> = vec![Vec::new(); g.num_nodes()];
    for (c, client) in clients.iter().enumerate() {
        for &v in client.global_ids() {
            member_of[v].push(c);
        }
    }
    g.edges()
        .filter(|&(u, v)| {
            let (a, b) = (&member_of[u], &member_of[v]);
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Equal => return false,
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                }
            }
            true
        })
        .count()
}
