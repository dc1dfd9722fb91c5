use rand::Rng;

/// Uniform draws are clamped into this interval before the double log.
pub const UNIFORM_FLOOR: f64 = 1e-12;

/// Gumbel(0, 1) quantile transform of a uniform draw.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(UNIFORM_FLOOR, 1.0 - UNIFORM_FLOOR);
    -(-u.ln()).ln()
}

pub fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    gumbel_from_uniform(rng.random::<f64>())
}

/// Indices of the `k` largest scores, returned in ascending index order.
/// Ties are broken toward the lower index; `k >= n` returns every index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    if k >= scores.len() {
        return (0..scores.len()).collect();
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Gumbel-top-k: perturb log-weights with independent Gumbel noise and keep
/// the `k` best. Equivalent to sequential sampling without replacement
/// proportional to `exp(log_weights)`.
pub fn gumbel_top_k<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64], k: usize) -> Vec<usize> {
    let perturbed: Vec<f64> = log_weights.iter().map(|&w| w + gumbel(rng)).collect();
    top_k(&perturbed, k)
}
