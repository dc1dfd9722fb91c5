use super::DenseMatrix;
use crate::error::{arg_err, shape_err, Result};

/// Mean softmax cross-entropy over the rows listed in `mask`.
///
/// `labels[r]` is the class of logits row `r`. Rows may appear in `mask` more
/// than once; each occurrence counts once toward the mean. The gradient is
/// zero outside the mask.
pub fn softmax_xent(
    logits: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, DenseMatrix)> {
    if mask.is_empty() {
        return Err(arg_err!("softmax_xent: empty mask"));
    }
    if labels.len() != logits.rows() {
        return Err(shape_err!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        ));
    }
    let classes = logits.cols();
    let scale = 1.0 / mask.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), classes);
    let mut loss = 0.0;
    let mut probs = vec![0.0; classes];
    for &r in mask {
        if r >= logits.rows() {
            return Err(shape_err!("mask row {r} out of range"));
        }
        let y = labels[r];
        if y >= classes {
            return Err(arg_err!("label {y} >= class count {classes}"));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, &z) in probs.iter_mut().zip(row) {
            *p = (z - max).exp();
            sum += *p;
        }
        let log_sum = sum.ln() + max;
        loss += log_sum - row[y];
        let g = grad.row_mut(r);
        for (c, (gc, p)) in g.iter_mut().zip(&probs).enumerate() {
            let onehot = if c == y { 1.0 } else { 0.0 };
            *gc += scale * (p / sum - onehot);
        }
    }
    Ok((loss * scale, grad))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Accuracy of row-wise argmax against `labels` over `mask`.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(arg_err!("accuracy: empty mask"));
    }
    let pred = logits.argmax_rows();
    let hits = mask.iter().filter(|&&r| pred[r] == labels[r]).count();
    Ok(hits as f64 / mask.len() as f64)
}
