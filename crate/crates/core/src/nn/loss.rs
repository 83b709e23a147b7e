//! Training losses. Each returns the scalar loss together with its gradient
//! with respect to the first argument, averaged over the batch so learning
//! rates are batch-size independent.

use ndarray::Array2;

use super::NnError;

/// Softmax cross-entropy over logits, one integer label per row.
///
/// Row maxima are subtracted before exponentiation so large logits cannot
/// overflow.
pub fn cross_entropy(
    logits: &Array2<f64>,
    labels: &[usize],
) -> Result<(f64, Array2<f64>), NnError> {
    let (n, classes) = logits.dim();
    if labels.len() != n {
        return Err(NnError::ShapeMismatch { expected: n, got: labels.len() });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(NnError::LabelOutOfRange { label, classes });
    }
    let mut loss = 0.0;
    let mut grad = Array2::zeros((n, classes));
    for (i, row) in logits.outer_iter().enumerate() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|&v| (v - m).exp()).sum();
        let log_sum = m + sum_exp.ln();
        loss += log_sum - row[labels[i]];
        for (j, &v) in row.iter().enumerate() {
            let softmax = (v - m).exp() / sum_exp;
            grad[[i, j]] = (softmax - if j == labels[i] { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    Ok((loss / n as f64, grad))
}

/// Mean absolute error over all elements, with the sign subgradient (zero at
/// exact ties).
pub fn l1_loss(
    pred: &Array2<f64>,
    target: &Array2<f64>,
) -> Result<(f64, Array2<f64>), NnError> {
    if pred.dim() != target.dim() {
        return Err(NnError::ShapeMismatch { expected: pred.len(), got: target.len() });
    }
    let count = pred.len() as f64;
    let mut loss = 0.0;
    let grad = ndarray::Zip::from(pred).and(target).map_collect(|&p, &t| {
        let d = p - t;
        loss += d.abs();
        if d > 0.0 {
            1.0 / count
        } else if d < 0.0 {
            -1.0 / count
        } else {
            0.0
        }
    });
    Ok((loss / count, grad))
}
