use ndarray::{Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::real::Real;

/// `-log softmax(logits)[label]` and its gradient `softmax(logits) - onehot(label)`.
pub fn softmax_cross_entropy<T: Real>(
    logits: ArrayView1<'_, T>,
    label: usize,
) -> Result<(T, Vec<T>)> {
    let classes = logits.len();
    if label >= classes {
        return Err(Error::LabelOutOfRange {
            index: 0,
            label,
            classes,
        });
    }
    let mut grad = vec![T::zero(); classes];
    let loss = softmax_row(logits, label, &mut grad);
    Ok((loss, grad))
}

/// Mean loss over a batch and the gradient of that mean, so each row of the
/// returned gradient is scaled by `1 / batch`.
pub fn softmax_cross_entropy_batch<T: Real>(
    logits: ArrayView2<'_, T>,
    labels: &[usize],
) -> Result<(T, Array2<T>)> {
    if logits.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "labels per batch",
            expected: logits.nrows(),
            actual: labels.len(),
        });
    }
    let classes = logits.ncols();
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::LabelOutOfRange {
            index,
            label,
            classes,
        });
    }
    let n = T::of(labels.len() as f64);
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = T::zero();
    Zip::from(logits.rows())
        .and(grad.rows_mut())
        .and(labels)
        .for_each(|z, mut g, &label| {
            total += softmax_row(z, label, g.as_slice_mut().expect("contiguous row"));
        });
    grad.mapv_inplace(|v| v / n);
    Ok((total / n, grad))
}

fn softmax_row<T: Real>(logits: ArrayView1<'_, T>, label: usize, grad: &mut [T]) -> T {
    let max = logits.fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut sum = T::zero();
    for (g, &z) in grad.iter_mut().zip(logits) {
        *g = (z - max).exp();
        sum += *g;
    }
    for g in grad.iter_mut() {
        *g = *g / sum;
    }
    let loss = sum.ln() - (logits[label] - max);
    grad[label] -= T::one();
    loss
}

/// Index of the largest logit per row; ties go to the lowest index.
pub fn argmax_rows<T: Real>(logits: ArrayView2<'_, T>) -> Vec<usize> {
    logits
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
