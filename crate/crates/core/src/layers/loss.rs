use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Scalar;

/// Mean softmax cross-entropy over a `[batch × classes]` logit matrix.
///
/// Returns the loss and `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    targets: &[usize],
) -> Result<(T, Tensor<T>)> {
    let &[batch, classes] = logits.shape() else {
        return Err(Error::dim(format!(
            "logits must be [batch × classes], got {:?}",
            logits.shape()
        )));
    };
    if targets.len() != batch {
        return Err(Error::dim(format!(
            "{} targets for {batch} logit rows",
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
        return Err(Error::Label(format!(
            "target {bad} outside [0, {classes})"
        )));
    }
    let scale = T::one() / T::of(batch as f64);
    let mut grad = vec![T::zero(); batch * classes];
    let mut total = T::zero();
    for (b, &target) in targets.iter().enumerate() {
        let row = &logits.data()[b * classes..(b + 1) * classes];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let g = &mut grad[b * classes..(b + 1) * classes];
        let mut sum = T::zero();
        for (gi, &l) in g.iter_mut().zip(row) {
            *gi = (l - max).exp();
            sum += *gi;
        }
        // -log softmax[target] = log(sum) - (l_target - max)
        total += sum.ln() - (row[target] - max);
        for gi in g.iter_mut() {
            *gi = *gi / sum * scale;
        }
        g[target] -= scale;
    }
    Ok((total * scale, Tensor::new(vec![batch, classes], grad)?))
}
