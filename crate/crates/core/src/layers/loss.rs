use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, c) = logits.dims2()?;
    let mut out = logits.data().to_vec();
    for row in out.chunks_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::new(logits.shape().to_vec(), out)
}

pub fn one_hot<T: Scalar>(labels: &[usize], classes: usize) -> Result<Tensor<T>> {
    let mut t = Tensor::zeros(vec![labels.len(), classes]);
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Validation(format!("label {l} out of range for {classes} classes")));
        }
        t.data_mut()[i * classes + l] = T::one();
    }
    Ok(t)
}

/// Mean categorical cross-entropy `−Σ Tᵢ log softmax(x)ᵢ` over the batch and
/// its gradient `(softmax(x) − T)/b` with respect to the logits.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, targets: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let (b, c) = logits.dims2()?;
    if targets.shape() != logits.shape() {
        return Err(Error::Shape(format!(
            "targets {:?} do not match logits {:?}",
            targets.shape(),
            logits.shape()
        )));
    }
    if c < 2 {
        return Err(Error::Validation("cross-entropy needs at least 2 classes".into()));
    }
    for (i, row) in targets.data().chunks(c).enumerate() {
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros != c - 1 {
            return Err(Error::Validation(format!("target row {i} is not one-hot")));
        }
    }
    let bt = T::count(b);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(b * c);
    for (x, t) in logits.data().chunks(c).zip(targets.data().chunks(c)) {
        let max = x.iter().copied().fold(T::neg_infinity(), T::max);
        let log_z = x.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        for (&xi, &ti) in x.iter().zip(t) {
            if ti == T::one() {
                loss += log_z - xi;
            }
            grad.push(((xi - log_z).exp() - ti) / bt);
        }
    }
    Ok((loss / bt, Tensor::new(vec![b, c], grad)?))
}
