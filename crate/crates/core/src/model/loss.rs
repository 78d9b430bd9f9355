use crate::error::{Error, Result};
use crate::matrix::Matrix;

// Nearest doubles strictly inside (0, 1); exp under/overflow would
// otherwise round the tails to exactly 0 or 1.
const PROB_MIN: f64 = f64::MIN_POSITIVE;
const PROB_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, evaluated on whichever side keeps `exp` from
/// overflowing. The result is kept strictly inside `(0, 1)`.
pub fn sigmoid(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_MIN, PROB_MAX)
}

/// Mean binary cross-entropy over all `B x C` logits, fused with the
/// sigmoid as `max(x, 0) - x p + ln(1 + exp(-|x|))`.
///
/// Returns the loss and its gradient with respect to the logits,
/// `(sigmoid(x) - p) / (B C)`.
pub fn bce_with_logits(logits: &Matrix<f64>, targets: &Matrix<f64>) -> Result<(f64, Matrix<f64>)> {
    if logits.shape() != targets.shape() {
        return Err(Error::ShapeMismatch(format!(
            "logits {:?} vs targets {:?}",
            logits.shape(),
            targets.shape()
        )));
    }
    if let Some((index, &value)) = targets
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, &t)| t != 0.0 && t != 1.0)
    {
        return Err(Error::InvalidTarget { index, value });
    }
    let count = logits.as_slice().len();
    if count == 0 {
        return Err(Error::EmptyInput("no logits"));
    }
    let n = count as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(count);
    for (&x, &p) in logits.as_slice().iter().zip(targets.as_slice()) {
        total += x.max(0.0) - x * p + (-x.abs()).exp().ln_1p();
        grad.push((sigmoid(x) - p) / n);
    }
    Ok((
        total / n,
        Matrix::from_vec(logits.rows(), logits.cols(), grad),
    ))
}
