use super::{backward, bce_with_logits, forward, ModelParams};
use crate::error::Result;
use crate::matrix::Matrix;

/// Per-tensor comparison of analytic and central-difference gradients.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub name: String,
    /// `max |analytic - numeric| / max |analytic|` over every entry.
    pub rel_error: f64,
    /// The same ratio restricted to entries whose `+-h` perturbations kept
    /// every ReLU and pooling decision unchanged.
    pub rel_error_smooth: f64,
    /// Entries whose perturbation switched a ReLU or pooling decision.
    /// Central differences across such a switch do not estimate the
    /// derivative.
    pub pattern_flips: usize,
    pub entries: usize,
    pub max_abs: f64,
}

/// Checks [`backward`] against central differences of the mean BCE loss,
/// perturbing every parameter by `+-h`.
pub fn gradient_check(params: &ModelParams, input: &[f64], batch: usize, targets: &Matrix<f64>, h: f64) -> Result<Vec<GradCheck>> {
    let (logits, cache) = forward(params, input, batch)?;
    let (_, dlogits) = bce_with_logits(&logits, targets)?;
    let analytic = backward(params, &cache, &dlogits)?;

    let loss_at = |p: &ModelParams| -> Result<(f64, bool)> {
        let (l, c) = forward(p, input, batch)?;
        Ok((bce_with_logits(&l, targets)?.0, c.same_pattern(&cache)))
    };
    let mut work = params.clone();
    let mut out = Vec::new();
    for (ti, g) in analytic.tensors.iter().enumerate() {
        let (mut worst, mut worst_smooth) = (0.0f64, 0.0f64);
        let mut flips = 0;
        for i in 0..g.data.len() {
            let orig = work.tensors()[ti].data[i];
            work.tensors_mut()[ti].data[i] = orig + h;
            let (up, same_up) = loss_at(&work)?;
            work.tensors_mut()[ti].data[i] = orig - h;
            let (down, same_down) = loss_at(&work)?;
            work.tensors_mut()[ti].data[i] = orig;
            let err = ((up - down) / (2.0 * h) - g.data[i]).abs();
            worst = worst.max(err);
            if same_up && same_down {
                worst_smooth = worst_smooth.max(err);
            } else {
                flips += 1;
            }
        }
        let scale = g.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rel = |e: f64| if scale > 0.0 { e / scale } else { e };
        out.push(GradCheck {
            name: g.name.clone(),
            rel_error: rel(worst),
            rel_error_smooth: rel(worst_smooth),
            pattern_flips: flips,
            entries: g.data.len(),
            max_abs: scale,
        });
    }
    Ok(out)
}
