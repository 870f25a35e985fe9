//! Binary cross-entropy.

use crate::error::{Error, Result};

/// Predictions are clamped into `[PRED_CLAMP, 1 - PRED_CLAMP]` before any
/// logarithm so the loss stays finite at confident mispredictions.
pub const PRED_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to `pred`.
///
/// `loss = -mean(t * ln(p) + (1 - t) * ln(1 - p))` over clamped `p`.
/// The gradient is zero where the clamp binds (the clamped function is
/// flat there), matching what a finite difference of this exact function
/// reports. Targets may be soft values in `[0, 1]`.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() {
        return Err(Error::param("pred", "must be non-empty"));
    }
    if pred.len() != target.len() {
        return Err(Error::shape(
            "bce_loss",
            format!("{} predictions", pred.len()),
            format!("{} targets", target.len()),
        ));
    }
    if target.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::param("target", "values must lie in [0, 1]"));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, (&p, &t)) in pred.iter().zip(target).enumerate() {
        let pc = p.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP);
        loss -= (t * pc.ln() + (1.0 - t) * (1.0 - pc).ln()) / n;
        if (PRED_CLAMP..=1.0 - PRED_CLAMP).contains(&p) {
            grad[i] = (pc - t) / (pc * (1.0 - pc)) / n;
        }
    }
    Ok((loss, grad))
}
