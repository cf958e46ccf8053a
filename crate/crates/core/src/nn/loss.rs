//! Binary cross-entropy on logits.

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `softplus(logit) - label * logit`.
pub fn bce_with_logits(logit: f64, label: f64) -> f64 {
    softplus(logit) - label * logit
}

/// Derivative of [`bce_with_logits`] with respect to the logit.
pub fn bce_grad(logit: f64, label: f64) -> f64 {
    sigmoid(logit) - label
}
