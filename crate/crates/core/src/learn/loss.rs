use alloc::vec;
use alloc::vec::Vec;

use super::features::{check_unit, DEGENERATE_NORM};
use super::LearnError;
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// Gradient w.r.t. each raw (pre-normalization) online feature.
    pub grad: Vec<Vec<f64>>,
}

/// Point-to-instance InfoNCE.
///
/// `online[j]` is the raw online feature of foreground sample `j` belonging to
/// instance `labels[j]`; it is L2-normalized here and the gradient is taken
/// through that normalization. `instances` (temporal averages) and
/// `background` are unit-norm targets and receive no gradient.
///
/// `loss = -(1/N_F) Σ_j log softmax_j[labels[j]]` over the logits
/// `u_j·t / τ` for `t` in `instances ++ background`.
pub fn contrastive_loss(
    online: &[Vec<f64>],
    labels: &[usize],
    instances: &[Vec<f64>],
    background: &[Vec<f64>],
    tau: f64,
) -> Result<LossOutput, LearnError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(LearnError::BadTemperature(tau));
    }
    if online.len() != labels.len() {
        return Err(LearnError::ShapeMismatch("one label per online feature"));
    }
    if instances.is_empty() {
        return Err(LearnError::ShapeMismatch("need at least one instance target"));
    }
    let c = instances[0].len();
    for t in instances.iter().chain(background) {
        if t.len() != c {
            return Err(LearnError::ShapeMismatch("target features differ in length"));
        }
        check_unit(t)?;
    }
    let targets: Vec<f64> = instances.iter().chain(background).flatten().copied().collect();
    let n_f = online.len();
    let mut loss = math::CompensatedSum::default();
    let mut grad = Vec::with_capacity(n_f);
    // logits, then their shifted exponentials
    let mut logits = vec![0.0; instances.len() + background.len()];
    for (f, &m) in online.iter().zip(labels) {
        if f.len() != c {
            return Err(LearnError::ShapeMismatch("online feature length differs from targets"));
        }
        if m >= instances.len() {
            return Err(LearnError::ShapeMismatch("label outside the instance targets"));
        }
        let norm = math::l2_norm(f);
        if !(norm > DEGENERATE_NORM) {
            return Err(LearnError::NormalizationDegenerate);
        }
        let u: Vec<f64> = f.iter().map(|v| v / norm).collect();
        for (s, t) in logits.iter_mut().zip(targets.chunks_exact(c)) {
            *s = math::dot(&u, t) / tau;
        }
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = top - logits[m];
        let mut sum = math::CompensatedSum::default();
        for s in logits.iter_mut() {
            *s = math::exp(*s - top);
            sum.add(*s);
        }
        let total = sum.value();
        loss.add(gap + math::ln(total));

        // dL/du = (Σ_n p_n t_n − t_m) / τ
        let mut gu = vec![0.0; c];
        for (e, t) in logits.iter().zip(targets.chunks_exact(c)) {
            let p = e / total;
            for (g, v) in gu.iter_mut().zip(t.iter()) {
                *g += p * v;
            }
        }
        let scale = 1.0 / (tau * n_f as f64);
        for (g, v) in gu.iter_mut().zip(&instances[m]) {
            *g = (*g - v) * scale;
        }
        // through u = f/|f|: (I − u uᵀ) g / |f|
        let ug = math::dot(&u, &gu);
        grad.push(gu.iter().zip(&u).map(|(g, u)| (g - u * ug) / norm).collect());
    }
    let loss = if n_f == 0 { 0.0 } else { loss.value() / n_f as f64 };
    Ok(LossOutput { loss, grad })
}
