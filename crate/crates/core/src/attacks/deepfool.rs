use crate::attacks::fgsm::check_budgets;
use crate::attacks::{AttackSpec, Classifier};
use crate::error::{check_len, Result};
use crate::readout::argmax;

#[derive(Debug, Clone, PartialEq)]
pub struct DeepFoolOutcome {
    /// Accumulated linearized steps r = Σ rᵢ, before overshoot.
    pub raw_perturbation: Vec<f64>,
    /// (1 + overshoot)·r, the unbudgeted perturbation η*.
    pub perturbation: Vec<f64>,
    pub iterations: usize,
    /// The prediction at x + η* differs from the starting class.
    pub flipped: bool,
    /// Every competing class had a zero gradient difference.
    pub degenerate: bool,
    /// The input was already misclassified and left alone.
    pub already_misclassified: bool,
}

/// Multiclass DeepFool: repeatedly step to the nearest linearized boundary
///
///   l = argmin_{c ≠ k} |f_c − f_k| / ‖∇f_c − ∇f_k‖₂,
///   rᵢ = |f_l − f_k| / ‖w_l‖₂² · w_l,   w_l = ∇f_l − ∇f_k,
///
/// until the prediction at clip(x + (1 + overshoot)·Σrᵢ) changes or the
/// step budget runs out. With a label, misclassified inputs are returned as is.
pub fn deepfool<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    label: Option<usize>,
    spec: &AttackSpec,
) -> Result<DeepFoolOutcome> {
    check_len("attack input", model.input_dim(), x.len())?;
    let dim = x.len();
    let scale = 1.0 + spec.overshoot;
    let mut outcome = DeepFoolOutcome {
        raw_perturbation: vec![0.0; dim],
        perturbation: vec![0.0; dim],
        iterations: 0,
        flipped: false,
        degenerate: false,
        already_misclassified: false,
    };
    let (mut logits, mut jac) = model.logit_jacobian(x)?;
    let k0 = argmax(&logits);
    if label.is_some_and(|y| y != k0) {
        outcome.already_misclassified = true;
        return Ok(outcome);
    }
    let (lo, hi) = model.input_bounds();
    let mut point = x.to_vec();
    for it in 0..spec.steps {
        let mut best: Option<(f64, usize, f64)> = None;
        for c in (0..logits.len()).filter(|&c| c != k0) {
            let norm_sq: f64 = jac[c]
                .iter()
                .zip(&jac[k0])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            if norm_sq == 0.0 {
                continue;
            }
            let gap = (logits[c] - logits[k0]).abs();
            let dist = gap / norm_sq.sqrt();
            if best.map_or(true, |(d, _, _)| dist < d) {
                best = Some((dist, c, norm_sq));
            }
        }
        let Some((_, l, norm_sq)) = best else {
            outcome.degenerate = true;
            break;
        };
        let coef = (logits[l] - logits[k0]).abs() / norm_sq;
        for ((r, a), b) in outcome
            .raw_perturbation
            .iter_mut()
            .zip(&jac[l])
            .zip(&jac[k0])
        {
            *r += coef * (a - b);
        }
        outcome.iterations = it + 1;
        for ((p, &xi), &r) in point.iter_mut().zip(x).zip(&outcome.raw_perturbation) {
            // the linearization may leave the input box; the model is only
            // defined inside it
            *p = (xi + scale * r).clamp(lo, hi);
        }
        (logits, jac) = model.logit_jacobian(&point)?;
        if argmax(&logits) != k0 {
            outcome.flipped = true;
            break;
        }
    }
    if outcome.degenerate && outcome.iterations == 0 {
        return Ok(outcome);
    }
    outcome.perturbation = outcome.raw_perturbation.iter().map(|r| scale * r).collect();
    Ok(outcome)
}

impl DeepFoolOutcome {
    /// clip(x + min(1, ε/‖η*‖₂)·η*) to the input box.
    pub fn apply(&self, x: &[f64], epsilon: f64, bounds: (f64, f64)) -> Vec<f64> {
        let norm = self.perturbation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if epsilon == 0.0 || norm == 0.0 {
            return x.to_vec();
        }
        let factor = (epsilon / norm).min(1.0);
        x.iter()
            .zip(&self.perturbation)
            .map(|(xi, p)| (xi + factor * p).clamp(bounds.0, bounds.1))
            .collect()
    }
}

/// DeepFool at several budgets. η* does not depend on ε, so it is computed
/// once and rescaled per budget.
pub fn deepfool_sweep<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    label: Option<usize>,
    spec: &AttackSpec,
    epsilons: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_budgets(epsilons)?;
    if epsilons.iter().all(|&e| e == 0.0) {
        check_len("attack input", model.input_dim(), x.len())?;
        return Ok(vec![x.to_vec(); epsilons.len()]);
    }
    let outcome = deepfool(model, x, label, spec)?;
    let bounds = model.input_bounds();
    Ok(epsilons
        .iter()
        .map(|&e| outcome.apply(x, e, bounds))
        .collect())
}
