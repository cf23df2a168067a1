use crate::attacks::{sign, Classifier};
use crate::error::{check_len, QrcError, Result};

fn check_budget(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(QrcError::InvalidInput(format!(
            "attack budget {epsilon} must be ≥ 0"
        )));
    }
    Ok(())
}

pub(crate) fn check_budgets(epsilons: &[f64]) -> Result<()> {
    epsilons.iter().try_for_each(|&e| check_budget(e))
}

/// clip(x + ε·sign(∇ₓL)) to the input box. sign(0) = 0.
pub fn fgsm<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    label: usize,
    epsilon: f64,
) -> Result<Vec<f64>> {
    Ok(fgsm_sweep(model, x, label, &[epsilon])?.remove(0))
}

/// FGSM at several budgets from one gradient evaluation.
pub fn fgsm_sweep<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    label: usize,
    epsilons: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_len("attack input", model.input_dim(), x.len())?;
    check_budgets(epsilons)?;
    let signs: Option<Vec<f64>> = if epsilons.iter().any(|&e| e > 0.0) {
        let (_, _, g) = model.loss_gradient(x, label)?;
        Some(g.into_iter().map(sign).collect())
    } else {
        None
    };
    let (lo, hi) = model.input_bounds();
    Ok(epsilons
        .iter()
        .map(|&eps| match &signs {
            Some(s) if eps > 0.0 => x
                .iter()
                .zip(s)
                .map(|(&xi, &si)| (xi + eps * si).clamp(lo, hi))
                .collect(),
            _ => x.to_vec(),
        })
        .collect())
}
