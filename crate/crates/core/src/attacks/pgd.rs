use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attacks::fgsm::check_budgets;
use crate::attacks::{sign, AttackSpec, Classifier};
use crate::error::{check_len, QrcError, Result};

/// Per-coordinate box [x₀ − ε, x₀ + ε] ∩ [lo, hi].
fn project(candidate: &mut [f64], x0: &[f64], epsilon: f64, bounds: (f64, f64)) {
    for (c, &o) in candidate.iter_mut().zip(x0) {
        *c = c.clamp((o - epsilon).max(bounds.0), (o + epsilon).min(bounds.1));
    }
}

fn check_spec(spec: &AttackSpec) -> Result<()> {
    if spec.steps == 0 || !(spec.step_size > 0.0) {
        return Err(QrcError::Config(format!(
            "PGD needs steps ≥ 1 and a positive step size, got {} and {}",
            spec.steps, spec.step_size
        )));
    }
    Ok(())
}

/// T iterations of x ← Proj(x + ζ·sign(∇ₓL)).
pub fn pgd<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    label: usize,
    spec: &AttackSpec,
    epsilon: f64,
) -> Result<Vec<f64>> {
    pgd_with_observer(model, x, label, spec, epsilon, |_, _| {})
}

/// [`pgd`] that reports every iterate (iteration index, point) to `observer`.
pub fn pgd_with_observer<C, F>(
    model: &C,
    x: &[f64],
    label: usize,
    spec: &AttackSpec,
    epsilon: f64,
    mut observer: F,
) -> Result<Vec<f64>>
where
    C: Classifier + ?Sized,
    F: FnMut(usize, &[f64]),
{
    check_len("attack input", model.input_dim(), x.len())?;
    check_budgets(&[epsilon])?;
    check_spec(spec)?;
    if epsilon == 0.0 {
        return Ok(x.to_vec());
    }
    let bounds = model.input_bounds();
    let mut cur = x.to_vec();
    if spec.random_start {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for c in &mut cur {
            *c += rng.gen_range(-epsilon..=epsilon);
        }
        project(&mut cur, x, epsilon, bounds);
    }
    for t in 0..spec.steps {
        let (_, _, g) = model.loss_gradient(&cur, label)?;
        for (c, gi) in cur.iter_mut().zip(&g) {
            *c += spec.step_size * sign(*gi);
        }
        project(&mut cur, x, epsilon, bounds);
        observer(t, &cur);
    }
    Ok(cur)
}

/// PGD at every budget in `epsilons`. Budgets whose iterates coincide share
/// gradient evaluations; a group splits as soon as its projections differ.
/// With a random start every budget runs independently.
pub fn pgd_sweep<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    label: usize,
    spec: &AttackSpec,
    epsilons: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_len("attack input", model.input_dim(), x.len())?;
    check_budgets(epsilons)?;
    check_spec(spec)?;
    if spec.random_start {
        return epsilons
            .iter()
            .map(|&e| pgd(model, x, label, spec, e))
            .collect();
    }
    let bounds = model.input_bounds();
    let mut out: Vec<Option<Vec<f64>>> = epsilons
        .iter()
        .map(|&e| (e == 0.0).then(|| x.to_vec()))
        .collect();
    let live: Vec<usize> = (0..epsilons.len()).filter(|&k| epsilons[k] > 0.0).collect();
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = if live.is_empty() {
        Vec::new()
    } else {
        vec![(x.to_vec(), live)]
    };
    for _ in 0..spec.steps {
        let mut next = Vec::with_capacity(groups.len());
        for (point, members) in groups {
            let (_, _, g) = model.loss_gradient(&point, label)?;
            let stepped: Vec<f64> = point
                .iter()
                .zip(&g)
                .map(|(p, gi)| p + spec.step_size * sign(*gi))
                .collect();
            let mut split: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
            for k in members {
                let mut cand = stepped.clone();
                project(&mut cand, x, epsilons[k], bounds);
                match split.iter_mut().find(|(p, _)| bitwise_eq(p, &cand)) {
                    Some((_, ks)) => ks.push(k),
                    None => split.push((cand, vec![k])),
                }
            }
            next.extend(split);
        }
        groups = next;
    }
    for (point, members) in groups {
        for k in members {
            out[k] = Some(point.clone());
        }
    }
    Ok(out
        .into_iter()
        .map(|p| p.expect("every budget is assigned"))
        .collect())
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}
