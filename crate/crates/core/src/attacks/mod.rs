//! White-box evasion attacks: FGSM and PGD under an ℓ∞ budget, multiclass
//! DeepFool under an ℓ₂ budget.
//!
//! Every attack clips its output to the classifier's input box last, so the
//! returned perturbation never exceeds the requested budget. A zero budget
//! returns the input unchanged, bit for bit.

mod deepfool;
mod fgsm;
mod models;
mod pgd;

use serde::{Deserialize, Serialize};

pub use deepfool::{deepfool, deepfool_sweep, DeepFoolOutcome};
pub use fgsm::{fgsm, fgsm_sweep};
pub use models::{ClassicalModel, EmbeddingModel, GradientPath, HybridModel, RawPixelModel};
pub use pgd::{pgd, pgd_sweep, pgd_with_observer};

use crate::error::Result;
use crate::readout::argmax;

/// A differentiable classifier over a box-constrained input.
pub trait Classifier {
    fn num_classes(&self) -> usize;

    fn input_dim(&self) -> usize;

    /// Valid input range applied per coordinate.
    fn input_bounds(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Logits, cross-entropy loss and ∂loss/∂x.
    fn loss_gradient(&self, x: &[f64], label: usize) -> Result<(Vec<f64>, f64, Vec<f64>)>;

    /// Logits and ∂f_k/∂x for every class k.
    fn logit_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)>;

    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackFamily {
    Fgsm,
    Pgd,
    DeepFool,
}

impl AttackFamily {
    pub const ALL: [AttackFamily; 3] = [
        AttackFamily::Fgsm,
        AttackFamily::Pgd,
        AttackFamily::DeepFool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackFamily::Fgsm => "fgsm",
            AttackFamily::Pgd => "pgd",
            AttackFamily::DeepFool => "deepfool",
        }
    }
}

impl std::str::FromStr for AttackFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fgsm" => Ok(AttackFamily::Fgsm),
            "pgd" => Ok(AttackFamily::Pgd),
            "deepfool" => Ok(AttackFamily::DeepFool),
            other => Err(format!("unknown attack family `{other}`")),
        }
    }
}

/// Iterative-attack parameters shared by PGD and DeepFool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    /// Maximum iterations T.
    pub steps: usize,
    /// PGD step ζ.
    pub step_size: f64,
    /// PGD: start from a uniform point in the ε-ball.
    pub random_start: bool,
    /// DeepFool: the accumulated step is scaled by 1 + overshoot.
    pub overshoot: f64,
    pub seed: u64,
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self {
            steps: 100,
            step_size: 1e-3,
            random_start: false,
            overshoot: 0.02,
            seed: 0,
        }
    }
}

/// Runs one attack family at every budget in `epsilons`, sharing work
/// across budgets where the result is provably the same.
pub fn attack_sweep<C: Classifier + ?Sized>(
    model: &C,
    family: AttackFamily,
    x: &[f64],
    label: usize,
    spec: &AttackSpec,
    epsilons: &[f64],
) -> Result<Vec<Vec<f64>>> {
    match family {
        AttackFamily::Fgsm => fgsm_sweep(model, x, label, epsilons),
        AttackFamily::Pgd => pgd_sweep(model, x, label, spec, epsilons),
        AttackFamily::DeepFool => deepfool_sweep(model, x, Some(label), spec, epsilons),
    }
}

pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}
