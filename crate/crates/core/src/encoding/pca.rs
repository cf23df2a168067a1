use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, QrcError, Result};

/// Relative eigenvalue floor below which a direction counts as degenerate.
const RANK_TOLERANCE: f64 = 1e-12;

/// How many principal directions to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComponentSelection {
    /// Exactly δ components.
    Fixed(usize),
    /// The smallest δ whose cumulative explained variance exceeds the
    /// threshold, which must lie in (0, 1).
    VarianceThreshold(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Pooled patch mean µ, length P².
    pub mean: Vec<f64>,
    /// P² × δ, columns are unit principal directions.
    pub components: DMatrix<f64>,
    /// All P² covariance eigenvalues, descending, clipped at 0.
    pub eigenvalues: Vec<f64>,
    /// Set when δ came from a variance threshold.
    pub variance_threshold: Option<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// δ.
    pub fn retained_dim(&self) -> usize {
        self.components.ncols()
    }

    /// Fraction of total variance captured by the retained components.
    pub fn explained_variance(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total == 0.0 {
            return 1.0;
        }
        self.eigenvalues[..self.retained_dim()].iter().sum::<f64>() / total
    }

    /// Wᵀ(p − µ).
    pub fn project(&self, patch: &[f64]) -> Result<Vec<f64>> {
        check_len("pca input", self.input_dim(), patch.len())?;
        let centered = DVector::from_iterator(
            patch.len(),
            patch.iter().zip(&self.mean).map(|(p, m)| p - m),
        );
        Ok(self.components.tr_mul(&centered).iter().copied().collect())
    }

    /// µ + W·z.
    pub fn reconstruct(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_len("pca features", self.retained_dim(), features.len())?;
        let z = DVector::from_column_slice(features);
        let back = &self.components * z;
        Ok(back.iter().zip(&self.mean).map(|(b, m)| b + m).collect())
    }

    /// Jacobian of [`PcaModel::project`], the δ × P² matrix Wᵀ.
    pub fn jacobian(&self) -> DMatrix<f64> {
        self.components.transpose()
    }

    /// W·g: pulls a cotangent on the features back to the patch.
    pub fn pullback(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        check_len("pca cotangent", self.retained_dim(), cotangent.len())?;
        Ok((&self.components * DVector::from_column_slice(cotangent))
            .iter()
            .copied()
            .collect())
    }
}

/// Fits PCA on pooled training patches with covariance
/// (1/n)·Σ (p − µ)(p − µ)ᵀ.
///
/// If the data has fewer than δ non-degenerate directions δ is reduced, with
/// a warning. Each component is signed so that its largest-magnitude entry
/// is positive.
pub fn fit_pca(patches: &[Vec<f64>], selection: ComponentSelection) -> Result<PcaModel> {
    let dim = patches
        .first()
        .map(Vec::len)
        .ok_or_else(|| QrcError::InvalidInput("no patches to fit PCA on".into()))?;
    if dim == 0 {
        return Err(QrcError::InvalidInput("patches are empty".into()));
    }
    for p in patches {
        check_len("pca training patch", dim, p.len())?;
    }
    let requested = match selection {
        ComponentSelection::Fixed(d) => {
            if d == 0 || d > dim {
                return Err(QrcError::Config(format!(
                    "retained dimension {d} must lie in 1..={dim}"
                )));
            }
            if patches.len() < d + 1 {
                return Err(QrcError::InvalidInput(format!(
                    "{} patches cannot support {d} components",
                    patches.len()
                )));
            }
            Some(d)
        }
        ComponentSelection::VarianceThreshold(t) => {
            if !(t > 0.0 && t < 1.0) {
                return Err(QrcError::Config(format!(
                    "variance threshold {t} must lie in (0, 1)"
                )));
            }
            if patches.len() < 2 {
                return Err(QrcError::InvalidInput(
                    "PCA needs at least two patches".into(),
                ));
            }
            None
        }
    };

    let n = patches.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in patches {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut centered = DMatrix::zeros(dim, patches.len());
    for (k, p) in patches.iter().enumerate() {
        for i in 0..dim {
            centered[(i, k)] = p[i] - mean[i];
        }
    }
    let mut cov = &centered * centered.transpose() / n;
    // exact symmetry for the eigensolver
    for i in 0..dim {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();

    let total: f64 = eigenvalues.iter().sum();
    let mut delta = match (requested, selection) {
        (Some(d), _) => d,
        (None, ComponentSelection::VarianceThreshold(t)) => {
            if total == 0.0 {
                1
            } else {
                let mut acc = 0.0;
                eigenvalues
                    .iter()
                    .position(|l| {
                        acc += l;
                        acc / total > t
                    })
                    .map_or(dim, |k| k + 1)
            }
        }
        (None, ComponentSelection::Fixed(_)) => unreachable!(),
    };
    let rank = eigenvalues
        .iter()
        .filter(|&&l| l > RANK_TOLERANCE * eigenvalues[0].max(f64::MIN_POSITIVE))
        .count();
    if delta > rank.max(1) {
        log::warn!("patch covariance has rank {rank}; reducing retained dimension from {delta}");
        delta = rank.max(1);
    }

    let mut components = DMatrix::zeros(dim, delta);
    for (c, &k) in order.iter().take(delta).enumerate() {
        let col = eig.eigenvectors.column(k);
        let pivot = (0..dim)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
            .unwrap_or(0);
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..dim {
            components[(i, c)] = sign * col[i];
        }
    }

    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        variance_threshold: match selection {
            ComponentSelection::VarianceThreshold(t) => Some(t),
            ComponentSelection::Fixed(_) => None,
        },
    })
}
