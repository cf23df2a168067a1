use crate::error::{check_len, QrcError, Result};
use crate::reservoir::ReservoirConfig;
use serde::{Deserialize, Serialize};

/// Per-dimension min–max map from PCA features to detunings, with constants
/// frozen on the training split.
///
/// Values outside the fitted range are clamped to the range boundary, so
/// perturbed inputs never drive the reservoir outside [Δ_min, Δ_max].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningMap {
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
    pub detuning_min: f64,
    pub detuning_max: f64,
}

impl DetuningMap {
    pub fn fit(features: &[Vec<f64>], config: &ReservoirConfig) -> Result<Self> {
        let dim = features.first().map(Vec::len).ok_or_else(|| {
            QrcError::InvalidInput("no features to fit the detuning map on".into())
        })?;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for f in features {
            check_len("detuning map feature", dim, f.len())?;
            for i in 0..dim {
                lo[i] = lo[i].min(f[i]);
                hi[i] = hi[i].max(f[i]);
            }
        }
        Self::from_bounds(lo, hi, config.detuning_min, config.detuning_max)
    }

    pub fn from_bounds(
        feature_min: Vec<f64>,
        feature_max: Vec<f64>,
        detuning_min: f64,
        detuning_max: f64,
    ) -> Result<Self> {
        check_len("detuning map bounds", feature_min.len(), feature_max.len())?;
        if feature_min.iter().zip(&feature_max).any(|(a, b)| !(a <= b))
            || !(detuning_min <= detuning_max)
        {
            return Err(QrcError::Config(
                "detuning map bounds are inverted or NaN".into(),
            ));
        }
        Ok(Self {
            feature_min,
            feature_max,
            detuning_min,
            detuning_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.feature_min.len()
    }

    fn unit(&self, i: usize, x: f64) -> Option<f64> {
        let (lo, hi) = (self.feature_min[i], self.feature_max[i]);
        (hi > lo).then(|| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
    }

    /// Δ_min + t·(Δ_max − Δ_min) with t the clamped normalized feature;
    /// constant dimensions map to the midpoint.
    pub fn map(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_len("detuning map input", self.dim(), features.len())?;
        Ok(features
            .iter()
            .enumerate()
            .map(|(i, &x)| match self.unit(i, x) {
                // endpoint-exact form of Δ_min + t(Δ_max − Δ_min)
                Some(t) => self.detuning_min * (1.0 - t) + self.detuning_max * t,
                None => 0.5 * (self.detuning_min + self.detuning_max),
            })
            .collect())
    }

    /// Diagonal of ∂Δ/∂x: the scale factor inside the fitted range, 0 where
    /// the input is clamped or the dimension is constant.
    pub fn slopes(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_len("detuning map input", self.dim(), features.len())?;
        Ok(features
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let (lo, hi) = (self.feature_min[i], self.feature_max[i]);
                if hi > lo && (lo..=hi).contains(&x) {
                    (self.detuning_max - self.detuning_min) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect())
    }
}
