//! Balanced, stratified train/test subsets.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub per_class: usize,
    pub train_fraction: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            name: "mnist".into(),
            per_class: 100,
            train_fraction: 0.7,
        }
    }
}

impl DatasetSpec {
    /// Training samples per class, ⌈fraction · per_class⌉. The small offset
    /// keeps products such as 0.7 · 100 = 70.00000000000001 from rounding up.
    pub fn train_per_class(&self) -> usize {
        (self.train_fraction * self.per_class as f64 - 1e-9)
            .ceil()
            .max(0.0) as usize
    }
}

/// Indices into the source set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draws `per_class` samples from every class with a seeded shuffle and
/// splits each class into train and test. Both lists are ordered by class,
/// then draw order.
pub fn balanced_subset(labels: &[u8], spec: &DatasetSpec, seed: u64) -> Result<Split, BenchError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(BenchError::Config(format!(
            "train_fraction {} must lie in (0, 1)",
            spec.train_fraction
        )));
    }
    if spec.per_class == 0 {
        return Err(BenchError::Config("per_class must be positive".into()));
    }
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (k, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(k);
    }
    let n_train = spec.train_per_class();
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut members) in by_class {
        if members.len() < spec.per_class {
            return Err(BenchError::Data(format!(
                "class {class} has {} samples, {} requested",
                members.len(),
                spec.per_class
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        split.train.extend_from_slice(&members[..n_train]);
        split
            .test
            .extend_from_slice(&members[n_train..spec.per_class]);
    }
    Ok(split)
}
