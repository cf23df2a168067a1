//! Robustness report: accuracy curves per model and attack, the mean
//! accuracy gain ΔAcc, and JSON/CSV emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::BenchError;

pub const HYBRID_MODEL: &str = "qrc+mlp";
pub const CLASSICAL_MODEL: &str = "mlp";
pub const CSV_HEADER: &str = "dataset,model,attack,N,epsilon,accuracy";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanAccuracy {
    pub model: String,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub model: String,
    pub attack: String,
    /// Acc(ε), one entry per grid point.
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaAcc {
    pub attack: String,
    pub value: f64,
}

/// Results for one atom count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub n_atoms: usize,
    pub retained_dim: usize,
    pub explained_variance: f64,
    pub embedding_dim: usize,
    pub clean: Vec<CleanAccuracy>,
    pub attacked_samples: usize,
    pub curves: Vec<Curve>,
    pub delta_acc: Vec<DeltaAcc>,
}

impl SweepEntry {
    pub fn clean_accuracy(&self, model: &str) -> Option<f64> {
        self.clean
            .iter()
            .find(|c| c.model == model)
            .map(|c| c.test_accuracy)
    }

    pub fn curve(&self, model: &str, attack: &str) -> Option<&[f64]> {
        self.curves
            .iter()
            .find(|c| c.model == model && c.attack == attack)
            .map(|c| c.accuracy.as_slice())
    }

    pub fn delta(&self, attack: &str) -> Option<f64> {
        self.delta_acc
            .iter()
            .find(|d| d.attack == attack)
            .map(|d| d.value)
    }
}

/// Run facts that are not part of the configuration. Wall-clock data is
/// deliberately absent so that reports stay byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub train_samples: usize,
    pub test_samples: usize,
    pub num_classes: usize,
    pub hybrid_gradient: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub dataset: String,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub images_sha256: String,
    pub labels_sha256: String,
    pub epsilons: Vec<f64>,
    pub metadata: RunMetadata,
    pub entries: Vec<SweepEntry>,
}

/// Mean over the grid of the pointwise difference hybrid − classical.
pub fn delta_acc(hybrid: &[f64], classical: &[f64]) -> f64 {
    assert_eq!(hybrid.len(), classical.len(), "curves on different grids");
    if hybrid.is_empty() {
        return 0.0;
    }
    let total: f64 = hybrid.iter().zip(classical).map(|(h, c)| h - c).sum();
    total / hybrid.len() as f64
}

/// Fills in ΔAcc for every attack that has both a hybrid and a classical curve.
pub fn summarize(entry: &mut SweepEntry) {
    let mut attacks: Vec<&str> = Vec::new();
    for c in &entry.curves {
        if !attacks.contains(&c.attack.as_str()) {
            attacks.push(&c.attack);
        }
    }
    entry.delta_acc = attacks
        .into_iter()
        .filter_map(|attack| {
            let h = entry.curve(HYBRID_MODEL, attack)?;
            let c = entry.curve(CLASSICAL_MODEL, attack)?;
            Some(DeltaAcc {
                attack: attack.to_string(),
                value: delta_acc(h, c),
            })
        })
        .collect();
}

impl RobustnessReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Data(format!("malformed report: {e}")))
    }

    /// One row per (N, model, attack, ε); numbers carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for entry in &self.entries {
            for curve in &entry.curves {
                for (eps, acc) in self.epsilons.iter().zip(&curve.accuracy) {
                    writeln!(
                        out,
                        "{},{},{},{},{:.16e},{:.16e}",
                        self.dataset, curve.model, curve.attack, entry.n_atoms, eps, acc
                    )
                    .expect("writing to a String");
                }
            }
        }
        out
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn emit(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
        for (name, body) in [
            ("report.json", self.to_json()),
            ("report.csv", self.to_csv()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| BenchError::io(&path, e))?;
        }
        Ok(())
    }
}
