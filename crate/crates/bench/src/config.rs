//! Flat `key = value` experiment configuration.
//!
//! Physical keys use the reservoir symbols (`N`, `d`, `C6`, `Omega`,
//! `Delta_min`, `Delta_max`, `alpha`, `T`, `M`, `psi0`); frequencies are
//! given in cyclic MHz and converted to angular units on load, so
//! `Omega = 5` means Ω = 2π × 5 MHz. Lines starting with `#` are comments.
//! Every key is optional and unknown or repeated keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rydberg_qrc::attacks::{AttackFamily, AttackSpec, GradientPath};
use rydberg_qrc::encoding::{ComponentSelection, EncodingConfig};
use rydberg_qrc::readout::TrainConfig;
use rydberg_qrc::reservoir::{angular_mhz, InitialState, ReservoirConfig};
use sha2::{Digest, Sha256};

use crate::dataset::DatasetSpec;
use crate::error::BenchError;
use crate::seeds::{derive_seed, SeedRole};

/// Number of principal components fed to the reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RetainedDim {
    /// δ = N for every atom count in the sweep.
    Atoms,
    Fixed(usize),
    /// Smallest δ reaching this fraction of the variance.
    Variance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridGradient {
    Adjoint,
    FiniteDifference,
}

/// Reservoir parameters as written in the configuration: frequencies in
/// cyclic MHz, times in µs, lengths in µm.
#[derive(Debug, Clone, PartialEq)]
pub struct Physics {
    pub lattice_spacing: f64,
    pub c6: f64,
    pub rabi_frequency: f64,
    pub detuning_min: f64,
    pub detuning_max: f64,
    /// One value for every atom, or one per atom (at least max N entries).
    pub local_modulation: Vec<f64>,
    pub total_time: f64,
    pub num_snapshots: usize,
    pub initial_state: InitialState,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            lattice_spacing: 10.0,
            c6: 2000.0,
            rabi_frequency: 5.0,
            detuning_min: 0.0,
            detuning_max: 10.0,
            local_modulation: vec![0.15],
            total_time: 3.0,
            num_snapshots: 6,
            initial_state: InitialState::Plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub images_sha256: Option<String>,
    pub labels_sha256: Option<String>,
    pub seed: u64,
    pub atom_sweep: Vec<usize>,
    pub physics: Physics,
    pub downsample_size: usize,
    pub patch_width: usize,
    pub retained: RetainedDim,
    /// Readout hyperparameters; the seeds are derived from `seed`.
    pub training: TrainConfig,
    pub attacks: Vec<AttackFamily>,
    pub epsilons: Vec<f64>,
    pub pgd_steps: usize,
    pub pgd_step_size: f64,
    pub pgd_random_start: bool,
    pub deepfool_steps: usize,
    pub deepfool_overshoot: f64,
    pub hybrid_gradient: HybridGradient,
    /// Finite-difference step as a fraction of the detuning range.
    pub fd_step: f64,
    /// Attack only this many test samples (evenly spaced); 0 attacks all.
    pub attack_limit: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            dataset: DatasetSpec::default(),
            images: None,
            labels: None,
            images_sha256: None,
            labels_sha256: None,
            seed: 0,
            atom_sweep: vec![2, 4, 6, 8],
            physics: Physics::default(),
            downsample_size: 16,
            patch_width: 16,
            retained: RetainedDim::Atoms,
            training: train,
            attacks: AttackFamily::ALL.to_vec(),
            epsilons: (0..=10).map(|k| k as f64 / 100.0).collect(),
            pgd_steps: 100,
            pgd_step_size: 1e-3,
            pgd_random_start: false,
            deepfool_steps: 100,
            deepfool_overshoot: 0.02,
            hybrid_gradient: HybridGradient::Adjoint,
            fd_step: 1e-4,
            attack_limit: 0,
            cache_dir: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, BenchError>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| BenchError::Config(format!("{key} = {value}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, BenchError>
where
    T::Err: Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, BenchError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(BenchError::Config(format!(
            "{key} = {value}: expected true or false"
        ))),
    }
}

fn join<T: Display>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

/// Keys that only locate inputs; they are excluded from the hash and echo.
const LOCATION_KEYS: [&str; 3] = ["images", "labels", "cache_dir"];

impl ExperimentConfig {
    /// Parses configuration text. Relative paths resolve against `base`.
    pub fn parse_str(text: &str, base: &Path) -> Result<Self, BenchError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                BenchError::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            if let Some(first) = seen.insert(key.to_string(), lineno + 1) {
                return Err(BenchError::Config(format!(
                    "line {}: `{key}` already set on line {first}",
                    lineno + 1
                )));
            }
            cfg.set(key, value.trim(), base)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_str(&text, base)
    }

    /// Applies one assignment.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), BenchError> {
        let path = |v: &str| optional(v).map(|p| base.join(p));
        let r = &mut self.physics;
        match key {
            "dataset" => self.dataset.name = value.to_string(),
            "images" => self.images = path(value),
            "labels" => self.labels = path(value),
            "images_sha256" => self.images_sha256 = optional(&value.to_ascii_lowercase()),
            "labels_sha256" => self.labels_sha256 = optional(&value.to_ascii_lowercase()),
            "per_class" => self.dataset.per_class = parse(key, value)?,
            "train_fraction" => self.dataset.train_fraction = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "N" => self.atom_sweep = parse_list(key, value)?,
            "d" => r.lattice_spacing = parse(key, value)?,
            "C6" => r.c6 = parse(key, value)?,
            "Omega" => r.rabi_frequency = parse(key, value)?,
            "Delta_min" => r.detuning_min = parse(key, value)?,
            "Delta_max" => r.detuning_max = parse(key, value)?,
            "alpha" => r.local_modulation = parse_list(key, value)?,
            "T" => r.total_time = parse(key, value)?,
            "M" => r.num_snapshots = parse(key, value)?,
            "psi0" => {
                r.initial_state = match value {
                    "plus" => InitialState::Plus,
                    "ground" => InitialState::Ground,
                    _ => {
                        return Err(BenchError::Config(format!(
                            "psi0 = {value}: expected plus or ground"
                        )))
                    }
                }
            }
            "downsample_size" => self.downsample_size = parse(key, value)?,
            "patch_width" => self.patch_width = parse(key, value)?,
            "delta" => {
                self.retained = if value == "atoms" {
                    RetainedDim::Atoms
                } else if let Some(p) = value.strip_prefix("variance:") {
                    RetainedDim::Variance(parse(key, p)?)
                } else {
                    RetainedDim::Fixed(parse(key, value)?)
                }
            }
            "hidden" => self.training.hidden = parse_list(key, value)?,
            "dropout" => self.training.dropout_rate = parse(key, value)?,
            "learning_rate" => self.training.learning_rate = parse(key, value)?,
            "batch_size" => self.training.batch_size = parse(key, value)?,
            "epochs" => self.training.max_epochs = parse(key, value)?,
            "adam_beta1" => self.training.beta1 = parse(key, value)?,
            "adam_beta2" => self.training.beta2 = parse(key, value)?,
            "adam_epsilon" => self.training.epsilon = parse(key, value)?,
            "attacks" => self.attacks = parse_list(key, value)?,
            "epsilons" => self.epsilons = parse_list(key, value)?,
            "pgd_steps" => self.pgd_steps = parse(key, value)?,
            "pgd_step_size" => self.pgd_step_size = parse(key, value)?,
            "pgd_random_start" => self.pgd_random_start = parse_bool(key, value)?,
            "deepfool_steps" => self.deepfool_steps = parse(key, value)?,
            "deepfool_overshoot" => self.deepfool_overshoot = parse(key, value)?,
            "hybrid_gradient" => {
                self.hybrid_gradient = match value {
                    "adjoint" => HybridGradient::Adjoint,
                    "finite-difference" => HybridGradient::FiniteDifference,
                    _ => {
                        return Err(BenchError::Config(format!(
                            "hybrid_gradient = {value}: expected adjoint or finite-difference"
                        )))
                    }
                }
            }
            "fd_step" => self.fd_step = parse(key, value)?,
            "attack_limit" => self.attack_limit = parse(key, value)?,
            "cache_dir" => self.cache_dir = path(value),
            _ => return Err(BenchError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        let alphas = self.physics.local_modulation.len();
        if alphas == 0 {
            return bad("alpha needs at least one value".into());
        }
        for &n in &self.atom_sweep {
            if alphas > 1 && alphas < n {
                return bad(format!("alpha lists {alphas} values but N = {n}"));
            }
            if let Err(e) = self.reservoir_for(n).validate() {
                return bad(e.to_string());
            }
        }
        if let Some(&eps) = self
            .epsilons
            .iter()
            .find(|e| !(e.is_finite() && **e >= 0.0))
        {
            return bad(format!("epsilon {eps} must be finite and non-negative"));
        }
        if let Err(e) = self.training_for(0).validate() {
            return bad(e.to_string());
        }
        if !(0.0..1.0).contains(&self.training.dropout_rate) {
            return bad(format!(
                "dropout {} must lie in [0, 1)",
                self.training.dropout_rate
            ));
        }
        if self.downsample_size == 0
            || self.patch_width == 0
            || self.downsample_size % self.patch_width != 0
        {
            return bad(format!(
                "patch_width {} must divide downsample_size {}",
                self.patch_width, self.downsample_size
            ));
        }
        match self.retained {
            RetainedDim::Fixed(0) => return bad("delta must be at least 1".into()),
            RetainedDim::Variance(p) if !(p > 0.0 && p <= 1.0) => {
                return bad(format!("variance threshold {p} must lie in (0, 1]"))
            }
            _ => {}
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return bad(format!("fd_step {} must be positive", self.fd_step));
        }
        if !(self.pgd_step_size > 0.0) || !(self.deepfool_overshoot >= 0.0) {
            return bad(
                "pgd_step_size must be positive and deepfool_overshoot non-negative".into(),
            );
        }
        for digest in [&self.images_sha256, &self.labels_sha256]
            .into_iter()
            .flatten()
        {
            if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
                return bad(format!("`{digest}` is not a SHA-256 hex digest"));
            }
        }
        Ok(())
    }

    pub fn reservoir_for(&self, n_atoms: usize) -> ReservoirConfig {
        let p = &self.physics;
        let local_modulation = match p.local_modulation.as_slice() {
            [a] => vec![*a; n_atoms],
            many => many.iter().copied().take(n_atoms).collect(),
        };
        ReservoirConfig {
            n_atoms,
            lattice_spacing: p.lattice_spacing,
            c6_coefficient: angular_mhz(p.c6),
            rabi_frequency: angular_mhz(p.rabi_frequency),
            detuning_min: angular_mhz(p.detuning_min),
            detuning_max: angular_mhz(p.detuning_max),
            local_modulation,
            total_time: p.total_time,
            num_snapshots: p.num_snapshots,
            initial_state: p.initial_state,
        }
    }

    pub fn encoding_for(&self, n_atoms: usize) -> EncodingConfig {
        EncodingConfig {
            downsample_size: self.downsample_size,
            patch_width: self.patch_width,
            selection: match self.retained {
                RetainedDim::Atoms => ComponentSelection::Fixed(n_atoms),
                RetainedDim::Fixed(d) => ComponentSelection::Fixed(d),
                RetainedDim::Variance(p) => ComponentSelection::VarianceThreshold(p),
            },
        }
    }

    /// Readout settings with seeds derived from the master seed. Both models
    /// of one sweep entry share them.
    pub fn training_for(&self, n_atoms: usize) -> TrainConfig {
        let base = self.seed.wrapping_add(n_atoms as u64);
        TrainConfig {
            init_seed: derive_seed(base, SeedRole::MlpInit),
            shuffle_seed: derive_seed(base, SeedRole::Shuffle),
            ..self.training.clone()
        }
    }

    pub fn subset_seed(&self) -> u64 {
        derive_seed(self.seed, SeedRole::Subset)
    }

    pub fn attack_spec(&self, family: AttackFamily, n_atoms: usize) -> AttackSpec {
        AttackSpec {
            steps: match family {
                AttackFamily::DeepFool => self.deepfool_steps,
                _ => self.pgd_steps,
            },
            step_size: self.pgd_step_size,
            random_start: self.pgd_random_start,
            overshoot: self.deepfool_overshoot,
            seed: derive_seed(self.seed.wrapping_add(n_atoms as u64), SeedRole::Attack),
        }
    }

    pub fn gradient_path(&self, reservoir: &ReservoirConfig) -> GradientPath {
        match self.hybrid_gradient {
            HybridGradient::Adjoint => GradientPath::Adjoint,
            HybridGradient::FiniteDifference => {
                let range = reservoir.detuning_range();
                GradientPath::FiniteDifference {
                    step: self.fd_step * if range > 0.0 { range } else { 1.0 },
                }
            }
        }
    }

    /// Every key with its normalized value, in a fixed order.
    pub fn canonical_pairs(&self) -> Vec<(&'static str, String)> {
        let r = &self.physics;
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let names: Vec<&str> = self.attacks.iter().map(|a| a.name()).collect();
        vec![
            ("dataset", self.dataset.name.clone()),
            ("images", path(&self.images)),
            ("labels", path(&self.labels)),
            (
                "images_sha256",
                self.images_sha256.clone().unwrap_or_default(),
            ),
            (
                "labels_sha256",
                self.labels_sha256.clone().unwrap_or_default(),
            ),
            ("per_class", self.dataset.per_class.to_string()),
            ("train_fraction", self.dataset.train_fraction.to_string()),
            ("seed", self.seed.to_string()),
            ("N", join(&self.atom_sweep)),
            ("d", r.lattice_spacing.to_string()),
            ("C6", r.c6.to_string()),
            ("Omega", r.rabi_frequency.to_string()),
            ("Delta_min", r.detuning_min.to_string()),
            ("Delta_max", r.detuning_max.to_string()),
            ("alpha", join(&r.local_modulation)),
            ("T", r.total_time.to_string()),
            ("M", r.num_snapshots.to_string()),
            (
                "psi0",
                match r.initial_state {
                    InitialState::Plus => "plus",
                    InitialState::Ground => "ground",
                }
                .into(),
            ),
            ("downsample_size", self.downsample_size.to_string()),
            ("patch_width", self.patch_width.to_string()),
            (
                "delta",
                match self.retained {
                    RetainedDim::Atoms => "atoms".into(),
                    RetainedDim::Fixed(d) => d.to_string(),
                    RetainedDim::Variance(p) => format!("variance:{p}"),
                },
            ),
            ("hidden", join(&self.training.hidden)),
            ("dropout", self.training.dropout_rate.to_string()),
            ("learning_rate", self.training.learning_rate.to_string()),
            ("batch_size", self.training.batch_size.to_string()),
            ("epochs", self.training.max_epochs.to_string()),
            ("adam_beta1", self.training.beta1.to_string()),
            ("adam_beta2", self.training.beta2.to_string()),
            ("adam_epsilon", self.training.epsilon.to_string()),
            ("attacks", names.join(",")),
            ("epsilons", join(&self.epsilons)),
            ("pgd_steps", self.pgd_steps.to_string()),
            ("pgd_step_size", self.pgd_step_size.to_string()),
            ("pgd_random_start", self.pgd_random_start.to_string()),
            ("deepfool_steps", self.deepfool_steps.to_string()),
            ("deepfool_overshoot", self.deepfool_overshoot.to_string()),
            (
                "hybrid_gradient",
                match self.hybrid_gradient {
                    HybridGradient::Adjoint => "adjoint",
                    HybridGradient::FiniteDifference => "finite-difference",
                }
                .into(),
            ),
            ("fd_step", self.fd_step.to_string()),
            ("attack_limit", self.attack_limit.to_string()),
            ("cache_dir", path(&self.cache_dir)),
        ]
    }

    /// The configuration as it is echoed into reports: everything except
    /// where inputs and caches live.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.canonical_pairs()
            .into_iter()
            .filter(|(k, _)| !LOCATION_KEYS.contains(k))
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    /// SHA-256 over the echoed configuration, one `key = value` line per key.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.echo() {
            h.update(format!("{k} = {v}\n"));
        }
        hex::encode(h.finalize())
    }

    pub fn to_text(&self) -> String {
        self.canonical_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
