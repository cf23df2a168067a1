//! Stage orchestration. Each stage reads its inputs from and writes its
//! outputs to a run directory, so the individual CLI subcommands and the
//! full sweep share one code path. Layout:
//!
//! ```text
//! run/split.json
//! run/N{n}/pipeline.json, pca.qrcpca                 embed
//! run/N{n}/{train,test}_{qrc,mlp}.qrcemb             embed
//! run/N{n}/{qrc,mlp}.qrcmlp, training.json           train
//! run/N{n}/curves.json, adversarial/                 attack
//! run/report.json, run/report.csv                    report
//! ```
//!
//! Per-sample work is parallel, but results are always gathered in sample
//! order, so every artifact is independent of the thread count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rydberg_qrc::attacks::{attack_sweep, AttackFamily, ClassicalModel, Classifier, HybridModel};
use rydberg_qrc::container::{
    load_checkpoint, load_matrix, pca_from_matrix, pca_to_matrix, save_checkpoint, save_matrix,
    StoredMatrix, ADVERSARIAL_MAGIC, EMBEDDING_MAGIC, PCA_MAGIC,
};
use rydberg_qrc::encoding::{DetuningMap, EncodingConfig, EncodingPipeline, ImageTensor};
use rydberg_qrc::readout::{accuracy, train, EpochMetrics, Mlp};
use rydberg_qrc::reservoir::ReservoirConfig;
use rydberg_qrc::QrcError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::EmbeddingCache;
use crate::config::{ExperimentConfig, HybridGradient};
use crate::dataset::{balanced_subset, Split};
use crate::error::{BenchError, StageExt};
use crate::idx::{inflate, parse_idx, LabeledImages};
use crate::report::{summarize, CleanAccuracy, Curve, RobustnessReport, RunMetadata, SweepEntry};
use crate::report::{CLASSICAL_MODEL, HYBRID_MODEL};

/// A verified dataset with the digests of the files it came from.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub source: LabeledImages,
    pub images_sha256: String,
    pub labels_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>, BenchError> {
    std::fs::read(path).map_err(|e| BenchError::io(path, e))
}

/// Loads the configured IDX pair and checks the recorded checksums, which
/// cover the files as stored (compressed or not).
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, BenchError> {
    let (Some(images), Some(labels)) = (&cfg.images, &cfg.labels) else {
        return Err(BenchError::Config(
            "`images` and `labels` paths are required".into(),
        ));
    };
    let image_raw = read(images)?;
    let label_raw = read(labels)?;
    let images_sha256 = sha256_hex(&image_raw);
    let labels_sha256 = sha256_hex(&label_raw);
    for (path, expected, actual) in [
        (images, &cfg.images_sha256, &images_sha256),
        (labels, &cfg.labels_sha256, &labels_sha256),
    ] {
        if let Some(expected) = expected {
            if expected != actual {
                return Err(BenchError::Data(format!(
                    "{}: SHA-256 {actual} does not match the configured {expected}",
                    path.display()
                )));
            }
        }
    }
    let source = parse_idx(
        &inflate(image_raw, images)?,
        &inflate(label_raw, labels)?,
        &images.display().to_string(),
        &labels.display().to_string(),
    )?;
    Ok(Dataset {
        source,
        images_sha256,
        labels_sha256,
    })
}

/// The balanced subset as images in [0, 1].
#[derive(Debug, Clone)]
pub struct SplitData {
    pub indices: Split,
    pub num_classes: usize,
    pub train: Vec<ImageTensor>,
    pub train_labels: Vec<usize>,
    pub test: Vec<ImageTensor>,
    pub test_labels: Vec<usize>,
}

pub fn split_dataset(cfg: &ExperimentConfig, data: &Dataset) -> Result<SplitData, BenchError> {
    let src = &data.source;
    if src.rows != src.cols || src.rows == 0 {
        return Err(BenchError::Data(format!(
            "images must be square, got {}×{}",
            src.rows, src.cols
        )));
    }
    let indices = balanced_subset(&src.labels, &cfg.dataset, cfg.subset_seed())?;
    if indices.test.is_empty() {
        return Err(BenchError::Config(format!(
            "per_class = {} with train_fraction = {} leaves no test samples",
            cfg.dataset.per_class, cfg.dataset.train_fraction
        )));
    }
    let tensors = |ids: &[usize]| -> Result<Vec<ImageTensor>, BenchError> {
        ids.iter()
            .map(|&k| ImageTensor::new(src.rows, src.scaled(k)))
            .collect::<Result<_, QrcError>>()
            .stage("load")
    };
    let labels = |ids: &[usize]| ids.iter().map(|&k| src.labels[k] as usize).collect();
    Ok(SplitData {
        num_classes: src
            .labels
            .iter()
            .map(|&l| l as usize + 1)
            .max()
            .unwrap_or(0),
        train: tensors(&indices.train)?,
        train_labels: labels(&indices.train),
        test: tensors(&indices.test)?,
        test_labels: labels(&indices.test),
        indices,
    })
}

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn atoms(&self, n: usize) -> PathBuf {
        self.root.join(format!("N{n}"))
    }

    fn file(&self, n: usize, name: &str) -> PathBuf {
        self.atoms(n).join(name)
    }

    fn ensure(&self, n: usize) -> Result<(), BenchError> {
        let dir = self.atoms(n);
        std::fs::create_dir_all(&dir).map_err(|e| BenchError::io(&dir, e))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))
}

/// Everything but the PCA basis needed to rebuild a fitted pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PipelineRecord {
    image_size: usize,
    encoding: EncodingConfig,
    reservoir: ReservoirConfig,
    detuning: DetuningMap,
}

fn save_pipeline(run: &RunDir, n: usize, p: &EncodingPipeline) -> Result<(), BenchError> {
    let record = PipelineRecord {
        image_size: p.image_size(),
        encoding: p.encoding.clone(),
        reservoir: p.reservoir.clone(),
        detuning: p.detuning.clone(),
    };
    write_json(&run.file(n, "pipeline.json"), &record)?;
    save_matrix(
        &run.file(n, "pca.qrcpca"),
        PCA_MAGIC,
        &pca_to_matrix(&p.pca),
    )
    .stage("embed")
}

pub fn load_pipeline(run: &RunDir, n: usize) -> Result<EncodingPipeline, BenchError> {
    let record: PipelineRecord = read_json(&run.file(n, "pipeline.json"))?;
    let pca = load_matrix(&run.file(n, "pca.qrcpca"), PCA_MAGIC)
        .and_then(|m| pca_from_matrix(&m))
        .stage("load pipeline")?;
    EncodingPipeline::from_parts(
        record.encoding,
        record.reservoir,
        record.image_size,
        pca,
        record.detuning,
    )
    .stage("load pipeline")
}

fn rows_matrix(rows: &[Vec<f64>], cols: usize) -> Result<StoredMatrix, BenchError> {
    if rows.is_empty() {
        return Ok(StoredMatrix {
            rows: 0,
            cols,
            values: Vec::new(),
        });
    }
    StoredMatrix::from_rows(rows).stage("store")
}

fn map_images<F>(
    images: &[ImageTensor],
    stage: &'static str,
    f: F,
) -> Result<Vec<Vec<f64>>, BenchError>
where
    F: Fn(&ImageTensor) -> Result<Vec<f64>, QrcError> + Sync + Send,
{
    images
        .par_iter()
        .map(f)
        .collect::<Result<Vec<_>, _>>()
        .stage(stage)
}

const EMBEDDING_FILES: [(&str, &str); 2] = [(HYBRID_MODEL, "qrc"), (CLASSICAL_MODEL, "mlp")];

/// Fits the encoding on the training images and writes hybrid and
/// classical features for both splits.
pub fn embed_stage(
    cfg: &ExperimentConfig,
    data: &Dataset,
    split: &SplitData,
    n: usize,
    run: &RunDir,
    cache: &EmbeddingCache,
) -> Result<EncodingPipeline, BenchError> {
    run.ensure(n)?;
    let started = Instant::now();
    let pipeline = EncodingPipeline::fit(&split.train, cfg.encoding_for(n), cfg.reservoir_for(n))
        .stage("embed")?;
    save_pipeline(run, n, &pipeline)?;
    let identity = serde_json::to_vec(&PipelineRecord {
        image_size: pipeline.image_size(),
        encoding: pipeline.encoding.clone(),
        reservoir: pipeline.reservoir.clone(),
        detuning: pipeline.detuning.clone(),
    })
    .expect("record serializes");
    let basis: Vec<u8> = pca_to_matrix(&pipeline.pca)
        .values
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    for (name, images, ids) in [
        ("train", &split.train, &split.indices.train),
        ("test", &split.test, &split.indices.test),
    ] {
        let ids_bytes: Vec<u8> = ids.iter().flat_map(|&k| (k as u64).to_le_bytes()).collect();
        let key = EmbeddingCache::key(&[
            b"reservoir-embedding",
            &identity,
            &basis,
            data.images_sha256.as_bytes(),
            &ids_bytes,
        ]);
        let hybrid = cache.get_or_compute(&key, images.len(), || {
            map_images(images, "embed", |img| pipeline.embed_image(img))
        })?;
        let classical = map_images(images, "embed", |img| pipeline.classical_features(img))?;
        for ((_, tag), rows, cols) in [
            (EMBEDDING_FILES[0], &hybrid, pipeline.embedding_dim()),
            (EMBEDDING_FILES[1], &classical, pipeline.feature_dim()),
        ] {
            let path = run.file(n, &format!("{name}_{tag}.qrcemb"));
            save_matrix(&path, EMBEDDING_MAGIC, &rows_matrix(rows, cols)?).stage("embed")?;
        }
    }
    log::info!(
        "N={n}: embedded {} + {} images (δ={}, D={}) in {:.1?}",
        split.train.len(),
        split.test.len(),
        pipeline.pca.retained_dim(),
        pipeline.embedding_dim(),
        started.elapsed()
    );
    Ok(pipeline)
}

fn load_features(
    run: &RunDir,
    n: usize,
    split: &str,
    tag: &str,
) -> Result<Vec<Vec<f64>>, BenchError> {
    let path = run.file(n, &format!("{split}_{tag}.qrcemb"));
    Ok(load_matrix(&path, EMBEDDING_MAGIC)
        .stage("load features")?
        .to_rows())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub clean: Vec<CleanAccuracy>,
    pub history: BTreeMap<String, Vec<EpochMetrics>>,
}

/// Trains the hybrid and the classical readout with identical seeds.
pub fn train_stage(
    cfg: &ExperimentConfig,
    split: &SplitData,
    n: usize,
    run: &RunDir,
) -> Result<TrainingSummary, BenchError> {
    let train_cfg = cfg.training_for(n);
    let mut summary = TrainingSummary {
        clean: Vec::new(),
        history: BTreeMap::new(),
    };
    for (model, tag) in EMBEDDING_FILES {
        let started = Instant::now();
        let x_train = load_features(run, n, "train", tag)?;
        let x_test = load_features(run, n, "test", tag)?;
        if x_train.len() != split.train_labels.len() || x_test.len() != split.test_labels.len() {
            return Err(BenchError::Data(format!(
                "N={n}: stored {tag} features do not match the current split; rerun embed"
            )));
        }
        let (mlp, history) =
            train(&x_train, &split.train_labels, split.num_classes, &train_cfg).stage("train")?;
        save_checkpoint(&run.file(n, &format!("{tag}.qrcmlp")), &mlp, &train_cfg).stage("train")?;
        let clean = CleanAccuracy {
            model: model.to_string(),
            train_accuracy: accuracy(&mlp, &x_train, &split.train_labels).stage("train")?,
            test_accuracy: accuracy(&mlp, &x_test, &split.test_labels).stage("train")?,
            final_loss: history.last().map_or(f64::NAN, |m| m.loss),
        };
        log::info!(
            "N={n}: {model} trained in {:.1?}, train {:.4} test {:.4}",
            started.elapsed(),
            clean.train_accuracy,
            clean.test_accuracy
        );
        summary.clean.push(clean);
        summary.history.insert(model.to_string(), history);
    }
    write_json(&run.file(n, "training.json"), &summary)?;
    Ok(summary)
}

/// Test-set positions to attack: all of them, or `limit` evenly spaced ones
/// so that every class stays represented.
pub fn attack_indices(len: usize, limit: usize) -> Vec<usize> {
    if limit == 0 || limit >= len {
        (0..len).collect()
    } else {
        (0..limit).map(|k| k * len / limit).collect()
    }
}

/// Adversarial examples of one (model, attack) pair, described next to the
/// container holding them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversarialIndex {
    pub model: String,
    pub attack: String,
    pub epsilons: Vec<f64>,
    /// Dataset index of each attacked sample; row s·|ε| + e of the container
    /// is sample s at budget ε_e.
    pub samples: Vec<usize>,
    pub labels: Vec<usize>,
    pub correct: Vec<Vec<bool>>,
}

struct SampleOutcome {
    correct: Vec<bool>,
    adversarial: Option<Vec<Vec<f64>>>,
}

fn attack_model(
    model: &(dyn Classifier + Sync),
    family: AttackFamily,
    cfg: &ExperimentConfig,
    n: usize,
    split: &SplitData,
    positions: &[usize],
    keep: bool,
) -> Result<Vec<SampleOutcome>, QrcError> {
    let base = cfg.attack_spec(family, n);
    positions
        .par_iter()
        .map(|&k| {
            let mut spec = base.clone();
            spec.seed = base.seed.wrapping_add(k as u64);
            let label = split.test_labels[k];
            let advs = attack_sweep(
                model,
                family,
                split.test[k].pixels(),
                label,
                &spec,
                &cfg.epsilons,
            )?;
            let correct = advs
                .iter()
                .map(|a| Ok(model.predict(a)? == label))
                .collect::<Result<Vec<_>, QrcError>>()?;
            Ok(SampleOutcome {
                correct,
                adversarial: keep.then_some(advs),
            })
        })
        .collect()
}

fn dump_adversarial(
    run: &RunDir,
    n: usize,
    index: &AdversarialIndex,
    outcomes: &[SampleOutcome],
) -> Result<(), BenchError> {
    let dir = run.atoms(n).join("adversarial");
    std::fs::create_dir_all(&dir).map_err(|e| BenchError::io(&dir, e))?;
    let rows: Vec<Vec<f64>> = outcomes
        .iter()
        .flat_map(|o| o.adversarial.clone().unwrap_or_default())
        .collect();
    let cols = rows.first().map_or(0, Vec::len);
    let stem = format!("{}_{}", index.model.replace('+', "_"), index.attack);
    save_matrix(
        &dir.join(format!("{stem}.qrcadv")),
        ADVERSARIAL_MAGIC,
        &rows_matrix(&rows, cols)?,
    )
    .stage("attack")?;
    write_json(&dir.join(format!("{stem}.json")), index)
}

/// Runs every configured attack against both models over the ε grid and
/// writes the accuracy curves.
pub fn attack_stage(
    cfg: &ExperimentConfig,
    split: &SplitData,
    n: usize,
    run: &RunDir,
    dump: bool,
) -> Result<SweepEntry, BenchError> {
    let pipeline = load_pipeline(run, n)?;
    let summary: TrainingSummary = read_json(&run.file(n, "training.json"))?;
    let load = |tag: &str| -> Result<Mlp, BenchError> {
        Ok(load_checkpoint(&run.file(n, &format!("{tag}.qrcmlp")))
            .stage("load checkpoint")?
            .0)
    };
    let (qrc, mlp) = (load("qrc")?, load("mlp")?);
    let hybrid = HybridModel {
        pipeline: &pipeline,
        mlp: &qrc,
        path: cfg.gradient_path(&pipeline.reservoir),
    };
    let classical = ClassicalModel {
        pipeline: &pipeline,
        mlp: &mlp,
    };
    let positions = attack_indices(split.test.len(), cfg.attack_limit);
    let models: [(&str, &(dyn Classifier + Sync)); 2] =
        [(HYBRID_MODEL, &hybrid), (CLASSICAL_MODEL, &classical)];
    let mut curves = Vec::new();
    for &family in &cfg.attacks {
        for (name, model) in models {
            let started = Instant::now();
            let outcomes =
                attack_model(model, family, cfg, n, split, &positions, dump).stage("attack")?;
            let accuracy: Vec<f64> = (0..cfg.epsilons.len())
                .map(|e| {
                    outcomes.iter().filter(|o| o.correct[e]).count() as f64 / positions.len() as f64
                })
                .collect();
            log::info!(
                "N={n}: {} on {name} over {} samples in {:.1?}: {:?}",
                family.name(),
                positions.len(),
                started.elapsed(),
                accuracy
            );
            if dump {
                let index = AdversarialIndex {
                    model: name.to_string(),
                    attack: family.name().to_string(),
                    epsilons: cfg.epsilons.clone(),
                    samples: positions.iter().map(|&k| split.indices.test[k]).collect(),
                    labels: positions.iter().map(|&k| split.test_labels[k]).collect(),
                    correct: outcomes.iter().map(|o| o.correct.clone()).collect(),
                };
                dump_adversarial(run, n, &index, &outcomes)?;
            }
            curves.push(Curve {
                model: name.to_string(),
                attack: family.name().to_string(),
                accuracy,
            });
        }
    }
    let mut entry = SweepEntry {
        n_atoms: n,
        retained_dim: pipeline.pca.retained_dim(),
        explained_variance: pipeline.pca.explained_variance(),
        embedding_dim: pipeline.embedding_dim(),
        clean: summary.clean,
        attacked_samples: positions.len(),
        curves,
        delta_acc: Vec::new(),
    };
    summarize(&mut entry);
    write_json(&run.file(n, "curves.json"), &entry)?;
    Ok(entry)
}

/// Gathers the per-N results of a run into a report and writes it.
pub fn report_stage(
    cfg: &ExperimentConfig,
    data: &Dataset,
    split: &SplitData,
    run: &RunDir,
) -> Result<RobustnessReport, BenchError> {
    let entries = cfg
        .atom_sweep
        .iter()
        .map(|&n| read_json(&run.file(n, "curves.json")))
        .collect::<Result<Vec<SweepEntry>, _>>()?;
    let report = RobustnessReport {
        dataset: cfg.dataset.name.clone(),
        config_hash: cfg.hash(),
        config: cfg.echo(),
        images_sha256: data.images_sha256.clone(),
        labels_sha256: data.labels_sha256.clone(),
        epsilons: cfg.epsilons.clone(),
        metadata: RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            train_samples: split.train.len(),
            test_samples: split.test.len(),
            num_classes: split.num_classes,
            hybrid_gradient: match cfg.hybrid_gradient {
                HybridGradient::Adjoint => "adjoint".into(),
                HybridGradient::FiniteDifference => "finite-difference".into(),
            },
        },
        entries,
    };
    report.emit(run.root())?;
    Ok(report)
}

/// Loads the data and writes the chosen split into the run directory.
pub fn prepare(cfg: &ExperimentConfig, run: &RunDir) -> Result<(Dataset, SplitData), BenchError> {
    let data = load_dataset(cfg)?;
    let split = split_dataset(cfg, &data)?;
    std::fs::create_dir_all(run.root()).map_err(|e| BenchError::io(run.root(), e))?;
    write_json(&run.root().join("split.json"), &split.indices)?;
    Ok((data, split))
}

pub fn default_cache(cfg: &ExperimentConfig, run: &RunDir) -> EmbeddingCache {
    EmbeddingCache::locate(cfg.cache_dir.as_deref(), &run.root().join("cache"))
}

/// The full experiment: embed, train and attack for every atom count, then
/// report. Finished atom counts stay on disk if a later one fails.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    run: &RunDir,
    dump: bool,
) -> Result<RobustnessReport, BenchError> {
    let (data, split) = prepare(cfg, run)?;
    let cache = default_cache(cfg, run);
    for &n in &cfg.atom_sweep {
        embed_stage(cfg, &data, &split, n, run, &cache)?;
        train_stage(cfg, &split, n, run)?;
        attack_stage(cfg, &split, n, run, dump)?;
    }
    report_stage(cfg, &data, &split, run)
}
