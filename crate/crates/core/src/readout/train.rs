use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, QrcError, Result};
use crate::readout::mlp::{argmax, Gradients, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds weight initialization.
    pub init_seed: u64,
    /// Seeds the per-epoch shuffles and dropout masks.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            dropout_rate: 1e-3,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 500,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_seed: 0,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0 && self.epsilon > 0.0;
        let betas = (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2);
        if !positive || !betas || self.batch_size == 0 {
            return Err(QrcError::Config(format!(
                "invalid training hyperparameters: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, config: &TrainConfig) -> Self {
        Self {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let params = mlp
            .layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()));
        let gs = grads
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()));
        for (((p, g), m), v) in params.zip(gs).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch, dropout active.
    pub loss: f64,
    /// Eval-mode accuracy on the training set after the epoch.
    pub accuracy: f64,
}

/// Sample order independent of how the caller listed the data: by label,
/// then by feature bit patterns.
fn canonical_order(features: &[Vec<f64>], labels: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..features.len()).collect();
    idx.sort_by(|&a, &b| {
        labels[a].cmp(&labels[b]).then_with(|| {
            features[a]
                .iter()
                .zip(&features[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    idx
}

/// Fresh network with the configured architecture, trained on the data.
pub fn train(
    features: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    config: &TrainConfig,
) -> Result<(Mlp, Vec<EpochMetrics>)> {
    let dim = features
        .first()
        .map(Vec::len)
        .ok_or_else(|| QrcError::InvalidInput("empty training set".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
    let mut mlp = Mlp::new(
        dim,
        &config.hidden,
        num_classes,
        config.dropout_rate,
        &mut rng,
    )?;
    let history = fit(&mut mlp, features, labels, config)?;
    Ok((mlp, history))
}

/// Minibatch Adam for `max_epochs` epochs. The visiting order in epoch e is
/// a shuffle of the canonical sample order drawn from stream 2e of the
/// shuffle seed; dropout masks come from stream 2e + 1.
pub fn fit(
    mlp: &mut Mlp,
    features: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    config.validate()?;
    check_len("training labels", features.len(), labels.len())?;
    if features.is_empty() {
        return Err(QrcError::InvalidInput("empty training set".into()));
    }
    let order = canonical_order(features, labels);
    let mut adam = Adam::new(mlp.num_params(), config);
    let mut history = Vec::with_capacity(config.max_epochs);
    for epoch in 0..config.max_epochs {
        let mut shuffle = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
        shuffle.set_stream(2 * epoch as u64);
        let mut dropout = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
        dropout.set_stream(2 * epoch as u64 + 1);
        let mut visit = order.clone();
        visit.shuffle(&mut shuffle);

        let mut total = 0.0;
        for (b, batch) in visit.chunks(config.batch_size).enumerate() {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| features[i].as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = mlp.loss_and_grads(&xs, &ys, Some(&mut dropout))?;
            if !loss.is_finite() {
                return Err(QrcError::Numerical(format!(
                    "non-finite training loss {loss} at epoch {epoch}, batch {b}"
                )));
            }
            adam.step(mlp, &grads);
            if !mlp.is_finite() {
                return Err(QrcError::Numerical(format!(
                    "non-finite parameters after epoch {epoch}, batch {b}"
                )));
            }
            total += loss * batch.len() as f64;
        }
        let correct = features
            .iter()
            .zip(labels)
            .map(|(x, &y)| Ok((argmax(&mlp.forward(x)?) == y) as usize))
            .sum::<Result<usize>>()?;
        let metrics = EpochMetrics {
            epoch,
            loss: total / features.len() as f64,
            accuracy: correct as f64 / features.len() as f64,
        };
        log::debug!(
            "epoch {epoch}: loss {:.6} acc {:.4}",
            metrics.loss,
            metrics.accuracy
        );
        history.push(metrics);
    }
    Ok(history)
}

/// Eval-mode accuracy on a labelled set.
pub fn accuracy(mlp: &Mlp, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    check_len("evaluation labels", features.len(), labels.len())?;
    if features.is_empty() {
        return Ok(0.0);
    }
    let correct = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| Ok((mlp.predict(x)? == y) as usize))
        .sum::<Result<usize>>()?;
    Ok(correct as f64 / features.len() as f64)
}
