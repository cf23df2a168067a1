//! Fully connected ReLU network with inverted dropout and a softmax
//! cross-entropy head.
//!
//! Batches are stored column-wise: an `input_dim × B` matrix holds one sample
//! per column.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::error::{check_len, QrcError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// out × in.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: DMatrix::zeros(output, input),
            bias: DVector::zeros(output),
        }
    }

    fn affine(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train,
}

/// What [`Mlp::input_gradient`] differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientTarget {
    /// Cross-entropy loss against this label.
    Loss(usize),
    /// A single logit.
    Logit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub dropout_rate: f64,
}

/// Parameter gradients, shaped like [`Mlp::layers`].
pub type Gradients = Vec<Layer>;

struct Trace {
    /// Input to each layer.
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<DMatrix<f64>>,
    /// Dropout scale of each hidden layer (0 or 1/(1−p)), if applied.
    masks: Vec<Option<DMatrix<f64>>>,
    logits: DMatrix<f64>,
}

impl Mlp {
    /// Layers `input → hidden… → classes` with He-uniform weights
    /// U(±√(6/fan_in)) and zero biases.
    pub fn new<R: Rng>(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        dropout_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut mlp = Self::zeros(input_dim, hidden, classes, dropout_rate)?;
        for layer in &mut mlp.layers {
            let bound = (6.0 / layer.weights.ncols() as f64).sqrt();
            for w in layer.weights.iter_mut() {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        dropout_rate: f64,
    ) -> Result<Self> {
        if input_dim == 0 || classes < 2 || hidden.contains(&0) {
            return Err(QrcError::Config(format!(
                "invalid network shape {input_dim} → {hidden:?} → {classes}"
            )));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(QrcError::Config(format!(
                "dropout rate {dropout_rate} must lie in [0, 1)"
            )));
        }
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        Ok(Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            dropout_rate,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.nrows())
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Parameters flattened layer by layer: weights (column-major), then bias.
    pub fn params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        check_len("mlp parameters", self.num_params(), values.len())?;
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = values[k];
                k += 1;
            }
        }
        Ok(())
    }

    fn batch_matrix(&self, inputs: &[&[f64]]) -> Result<DMatrix<f64>> {
        if inputs.is_empty() {
            return Err(QrcError::InvalidInput("empty batch".into()));
        }
        let d = self.input_dim();
        let mut x = DMatrix::zeros(d, inputs.len());
        for (j, row) in inputs.iter().enumerate() {
            check_len("mlp input", d, row.len())?;
            x.column_mut(j).copy_from_slice(row);
        }
        Ok(x)
    }

    fn run(&self, x: DMatrix<f64>, mut dropout: Option<&mut dyn RngCore>) -> Trace {
        let hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden);
        let mut masks = Vec::with_capacity(hidden);
        let mut a = x;
        for layer in &self.layers[..hidden] {
            let z = layer.affine(&a);
            let mut h = z.map(|v| v.max(0.0));
            let mask = match dropout.as_deref_mut() {
                Some(rng) if self.dropout_rate > 0.0 => {
                    let keep = 1.0 / (1.0 - self.dropout_rate);
                    let m = DMatrix::from_fn(h.nrows(), h.ncols(), |_, _| {
                        if rng.gen::<f64>() < self.dropout_rate {
                            0.0
                        } else {
                            keep
                        }
                    });
                    h.component_mul_assign(&m);
                    Some(m)
                }
                _ => None,
            };
            inputs.push(a);
            pre.push(z);
            masks.push(mask);
            a = h;
        }
        let logits = self.layers[hidden].affine(&a);
        inputs.push(a);
        Trace {
            inputs,
            pre,
            masks,
            logits,
        }
    }

    /// Eval-mode logits for one sample.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = self.batch_matrix(&[input])?;
        Ok(self.run(x, None).logits.column(0).iter().copied().collect())
    }

    /// Logits for one sample; train mode draws dropout masks from `rng`.
    pub fn forward_mode(
        &self,
        input: &[f64],
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        let x = self.batch_matrix(&[input])?;
        let trace = match mode {
            Mode::Eval => self.run(x, None),
            Mode::Train => self.run(x, Some(rng)),
        };
        Ok(trace.logits.column(0).iter().copied().collect())
    }

    /// Eval-mode predicted class (lowest index on ties).
    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(input)?))
    }

    /// Mean cross-entropy over the batch and its parameter gradients.
    /// Dropout is applied when `dropout` is given.
    pub fn loss_and_grads(
        &self,
        inputs: &[&[f64]],
        labels: &[usize],
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<(f64, Gradients)> {
        check_len("batch labels", inputs.len(), labels.len())?;
        let c = self.num_classes();
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(QrcError::InvalidInput(format!(
                "label {bad} out of range for {c} classes"
            )));
        }
        let x = self.batch_matrix(inputs)?;
        let trace = self.run(x, dropout);
        let b = inputs.len() as f64;
        let mut delta = DMatrix::zeros(c, inputs.len());
        let mut loss = 0.0;
        for (j, &y) in labels.iter().enumerate() {
            let logits: Vec<f64> = trace.logits.column(j).iter().copied().collect();
            let (lse, probs) = log_softmax_parts(&logits);
            loss += lse - logits[y];
            for k in 0..c {
                delta[(k, j)] = (probs[k] - if k == y { 1.0 } else { 0.0 }) / b;
            }
        }
        let grads = self.backward(&trace, delta, true).1;
        Ok((loss / b, grads))
    }

    /// Backpropagates `delta` (∂/∂logits, classes × B). Returns the input
    /// cotangent and, if requested, the parameter gradients.
    fn backward(
        &self,
        trace: &Trace,
        mut delta: DMatrix<f64>,
        params: bool,
    ) -> (DMatrix<f64>, Gradients) {
        let n = self.layers.len();
        let mut grads = Vec::new();
        for li in (0..n).rev() {
            let layer = &self.layers[li];
            if params {
                let gw = &delta * trace.inputs[li].transpose();
                let gb = DVector::from_iterator(delta.nrows(), delta.row_iter().map(|r| r.sum()));
                grads.push(Layer {
                    weights: gw,
                    bias: gb,
                });
            }
            let mut up = layer.weights.tr_mul(&delta);
            if li > 0 {
                // a single-sample trace is broadcast over several cotangents
                let h = li - 1;
                let pre = &trace.pre[h];
                for (j, mut col) in up.column_iter_mut().enumerate() {
                    let s = j % pre.ncols();
                    for (r, g) in col.iter_mut().enumerate() {
                        if pre[(r, s)] <= 0.0 {
                            *g = 0.0;
                        } else if let Some(m) = &trace.masks[h] {
                            *g *= m[(r, s)];
                        }
                    }
                }
            }
            delta = up;
        }
        grads.reverse();
        (delta, grads)
    }

    /// Eval-mode gradient of the target with respect to the input.
    pub fn input_gradient(&self, input: &[f64], target: GradientTarget) -> Result<Vec<f64>> {
        let (_, _, g) = self.input_gradient_with_logits(input, target)?;
        Ok(g)
    }

    /// Like [`Mlp::input_gradient`] but also returns the logits and the
    /// target value (loss or logit).
    pub fn input_gradient_with_logits(
        &self,
        input: &[f64],
        target: GradientTarget,
    ) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let c = self.num_classes();
        let x = self.batch_matrix(&[input])?;
        let trace = self.run(x, None);
        let logits: Vec<f64> = trace.logits.column(0).iter().copied().collect();
        let mut delta = DMatrix::zeros(c, 1);
        let value = match target {
            GradientTarget::Loss(y) | GradientTarget::Logit(y) if y >= c => {
                return Err(QrcError::InvalidInput(format!(
                    "class {y} out of range for {c} classes"
                )));
            }
            GradientTarget::Loss(y) => {
                let (lse, probs) = log_softmax_parts(&logits);
                for k in 0..c {
                    delta[(k, 0)] = probs[k] - if k == y { 1.0 } else { 0.0 };
                }
                lse - logits[y]
            }
            GradientTarget::Logit(k) => {
                delta[(k, 0)] = 1.0;
                logits[k]
            }
        };
        let (g, _) = self.backward(&trace, delta, false);
        Ok((logits, value, g.column(0).iter().copied().collect()))
    }

    /// Eval-mode logits and the C × D logit Jacobian (one row per class).
    pub fn logit_jacobian(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let c = self.num_classes();
        let x = self.batch_matrix(&[input])?;
        let trace = self.run(x, None);
        let logits: Vec<f64> = trace.logits.column(0).iter().copied().collect();
        let (g, _) = self.backward(&trace, DMatrix::identity(c, c), false);
        // g is D × C: column k is ∂f_k/∂x
        Ok((
            logits,
            g.column_iter()
                .map(|col| col.iter().copied().collect())
                .collect(),
        ))
    }
}

pub(crate) fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect()
}

/// (log Σ e^{zₖ}, softmax(z)).
fn log_softmax_parts(logits: &[f64]) -> (f64, Vec<f64>) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    (m + s.ln(), exps.iter().map(|e| e / s).collect())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax_parts(logits).1
}

/// Cross-entropy of one sample, −log softmax(z)_y.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_softmax_parts(logits).0 - logits[label]
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}
