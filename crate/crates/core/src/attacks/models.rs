use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::attacks::Classifier;
use crate::encoding::{area_weights, downsample, EncodingPipeline, ImageTensor};
use crate::error::Result;
use crate::readout::{GradientTarget, Mlp};

/// How pixel gradients of the hybrid model cross the reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GradientPath {
    /// Reverse-mode through the Chebyshev propagator: about three
    /// evolutions per patch regardless of how many cotangents are pulled back.
    Adjoint,
    /// Central differences on the detunings with this step: 2N evolutions
    /// per patch.
    FiniteDifference { step: f64 },
}

fn image(size: usize, x: &[f64]) -> Result<ImageTensor> {
    ImageTensor::new(size, x.to_vec())
}

fn transpose_apply(jac: &DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    (0..jac.ncols())
        .map(|k| jac.column(k).iter().zip(g).map(|(a, b)| a * b).sum())
        .collect()
}

/// Reservoir embedding followed by the readout, attacked in pixel space.
pub struct HybridModel<'a> {
    pub pipeline: &'a EncodingPipeline,
    pub mlp: &'a Mlp,
    pub path: GradientPath,
}

impl Classifier for HybridModel<'_> {
    fn num_classes(&self) -> usize {
        self.mlp.num_classes()
    }

    fn input_dim(&self) -> usize {
        self.pipeline.image_size().pow(2)
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let img = image(self.pipeline.image_size(), x)?;
        self.mlp.forward(&self.pipeline.embed_image(&img)?)
    }

    fn loss_gradient(&self, x: &[f64], label: usize) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let img = image(self.pipeline.image_size(), x)?;
        match self.path {
            GradientPath::Adjoint => {
                let tape = self.pipeline.record(&img)?;
                let (logits, loss, g) = self
                    .mlp
                    .input_gradient_with_logits(tape.embedding(), GradientTarget::Loss(label))?;
                Ok((logits, loss, tape.vjp(&g)?))
            }
            GradientPath::FiniteDifference { step } => {
                let emb = self.pipeline.embed_image(&img)?;
                let (logits, loss, g) = self
                    .mlp
                    .input_gradient_with_logits(&emb, GradientTarget::Loss(label))?;
                let jac = self.pipeline.pipeline_jacobian(&img, step)?;
                Ok((logits, loss, transpose_apply(&jac, &g)))
            }
        }
    }

    fn logit_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let img = image(self.pipeline.image_size(), x)?;
        match self.path {
            GradientPath::Adjoint => {
                let tape = self.pipeline.record(&img)?;
                let (logits, rows) = self.mlp.logit_jacobian(tape.embedding())?;
                let grads = rows
                    .iter()
                    .map(|r| tape.vjp(r))
                    .collect::<Result<Vec<_>>>()?;
                Ok((logits, grads))
            }
            GradientPath::FiniteDifference { step } => {
                let emb = self.pipeline.embed_image(&img)?;
                let (logits, rows) = self.mlp.logit_jacobian(&emb)?;
                let jac = self.pipeline.pipeline_jacobian(&img, step)?;
                Ok((
                    logits,
                    rows.iter().map(|r| transpose_apply(&jac, r)).collect(),
                ))
            }
        }
    }
}

/// Patch-averaged PCA features followed by the readout: the classical
/// baseline, attacked in pixel space.
pub struct ClassicalModel<'a> {
    pub pipeline: &'a EncodingPipeline,
    pub mlp: &'a Mlp,
}

impl Classifier for ClassicalModel<'_> {
    fn num_classes(&self) -> usize {
        self.mlp.num_classes()
    }

    fn input_dim(&self) -> usize {
        self.pipeline.image_size().pow(2)
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let img = image(self.pipeline.image_size(), x)?;
        self.mlp.forward(&self.pipeline.classical_features(&img)?)
    }

    fn loss_gradient(&self, x: &[f64], label: usize) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let img = image(self.pipeline.image_size(), x)?;
        let z = self.pipeline.classical_features(&img)?;
        let (logits, loss, g) = self
            .mlp
            .input_gradient_with_logits(&z, GradientTarget::Loss(label))?;
        Ok((logits, loss, self.pipeline.classical_vjp(&g)?))
    }

    fn logit_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let img = image(self.pipeline.image_size(), x)?;
        let z = self.pipeline.classical_features(&img)?;
        let (logits, rows) = self.mlp.logit_jacobian(&z)?;
        let grads = rows
            .iter()
            .map(|r| self.pipeline.classical_vjp(r))
            .collect::<Result<Vec<_>>>()?;
        Ok((logits, grads))
    }
}

/// Area-downsampled pixels fed straight into the readout.
pub struct RawPixelModel<'a> {
    pub mlp: &'a Mlp,
    image_size: usize,
    target: usize,
    area: DMatrix<f64>,
}

impl<'a> RawPixelModel<'a> {
    pub fn new(mlp: &'a Mlp, image_size: usize, target: usize) -> Result<Self> {
        Ok(Self {
            mlp,
            image_size,
            target,
            area: area_weights(image_size, target)?,
        })
    }

    pub fn features(&self, img: &ImageTensor) -> Result<Vec<f64>> {
        Ok(downsample(img, self.target)?.into_pixels())
    }

    /// Wᵀ·G·W for a cotangent G on the downsampled image.
    fn pullback(&self, g: &[f64]) -> Vec<f64> {
        let gm = DMatrix::from_row_slice(self.target, self.target, g);
        let full = self.area.transpose() * gm * &self.area;
        let l = self.image_size;
        (0..l * l).map(|k| full[(k / l, k % l)]).collect()
    }
}

impl Classifier for RawPixelModel<'_> {
    fn num_classes(&self) -> usize {
        self.mlp.num_classes()
    }

    fn input_dim(&self) -> usize {
        self.image_size * self.image_size
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.mlp
            .forward(&self.features(&image(self.image_size, x)?)?)
    }

    fn loss_gradient(&self, x: &[f64], label: usize) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let z = self.features(&image(self.image_size, x)?)?;
        let (logits, loss, g) = self
            .mlp
            .input_gradient_with_logits(&z, GradientTarget::Loss(label))?;
        Ok((logits, loss, self.pullback(&g)))
    }

    fn logit_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let z = self.features(&image(self.image_size, x)?)?;
        let (logits, rows) = self.mlp.logit_jacobian(&z)?;
        Ok((logits, rows.iter().map(|r| self.pullback(r)).collect()))
    }
}

/// The readout alone, attacked directly on its input features.
pub struct EmbeddingModel<'a> {
    pub mlp: &'a Mlp,
    pub bounds: (f64, f64),
}

impl Classifier for EmbeddingModel<'_> {
    fn num_classes(&self) -> usize {
        self.mlp.num_classes()
    }

    fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    fn input_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.mlp.forward(x)
    }

    fn loss_gradient(&self, x: &[f64], label: usize) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        self.mlp
            .input_gradient_with_logits(x, GradientTarget::Loss(label))
    }

    fn logit_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.mlp.logit_jacobian(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::ComponentSelection;
    use crate::encoding::EncodingConfig;
    use crate::reservoir::{default_jacobian_step, ReservoirConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (EncodingPipeline, Mlp, Vec<ImageTensor>) {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let imgs: Vec<ImageTensor> = (0..20)
            .map(|_| {
                ImageTensor::new(6, (0..36).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
            })
            .collect();
        let enc = EncodingConfig {
            downsample_size: 4,
            patch_width: 2,
            selection: ComponentSelection::Fixed(2),
        };
        let mut cfg = ReservoirConfig::uniform(2);
        cfg.num_snapshots = 3;
        let pipe = EncodingPipeline::fit(&imgs, enc, cfg).unwrap();
        let mlp = Mlp::new(pipe.embedding_dim(), &[6, 5], 3, 0.0, &mut rng).unwrap();
        (pipe, mlp, imgs)
    }

    #[test]
    fn adjoint_and_finite_difference_paths_agree() {
        let (pipe, mlp, imgs) = setup();
        let step = default_jacobian_step(&pipe.reservoir);
        let adj = HybridModel {
            pipeline: &pipe,
            mlp: &mlp,
            path: GradientPath::Adjoint,
        };
        let fd = HybridModel {
            pipeline: &pipe,
            mlp: &mlp,
            path: GradientPath::FiniteDifference { step },
        };
        let x = imgs[3].pixels();
        let (la, lossa, ga) = adj.loss_gradient(x, 1).unwrap();
        let (lf, lossf, gf) = fd.loss_gradient(x, 1).unwrap();
        assert!((lossa - lossf).abs() < 1e-12);
        for (a, b) in la.iter().zip(&lf) {
            assert!((a - b).abs() < 1e-12);
        }
        let scale = gf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in ga.iter().zip(&gf) {
            assert!((a - b).abs() < 1e-5 * scale);
        }
        let (_, ja) = adj.logit_jacobian(x).unwrap();
        let (_, jf) = fd.logit_jacobian(x).unwrap();
        for (ra, rf) in ja.iter().zip(&jf) {
            for (a, b) in ra.iter().zip(rf) {
                assert!((a - b).abs() < 1e-5 * scale.max(1e-3));
            }
        }
    }

    #[test]
    fn classical_and_raw_gradients_match_finite_differences() {
        let (pipe, mlp_h, imgs) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mlp_c = Mlp::new(pipe.feature_dim(), &[6, 5], 3, 0.0, &mut rng).unwrap();
        let mlp_r = Mlp::new(16, &[6, 5], 3, 0.0, &mut rng).unwrap();
        let raw = RawPixelModel::new(&mlp_r, 6, 4).unwrap();
        let classical = ClassicalModel {
            pipeline: &pipe,
            mlp: &mlp_c,
        };
        let _ = mlp_h;
        let models: [&dyn Classifier; 2] = [&classical, &raw];
        for model in models {
            let x = imgs[5].pixels().to_vec();
            let (_, _, g) = model.loss_gradient(&x, 2).unwrap();
            let h = 1e-6;
            for k in (0..36).step_by(5) {
                let mut up = x.clone();
                let mut dn = x.clone();
                up[k] = (up[k] + h).min(1.0);
                dn[k] = (dn[k] - h).max(0.0);
                let fd = (model.loss_gradient(&up, 2).unwrap().1
                    - model.loss_gradient(&dn, 2).unwrap().1)
                    / (up[k] - dn[k]);
                assert!(
                    (fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()),
                    "{k}: {fd} vs {}",
                    g[k]
                );
            }
        }
    }
}
