use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::encoding::detuning::DetuningMap;
use crate::encoding::image::{apply_area_weights, area_weights, ImageTensor};
use crate::encoding::patches::{extract_patches, PatchSet};
use crate::encoding::pca::{fit_pca, ComponentSelection, PcaModel};
use crate::error::{check_len, QrcError, Result};
use crate::reservoir::{reservoir_embed, reservoir_jacobian, ReservoirConfig, ReservoirTape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// S, side length after area downsampling.
    pub downsample_size: usize,
    /// P, patch side length; S must be a multiple of P.
    pub patch_width: usize,
    pub selection: ComponentSelection,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            downsample_size: 16,
            patch_width: 16,
            selection: ComponentSelection::Fixed(8),
        }
    }
}

impl EncodingConfig {
    /// Defaults with δ equal to the number of atoms.
    pub fn for_atoms(n_atoms: usize) -> Self {
        Self {
            selection: ComponentSelection::Fixed(n_atoms),
            ..Self::default()
        }
    }
}

/// Fitted image → feature pipeline: downsample, patches, PCA, detuning map
/// and, for the hybrid model, the reservoir with patch averaging.
#[derive(Debug, Clone)]
pub struct EncodingPipeline {
    pub encoding: EncodingConfig,
    pub reservoir: ReservoirConfig,
    pub pca: PcaModel,
    pub detuning: DetuningMap,
    image_size: usize,
    area: DMatrix<f64>,
}

impl EncodingPipeline {
    /// Fits PCA and the detuning map on the pooled patches of `train`.
    pub fn fit(
        train: &[ImageTensor],
        encoding: EncodingConfig,
        reservoir: ReservoirConfig,
    ) -> Result<Self> {
        reservoir.validate()?;
        let image_size = train
            .first()
            .map(ImageTensor::size)
            .ok_or_else(|| QrcError::InvalidInput("empty training set".into()))?;
        if let ComponentSelection::Fixed(d) = encoding.selection {
            check_delta(d, &reservoir)?;
        }
        let area = area_weights(image_size, encoding.downsample_size)?;
        let mut pooled = Vec::new();
        for img in train {
            check_len("training image size", image_size, img.size())?;
            let small = apply_area_weights(&area, img);
            pooled.extend(extract_patches(&small, encoding.patch_width)?.patches);
        }
        let pca = fit_pca(&pooled, encoding.selection)?;
        check_delta(pca.retained_dim(), &reservoir)?;
        let features = pooled
            .iter()
            .map(|p| pca.project(p))
            .collect::<Result<Vec<_>>>()?;
        let detuning = DetuningMap::fit(&features, &reservoir)?;
        Ok(Self {
            encoding,
            reservoir,
            pca,
            detuning,
            image_size,
            area,
        })
    }

    /// Reassembles a pipeline from persisted parts.
    pub fn from_parts(
        encoding: EncodingConfig,
        reservoir: ReservoirConfig,
        image_size: usize,
        pca: PcaModel,
        detuning: DetuningMap,
    ) -> Result<Self> {
        reservoir.validate()?;
        check_delta(pca.retained_dim(), &reservoir)?;
        check_len(
            "pca input dimension",
            encoding.patch_width * encoding.patch_width,
            pca.input_dim(),
        )?;
        check_len("detuning map dimension", pca.retained_dim(), detuning.dim())?;
        let area = area_weights(image_size, encoding.downsample_size)?;
        Ok(Self {
            encoding,
            reservoir,
            pca,
            detuning,
            image_size,
            area,
        })
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    /// κ.
    pub fn num_patches(&self) -> usize {
        let g = self.encoding.downsample_size / self.encoding.patch_width;
        g * g
    }

    /// δ.
    pub fn feature_dim(&self) -> usize {
        self.pca.retained_dim()
    }

    /// D = M(N + N(N−1)/2).
    pub fn embedding_dim(&self) -> usize {
        self.reservoir.embedding_dim()
    }

    pub fn patches(&self, image: &ImageTensor) -> Result<PatchSet> {
        check_len("image size", self.image_size, image.size())?;
        extract_patches(
            &apply_area_weights(&self.area, image),
            self.encoding.patch_width,
        )
    }

    /// Per-patch PCA features, κ vectors of length δ.
    pub fn features(&self, image: &ImageTensor) -> Result<Vec<Vec<f64>>> {
        self.patches(image)?
            .patches
            .iter()
            .map(|p| self.pca.project(p))
            .collect()
    }

    /// Per-patch detuning vectors of length N; atoms past δ get Δ_min.
    pub fn detunings(&self, image: &ImageTensor) -> Result<Vec<Vec<f64>>> {
        self.features(image)?
            .iter()
            .map(|f| {
                let mut d = self.detuning.map(f)?;
                d.resize(self.reservoir.n_atoms, self.reservoir.detuning_min);
                Ok(d)
            })
            .collect()
    }

    pub fn patch_embeddings(&self, image: &ImageTensor) -> Result<Vec<Vec<f64>>> {
        self.detunings(image)?
            .iter()
            .map(|d| Ok(reservoir_embed(&self.reservoir, d)?.into_values()))
            .collect()
    }

    /// Φ_I, the mean of the per-patch reservoir embeddings.
    pub fn embed_image(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        Ok(mean_rows(
            &self.patch_embeddings(image)?,
            self.embedding_dim(),
        ))
    }

    /// Patch-averaged PCA features, the input of the classical baseline.
    pub fn classical_features(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        Ok(mean_rows(&self.features(image)?, self.feature_dim()))
    }

    /// Pixel-space gradient of gᵀ·[`Self::classical_features`]. The map is
    /// affine, so the result does not depend on the image.
    pub fn classical_vjp(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        let q = self.pca.pullback(cotangent)?;
        let kappa = self.num_patches() as f64;
        let mut out = vec![0.0; self.image_size * self.image_size];
        for v in 0..self.num_patches() {
            self.accumulate_patch_pullback(v, &q, 1.0 / kappa, &mut out);
        }
        Ok(out)
    }

    /// ∂Φ_I/∂I, a D × L² matrix, using the central-difference reservoir
    /// Jacobian with the given step. Costs 2Nκ reservoir evolutions.
    pub fn pipeline_jacobian(&self, image: &ImageTensor, step: f64) -> Result<DMatrix<f64>> {
        let features = self.features(image)?;
        let l2 = self.image_size * self.image_size;
        let kappa = self.num_patches() as f64;
        let delta = self.feature_dim();
        let mut jac = DMatrix::zeros(self.embedding_dim(), l2);
        for (v, f) in features.iter().enumerate() {
            let mut det = self.detuning.map(f)?;
            det.resize(self.reservoir.n_atoms, self.reservoir.detuning_min);
            let slopes = self.detuning.slopes(f)?;
            let res = reservoir_jacobian(&self.reservoir, &det, step)?;
            // rows of ∂Δ/∂I for the encoded atoms
            for i in 0..delta {
                if slopes[i] == 0.0 {
                    continue;
                }
                let mut unit = vec![0.0; delta];
                unit[i] = slopes[i];
                let q = self.pca.pullback(&unit)?;
                let mut row = vec![0.0; l2];
                self.accumulate_patch_pullback(v, &q, 1.0 / kappa, &mut row);
                for d in 0..self.embedding_dim() {
                    let r = res[(d, i)];
                    if r != 0.0 {
                        for (k, &g) in row.iter().enumerate() {
                            jac[(d, k)] += r * g;
                        }
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Forward pass recording what [`PipelineTape::vjp`] needs.
    pub fn record<'a>(&'a self, image: &ImageTensor) -> Result<PipelineTape<'a>> {
        let features = self.features(image)?;
        let kappa = self.num_patches() as f64;
        let mut embedding = vec![0.0; self.embedding_dim()];
        let mut patches = Vec::with_capacity(features.len());
        for f in &features {
            let mut det = self.detuning.map(f)?;
            det.resize(self.reservoir.n_atoms, self.reservoir.detuning_min);
            let tape = ReservoirTape::record(&self.reservoir, &det)?;
            for (e, x) in embedding.iter_mut().zip(tape.embedding().values()) {
                *e += x;
            }
            patches.push((tape, self.detuning.slopes(f)?));
        }
        for e in &mut embedding {
            *e /= kappa;
        }
        Ok(PipelineTape {
            pipeline: self,
            patches,
            embedding,
        })
    }

    /// Φ_I together with the pixel gradients gᵀ·∂Φ_I/∂I for every cotangent
    /// g, by adjoint differentiation through the reservoir.
    pub fn pipeline_vjp(
        &self,
        image: &ImageTensor,
        cotangents: &[Vec<f64>],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let tape = self.record(image)?;
        let grads = cotangents
            .iter()
            .map(|g| tape.vjp(g))
            .collect::<Result<Vec<_>>>()?;
        Ok((tape.embedding, grads))
    }

    /// out += scale · Aᵀ·Q·B where Q is the P × P patch cotangent and A, B
    /// are the downsampling rows feeding patch `v`.
    fn accumulate_patch_pullback(&self, v: usize, patch_cot: &[f64], scale: f64, out: &mut [f64]) {
        let p = self.encoding.patch_width;
        let g = self.encoding.downsample_size / p;
        let (pr, pc) = (v / g, v % g);
        let a = self.area.rows(pr * p, p);
        let b = self.area.rows(pc * p, p);
        let q = DMatrix::from_row_slice(p, p, patch_cot);
        let pix = a.transpose() * q * b;
        let l = self.image_size;
        for x in 0..l {
            for y in 0..l {
                out[x * l + y] += scale * pix[(x, y)];
            }
        }
    }
}

/// Recorded forward pass of [`EncodingPipeline::embed_image`].
pub struct PipelineTape<'a> {
    pipeline: &'a EncodingPipeline,
    patches: Vec<(ReservoirTape<'a>, Vec<f64>)>,
    embedding: Vec<f64>,
}

impl PipelineTape<'_> {
    /// Φ_I.
    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    /// Pixel gradient gᵀ·∂Φ_I/∂I.
    pub fn vjp(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        let pipe = self.pipeline;
        let l2 = pipe.image_size * pipe.image_size;
        let kappa = pipe.num_patches() as f64;
        let mut grad = vec![0.0; l2];
        for (v, (tape, slopes)) in self.patches.iter().enumerate() {
            let dg = tape.vjp(cotangent)?;
            let scaled: Vec<f64> = slopes.iter().zip(&dg).map(|(s, d)| s * d).collect();
            let q = pipe.pca.pullback(&scaled)?;
            pipe.accumulate_patch_pullback(v, &q, 1.0 / kappa, &mut grad);
        }
        Ok(grad)
    }
}

fn check_delta(delta: usize, reservoir: &ReservoirConfig) -> Result<()> {
    if delta > reservoir.n_atoms {
        return Err(QrcError::Config(format!(
            "retained dimension {delta} exceeds the {} available atoms",
            reservoir.n_atoms
        )));
    }
    Ok(())
}

fn mean_rows(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for r in rows {
        for (o, x) in out.iter_mut().zip(r) {
            *o += x;
        }
    }
    let k = rows.len() as f64;
    for o in &mut out {
        *o /= k;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_images(n: usize, l: usize, seed: u64) -> Vec<ImageTensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                ImageTensor::new(l, (0..l * l).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
            })
            .collect()
    }

    fn small_pipeline(
        n_atoms: usize,
        s: usize,
        p: usize,
        delta: usize,
    ) -> (EncodingPipeline, Vec<ImageTensor>) {
        let imgs = random_images(30, 8, 4);
        let enc = EncodingConfig {
            downsample_size: s,
            patch_width: p,
            selection: ComponentSelection::Fixed(delta),
        };
        let mut cfg = ReservoirConfig::uniform(n_atoms);
        cfg.num_snapshots = 3;
        (EncodingPipeline::fit(&imgs, enc, cfg).unwrap(), imgs)
    }

    #[test]
    fn patch_average_commutes() {
        let (pipe, imgs) = small_pipeline(3, 4, 2, 3);
        let per = pipe.patch_embeddings(&imgs[0]).unwrap();
        assert_eq!(per.len(), 4);
        let mean = mean_rows(&per, pipe.embedding_dim());
        assert_eq!(mean, pipe.embed_image(&imgs[0]).unwrap());
    }

    #[test]
    fn training_extremes_reach_detuning_bounds() {
        let (pipe, imgs) = small_pipeline(3, 4, 2, 3);
        let all: Vec<f64> = imgs
            .iter()
            .flat_map(|im| pipe.detunings(im).unwrap().into_iter().flatten())
            .collect();
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, pipe.reservoir.detuning_min);
        assert_eq!(hi, pipe.reservoir.detuning_max);
    }

    #[test]
    fn unused_atoms_receive_minimum_detuning() {
        let (pipe, imgs) = small_pipeline(4, 4, 2, 2);
        for d in pipe.detunings(&imgs[1]).unwrap() {
            assert_eq!(d[2..], [pipe.reservoir.detuning_min; 2]);
        }
    }

    #[test]
    fn delta_above_atom_count_is_rejected() {
        let imgs = random_images(10, 4, 1);
        let enc = EncodingConfig {
            downsample_size: 4,
            patch_width: 4,
            selection: ComponentSelection::Fixed(3),
        };
        assert!(matches!(
            EncodingPipeline::fit(&imgs, enc, ReservoirConfig::uniform(2)),
            Err(QrcError::Config(_))
        ));
    }

    #[test]
    fn classical_vjp_matches_dense_linear_map() {
        let (pipe, imgs) = small_pipeline(3, 6, 3, 3);
        let l2 = 64;
        let g = [0.3, -1.0, 0.7];
        let vjp = pipe.classical_vjp(&g).unwrap();
        let base = pipe.classical_features(&imgs[0]).unwrap();
        // affine map: the finite difference is exact up to rounding
        let h = 1e-3;
        for k in (0..l2).step_by(7) {
            let mut px = imgs[0].pixels().to_vec();
            px[k] += if px[k] > 0.5 { -h } else { h };
            let sign = if imgs[0].pixels()[k] > 0.5 { -1.0 } else { 1.0 };
            let moved = pipe
                .classical_features(&ImageTensor::new(8, px).unwrap())
                .unwrap();
            let fd: f64 = moved
                .iter()
                .zip(&base)
                .zip(&g)
                .map(|((m, b), gi)| (m - b) * gi)
                .sum::<f64>()
                / (sign * h);
            assert!((fd - vjp[k]).abs() < 1e-8, "{k}: {fd} vs {}", vjp[k]);
        }
    }

    #[test]
    fn adjoint_vjp_matches_finite_difference_jacobian() {
        let (pipe, imgs) = small_pipeline(3, 4, 2, 3);
        let img = &imgs[2];
        let step = crate::reservoir::default_jacobian_step(&pipe.reservoir);
        let jac = pipe.pipeline_jacobian(img, step).unwrap();
        let d = pipe.embedding_dim();
        let g: Vec<f64> = (0..d).map(|k| (k as f64 * 0.37).sin()).collect();
        let (emb, grads) = pipe.pipeline_vjp(img, &[g.clone()]).unwrap();
        let direct = pipe.embed_image(img).unwrap();
        for (a, b) in emb.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
        let scale = grads[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..64 {
            let fd: f64 = (0..d).map(|r| g[r] * jac[(r, k)]).sum();
            assert!(
                (fd - grads[0][k]).abs() < 1e-5 * scale,
                "{k}: {fd} vs {}",
                grads[0][k]
            );
        }
    }
}
