use nalgebra::DMatrix;

use crate::error::{check_len, QrcError, Result};

/// Square grayscale image with values in [0, 1], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    size: usize,
    pixels: Vec<f64>,
}

impl ImageTensor {
    pub fn new(size: usize, pixels: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(QrcError::InvalidInput("image size must be positive".into()));
        }
        check_len("image pixels", size * size, pixels.len())?;
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(QrcError::InvalidInput(format!(
                "pixel value {p} outside [0, 1]"
            )));
        }
        Ok(Self { size, pixels })
    }

    pub fn from_u8(size: usize, raw: &[u8]) -> Result<Self> {
        Self::new(size, raw.iter().map(|&b| b as f64 / 255.0).collect())
    }

    pub fn constant(size: usize, value: f64) -> Result<Self> {
        Self::new(size, vec![value; size * size])
    }

    /// Side length L.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.size + col]
    }
}

/// Row weights of area interpolation from `source` to `target` samples,
/// as a target × source matrix. Output cell k averages the source interval
/// [k·L/S, (k+1)·L/S) with weights proportional to overlap.
pub fn area_weights(source: usize, target: usize) -> Result<DMatrix<f64>> {
    if target == 0 || target > source {
        return Err(QrcError::InvalidInput(format!(
            "downsample target {target} must lie in 1..={source}"
        )));
    }
    let scale = source as f64 / target as f64;
    let mut w = DMatrix::zeros(target, source);
    if source % target == 0 {
        let block = source / target;
        for k in 0..target {
            for j in k * block..(k + 1) * block {
                w[(k, j)] = 1.0 / block as f64;
            }
        }
        return Ok(w);
    }
    for k in 0..target {
        let lo = k as f64 * scale;
        let hi = (k + 1) as f64 * scale;
        for j in lo.floor() as usize..(hi.ceil() as usize).min(source) {
            let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
            w[(k, j)] = overlap / scale;
        }
    }
    Ok(w)
}

/// Area-interpolation downsample to `target` × `target`.
///
/// The map is I ↦ W·I·Wᵀ with W from [`area_weights`].
pub fn downsample(image: &ImageTensor, target: usize) -> Result<ImageTensor> {
    let w = area_weights(image.size, target)?;
    Ok(apply_area_weights(&w, image))
}

pub(crate) fn apply_area_weights(w: &DMatrix<f64>, image: &ImageTensor) -> ImageTensor {
    let l = image.size;
    let src = DMatrix::from_row_slice(l, l, &image.pixels);
    let out = w * src * w.transpose();
    let target = w.nrows();
    let mut pixels = Vec::with_capacity(target * target);
    for r in 0..target {
        for c in 0..target {
            pixels.push(out[(r, c)].clamp(0.0, 1.0));
        }
    }
    ImageTensor {
        size: target,
        pixels,
    }
}
