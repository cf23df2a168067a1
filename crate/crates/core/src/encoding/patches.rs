use crate::encoding::image::ImageTensor;
use crate::error::{QrcError, Result};

/// Non-overlapping P × P blocks of an S × S image, in row-major block order,
/// each flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patches: Vec<Vec<f64>>,
    pub source_size: usize,
    pub patch_width: usize,
}

impl PatchSet {
    /// κ = (S/P)².
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn grid(&self) -> usize {
        self.source_size / self.patch_width
    }

    /// Inverse of [`extract_patches`].
    pub fn reconstruct(&self) -> Result<ImageTensor> {
        let (s, p, g) = (self.source_size, self.patch_width, self.grid());
        let mut pixels = vec![0.0; s * s];
        for (v, patch) in self.patches.iter().enumerate() {
            let (pr, pc) = (v / g, v % g);
            for a in 0..p {
                let row = (pr * p + a) * s + pc * p;
                pixels[row..row + p].copy_from_slice(&patch[a * p..(a + 1) * p]);
            }
        }
        ImageTensor::new(s, pixels)
    }
}

pub fn extract_patches(image: &ImageTensor, patch_width: usize) -> Result<PatchSet> {
    let s = image.size();
    if patch_width == 0 || s % patch_width != 0 {
        return Err(QrcError::InvalidInput(format!(
            "image size {s} is not divisible by patch width {patch_width}"
        )));
    }
    let p = patch_width;
    let g = s / p;
    let px = image.pixels();
    let patches = (0..g * g)
        .map(|v| {
            let (pr, pc) = (v / g, v % g);
            (0..p)
                .flat_map(|a| {
                    let row = (pr * p + a) * s + pc * p;
                    px[row..row + p].iter().copied()
                })
                .collect()
        })
        .collect();
    Ok(PatchSet {
        patches,
        source_size: s,
        patch_width: p,
    })
}
