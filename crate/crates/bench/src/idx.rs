//! IDX image/label files, optionally gzip-compressed.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use thiserror::Error;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{path}: bad IDX magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error(
        "{path}: truncated IDX payload, header promises {expected} bytes but {actual} are present"
    )]
    Truncated {
        path: String,
        expected: usize,
        actual: usize,
    },
    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Images as raw bytes (row-major) with one label per image.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Pixel values of image `k` scaled to [0, 1].
    pub fn scaled(&self, k: usize) -> Vec<f64> {
        self.pixels[k].iter().map(|&b| b as f64 / 255.0).collect()
    }
}

/// Reads a file, transparently inflating gzip input.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io_err = |source| IdxError::Io {
        path: path.display().to_string(),
        source,
    };
    let raw = fs::read(path).map_err(io_err)?;
    inflate(raw, path)
}

/// Inflates gzip bytes; anything else is returned unchanged.
pub fn inflate(raw: Vec<u8>, path: &Path) -> Result<Vec<u8>, IdxError> {
    if !raw.starts_with(&[0x1f, 0x8b]) {
        return Ok(raw);
    }
    let mut out = Vec::new();
    GzDecoder::new(raw.as_slice())
        .read_to_end(&mut out)
        .map_err(|source| IdxError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(out)
}

fn header(
    bytes: &[u8],
    path: &str,
    expected_magic: u32,
    dims: usize,
) -> Result<Vec<usize>, IdxError> {
    let need = 4 + 4 * dims;
    if bytes.len() < need {
        return Err(IdxError::Truncated {
            path: path.into(),
            expected: need,
            actual: bytes.len(),
        });
    }
    let word = |k: usize| u32::from_be_bytes(bytes[4 * k..4 * k + 4].try_into().expect("4 bytes"));
    let magic = word(0);
    if magic != expected_magic {
        return Err(IdxError::BadMagic {
            path: path.into(),
            found: magic,
            expected: expected_magic,
        });
    }
    Ok((1..=dims).map(|k| word(k) as usize).collect())
}

fn payload<'a>(
    bytes: &'a [u8],
    path: &str,
    offset: usize,
    len: usize,
) -> Result<&'a [u8], IdxError> {
    let expected = offset + len;
    if bytes.len() < expected {
        return Err(IdxError::Truncated {
            path: path.into(),
            expected,
            actual: bytes.len(),
        });
    }
    Ok(&bytes[offset..expected])
}

/// Parses an image file (`0x00000803`, count × rows × cols) and its label
/// file (`0x00000801`).
pub fn parse_idx(
    image_bytes: &[u8],
    label_bytes: &[u8],
    image_path: &str,
    label_path: &str,
) -> Result<LabeledImages, IdxError> {
    let dims = header(image_bytes, image_path, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let size = rows * cols;
    let px = payload(image_bytes, image_path, 16, count * size)?;
    let n_labels = header(label_bytes, label_path, LABELS_MAGIC, 1)?[0];
    let labels = payload(label_bytes, label_path, 8, n_labels)?.to_vec();
    if n_labels != count {
        return Err(IdxError::CountMismatch {
            images: count,
            labels: n_labels,
        });
    }
    let pixels = if size == 0 {
        vec![Vec::new(); count]
    } else {
        px.chunks_exact(size).map(<[u8]>::to_vec).collect()
    };
    Ok(LabeledImages {
        rows,
        cols,
        pixels,
        labels,
    })
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledImages, IdxError> {
    parse_idx(
        &read_maybe_gz(images)?,
        &read_maybe_gz(labels)?,
        &images.display().to_string(),
        &labels.display().to_string(),
    )
}
