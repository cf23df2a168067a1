//! Binary containers for embeddings, PCA models, adversarial sets and MLP
//! checkpoints.
//!
//! Matrix layout: 8-byte magic, rows and cols as u32 LE, rows × cols f64 LE
//! values row-major, then the CRC-32 (IEEE) of the value bytes as u32 LE.
//!
//! Checkpoint layout: magic, u32 layer count, (u32 out, u32 in) per layer,
//! f64 dropout rate, the parameters in [`Mlp::params`] order, u32 length of a
//! JSON training-config echo and the echo itself, then the CRC-32 of every
//! byte between the magic and the checksum.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::encoding::PcaModel;
use crate::error::{QrcError, Result};
use crate::readout::{Mlp, TrainConfig};

pub type Magic = [u8; 8];

pub const EMBEDDING_MAGIC: &Magic = b"QRCEMB1\0";
pub const PCA_MAGIC: &Magic = b"QRCPCA1\0";
pub const ADVERSARIAL_MAGIC: &Magic = b"QRCADV1\0";
pub const CHECKPOINT_MAGIC: &Magic = b"QRCMLP1\0";

/// Row-major f64 matrix as stored in a container.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl StoredMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(QrcError::InvalidInput("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values: rows.concat(),
        })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| QrcError::Format(format!("{what} {v} does not fit in u32")))
}

pub fn write_matrix<W: Write>(mut out: W, magic: &Magic, m: &StoredMatrix) -> Result<()> {
    if m.values.len() != m.rows * m.cols {
        return Err(QrcError::InvalidInput(
            "matrix shape does not match its data".into(),
        ));
    }
    out.write_all(magic)?;
    out.write_all(&to_u32(m.rows, "row count")?.to_le_bytes())?;
    out.write_all(&to_u32(m.cols, "column count")?.to_le_bytes())?;
    let mut payload = Vec::with_capacity(8 * m.values.len());
    for v in &m.values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&payload)?;
    out.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| QrcError::Format(format!("truncated container while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| QrcError::Format(format!("{what} too large")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(QrcError::Format(format!(
                "{} trailing bytes after container",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn check_magic(cur: &mut Cursor<'_>, magic: &Magic) -> Result<()> {
    let found = cur.take(8, "magic")?;
    if found != magic {
        return Err(QrcError::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(found),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut input: R, magic: &Magic) -> Result<StoredMatrix> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    check_magic(&mut cur, magic)?;
    let rows = cur.u32("row count")?;
    let cols = cur.u32("column count")?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| QrcError::Format("matrix dimensions overflow".into()))?;
    let start = cur.pos;
    let values = cur.f64s(n, "matrix values")?;
    let crc = crc32fast::hash(&bytes[start..cur.pos]);
    let stored = cur.u32("checksum")? as u32;
    cur.finish()?;
    if crc != stored {
        return Err(QrcError::Format(format!(
            "checksum mismatch: stored {stored:08x}, computed {crc:08x}"
        )));
    }
    Ok(StoredMatrix { rows, cols, values })
}

pub fn save_matrix(path: &Path, magic: &Magic, m: &StoredMatrix) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix(&mut buf, magic, m)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_matrix(path: &Path, magic: &Magic) -> Result<StoredMatrix> {
    read_matrix(fs::File::open(path)?, magic)
}

/// PCA model as a (3 + δ) × P² matrix: mean, eigenvalues, a metadata row
/// whose first entry is the variance threshold (NaN when δ was explicit),
/// then one row per principal component.
pub fn pca_to_matrix(model: &PcaModel) -> StoredMatrix {
    let dim = model.input_dim();
    let mut meta = vec![0.0; dim];
    meta[0] = model.variance_threshold.unwrap_or(f64::NAN);
    let mut values = Vec::with_capacity((3 + model.retained_dim()) * dim);
    values.extend_from_slice(&model.mean);
    values.extend_from_slice(&model.eigenvalues);
    values.extend_from_slice(&meta);
    for c in model.components.column_iter() {
        values.extend(c.iter());
    }
    StoredMatrix {
        rows: 3 + model.retained_dim(),
        cols: dim,
        values,
    }
}

pub fn pca_from_matrix(m: &StoredMatrix) -> Result<PcaModel> {
    if m.rows < 4 || m.cols == 0 {
        return Err(QrcError::Format(format!(
            "PCA container needs at least 4 rows, found {} × {}",
            m.rows, m.cols
        )));
    }
    let delta = m.rows - 3;
    let threshold = m.row(2)[0];
    let mut components = DMatrix::zeros(m.cols, delta);
    for c in 0..delta {
        components.column_mut(c).copy_from_slice(m.row(3 + c));
    }
    Ok(PcaModel {
        mean: m.row(0).to_vec(),
        components,
        eigenvalues: m.row(1).to_vec(),
        variance_threshold: (!threshold.is_nan()).then_some(threshold),
    })
}

pub fn write_checkpoint<W: Write>(mut out: W, mlp: &Mlp, config: &TrainConfig) -> Result<()> {
    let mut body = Vec::new();
    body.extend_from_slice(&to_u32(mlp.layers.len(), "layer count")?.to_le_bytes());
    for l in &mlp.layers {
        body.extend_from_slice(&to_u32(l.weights.nrows(), "layer width")?.to_le_bytes());
        body.extend_from_slice(&to_u32(l.weights.ncols(), "layer width")?.to_le_bytes());
    }
    body.extend_from_slice(&mlp.dropout_rate.to_le_bytes());
    for p in mlp.params() {
        body.extend_from_slice(&p.to_le_bytes());
    }
    let echo = serde_json::to_vec(config).map_err(|e| QrcError::Format(e.to_string()))?;
    body.extend_from_slice(&to_u32(echo.len(), "config length")?.to_le_bytes());
    body.extend_from_slice(&echo);
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&body)?;
    out.write_all(&crc32fast::hash(&body).to_le_bytes())?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(Mlp, TrainConfig)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    check_magic(&mut cur, CHECKPOINT_MAGIC)?;
    let start = cur.pos;
    let n_layers = cur.u32("layer count")?;
    if n_layers < 1 || n_layers > 64 {
        return Err(QrcError::Format(format!(
            "implausible layer count {n_layers}"
        )));
    }
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let out = cur.u32("layer shape")?;
        let inp = cur.u32("layer shape")?;
        shapes.push((out, inp));
    }
    if shapes.windows(2).any(|w| w[0].0 != w[1].1) {
        return Err(QrcError::Format("inconsistent layer shapes".into()));
    }
    let dropout = cur.f64s(1, "dropout rate")?[0];
    let hidden: Vec<usize> = shapes[..n_layers - 1].iter().map(|s| s.0).collect();
    let mut mlp = Mlp::zeros(shapes[0].1, &hidden, shapes[n_layers - 1].0, dropout)
        .map_err(|e| QrcError::Format(format!("bad checkpoint architecture: {e}")))?;
    let params = cur.f64s(mlp.num_params(), "parameters")?;
    mlp.set_params(&params)?;
    let echo_len = cur.u32("config length")?;
    let echo = cur.take(echo_len, "config echo")?;
    let end = cur.pos;
    let stored = cur.u32("checksum")? as u32;
    cur.finish()?;
    let crc = crc32fast::hash(&bytes[start..end]);
    if crc != stored {
        return Err(QrcError::Format(format!(
            "checksum mismatch: stored {stored:08x}, computed {crc:08x}"
        )));
    }
    let config =
        serde_json::from_slice(echo).map_err(|e| QrcError::Format(format!("config echo: {e}")))?;
    Ok((mlp, config))
}

pub fn save_checkpoint(path: &Path, mlp: &Mlp, config: &TrainConfig) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, mlp, config)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Mlp, TrainConfig)> {
    read_checkpoint(fs::File::open(path)?)
}
