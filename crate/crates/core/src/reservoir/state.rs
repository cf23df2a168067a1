use num_complex::Complex64 as C64;

use crate::error::{QrcError, Result};
use crate::reservoir::config::InitialState;

/// Tolerance on Σ|a|² − 1 for a state to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Pure state over the 2^N computational basis.
///
/// Basis index bit `i` is atom `i` (little-endian); bit value 0 is |g⟩ and 1
/// is |r⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_atoms: usize,
    amplitudes: Vec<C64>,
}

impl QuantumState {
    pub fn new(n_atoms: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 1 << n_atoms {
            return Err(QrcError::Dimension {
                context: "quantum state amplitudes",
                expected: 1 << n_atoms,
                actual: amplitudes.len(),
            });
        }
        Ok(Self {
            n_atoms,
            amplitudes,
        })
    }

    pub fn basis(n_atoms: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << n_atoms];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self {
            n_atoms,
            amplitudes,
        }
    }

    /// |+⟩^⊗N.
    pub fn plus(n_atoms: usize) -> Self {
        let dim = 1usize << n_atoms;
        let a = 1.0 / (dim as f64).sqrt();
        Self {
            n_atoms,
            amplitudes: vec![C64::new(a, 0.0); dim],
        }
    }

    pub fn initial(kind: InitialState, n_atoms: usize) -> Self {
        match kind {
            InitialState::Plus => Self::plus(n_atoms),
            InitialState::Ground => Self::basis(n_atoms, 0),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        let norm_sq = self.norm_sq();
        if (norm_sq - 1.0).abs() > NORM_TOLERANCE || !norm_sq.is_finite() {
            return Err(QrcError::NotNormalized { norm_sq });
        }
        Ok(())
    }

    /// Basis-state probabilities |a_b|².
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Largest |a_b − b_b| between two states of equal dimension.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
