//! Matrix-free Rydberg Hamiltonian
//!
//! H = Σᵢ (Ω/2) σᵢˣ − Σᵢ αᵢΔᵢ n̂ᵢ + Σ_{i<j} V_ij n̂ᵢ n̂ⱼ
//!
//! The diagonal part is tabulated over the 2^N basis; the σˣ part is applied
//! on the fly as a sum of bit flips and never stored as a matrix.

use num_complex::Complex64 as C64;

use crate::error::{check_len, Result};
use crate::reservoir::config::ReservoirConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianOperator {
    n_atoms: usize,
    diagonal: Vec<f64>,
    drive_amplitude: f64,
}

/// Per-basis-state energy −Σᵢ αᵢΔᵢ bitᵢ(b) + Σ_{i<j} V_ij bitᵢ(b) bitⱼ(b).
fn tabulate_diagonal(config: &ReservoirConfig, detunings: &[f64]) -> Vec<f64> {
    let n = config.n_atoms;
    let local: Vec<f64> = (0..n)
        .map(|i| config.local_modulation[i] * detunings[i])
        .collect();
    let mut pair = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            pair[i * n + j] = config.interaction(i, j);
        }
    }
    (0..config.dim())
        .map(|b| {
            let mut e = 0.0;
            for i in 0..n {
                if b >> i & 1 == 1 {
                    e -= local[i];
                    for j in i + 1..n {
                        if b >> j & 1 == 1 {
                            e += pair[i * n + j];
                        }
                    }
                }
            }
            e
        })
        .collect()
}

/// Builds the Hamiltonian for one detuning vector.
///
/// Detunings outside `[detuning_min, detuning_max]` are clamped to the range
/// with a warning.
pub fn build_hamiltonian(
    config: &ReservoirConfig,
    detunings: &[f64],
) -> Result<HamiltonianOperator> {
    config.validate()?;
    check_len("detuning vector", config.n_atoms, detunings.len())?;
    let clamped: Vec<f64> = detunings
        .iter()
        .map(|&d| {
            let c = d.clamp(config.detuning_min, config.detuning_max);
            if c != d {
                log::warn!(
                    "detuning {d} outside [{}, {}], clamped",
                    config.detuning_min,
                    config.detuning_max
                );
            }
            c
        })
        .collect();
    Ok(HamiltonianOperator::assemble(config, &clamped))
}

/// Same as [`build_hamiltonian`] but takes the detunings verbatim, which the
/// finite-difference Jacobian needs at perturbed points just past the range.
pub fn build_hamiltonian_unclamped(
    config: &ReservoirConfig,
    detunings: &[f64],
) -> Result<HamiltonianOperator> {
    config.validate()?;
    check_len("detuning vector", config.n_atoms, detunings.len())?;
    Ok(HamiltonianOperator::assemble(config, detunings))
}

impl HamiltonianOperator {
    fn assemble(config: &ReservoirConfig, detunings: &[f64]) -> Self {
        Self {
            n_atoms: config.n_atoms,
            diagonal: tabulate_diagonal(config, detunings),
            drive_amplitude: config.rabi_frequency / 2.0,
        }
    }

    /// Operator from raw parts: a diagonal of length 2^N and the σˣ
    /// coefficient Ω/2.
    pub fn from_parts(n_atoms: usize, diagonal: Vec<f64>, drive_amplitude: f64) -> Result<Self> {
        check_len("hamiltonian diagonal", 1 << n_atoms, diagonal.len())?;
        Ok(Self {
            n_atoms,
            diagonal,
            drive_amplitude,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Coefficient Ω/2 of Σᵢ σᵢˣ.
    pub fn drive_amplitude(&self) -> f64 {
        self.drive_amplitude
    }

    /// H|ψ⟩ for a complex amplitude vector.
    pub fn apply(&self, state: &[C64]) -> Result<Vec<C64>> {
        check_len("hamiltonian apply", self.dim(), state.len())?;
        let mut out: Vec<C64> = state
            .iter()
            .zip(&self.diagonal)
            .map(|(a, d)| a * d)
            .collect();
        let w = self.drive_amplitude;
        if w != 0.0 {
            for i in 0..self.n_atoms {
                flip_accumulate(&mut out, state, 1 << i, |o, x| *o += x * w);
            }
        }
        Ok(out)
    }

    /// out = (H − shift)·x / scale on a real vector. H is real symmetric, so
    /// real and imaginary parts of a state can be propagated independently.
    pub(crate) fn apply_shifted_real(&self, x: &[f64], out: &mut [f64], shift: f64, scale: f64) {
        let inv = 1.0 / scale;
        for ((o, &xi), &d) in out.iter_mut().zip(x).zip(&self.diagonal) {
            *o = (d - shift) * inv * xi;
        }
        let w = self.drive_amplitude * inv;
        if w != 0.0 {
            for i in 0..self.n_atoms {
                flip_accumulate(out, x, 1 << i, |o, xi| *o += w * xi);
            }
        }
    }

    /// Interval guaranteed to contain the spectrum (Weyl bound: the σˣ part
    /// has spectrum ±N·|Ω|/2, the diagonal part its own extremes).
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self
            .diagonal
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
                (lo.min(d), hi.max(d))
            });
        let drive = self.n_atoms as f64 * self.drive_amplitude.abs();
        (lo - drive, hi + drive)
    }
}

/// For every basis pair (b, b ^ stride) accumulate `x[b ^ stride]` into
/// `out[b]`. Works on contiguous half-blocks so the inner loops vectorize.
#[inline]
fn flip_accumulate<T: Copy, F: Fn(&mut T, T)>(out: &mut [T], x: &[T], stride: usize, f: F) {
    for (ob, xb) in out
        .chunks_exact_mut(2 * stride)
        .zip(x.chunks_exact(2 * stride))
    {
        let (o_lo, o_hi) = ob.split_at_mut(stride);
        let (x_lo, x_hi) = xb.split_at(stride);
        for (o, &v) in o_lo.iter_mut().zip(x_hi) {
            f(o, v);
        }
        for (o, &v) in o_hi.iter_mut().zip(x_lo) {
            f(o, v);
        }
    }
}
