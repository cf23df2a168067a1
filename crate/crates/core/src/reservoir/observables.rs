//! Pauli-z expectation values.
//!
//! σᵢᶻ = |gᵢ⟩⟨gᵢ| − |rᵢ⟩⟨rᵢ|, so basis state b contributes +1 when bit i is 0
//! and −1 when it is 1. Output order per snapshot: ⟨σ₁ᶻ⟩ … ⟨σ_Nᶻ⟩, then
//! ⟨σᵢᶻσⱼᶻ⟩ for (i, j) in lexicographic order with i < j.

use crate::error::{check_len, Result};
use crate::reservoir::state::QuantumState;

#[inline]
fn sign(b: usize, i: usize) -> f64 {
    if b >> i & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Lexicographic list of (i, j) pairs with i < j.
pub fn atom_pairs(n_atoms: usize) -> Vec<(usize, usize)> {
    (0..n_atoms)
        .flat_map(|i| (i + 1..n_atoms).map(move |j| (i, j)))
        .collect()
}

/// Single-body and two-body Pauli-z expectations, length N + N(N−1)/2.
pub fn measure_observables(state: &QuantumState, n_atoms: usize) -> Result<Vec<f64>> {
    check_len("observable register", 1 << n_atoms, state.dim())?;
    state.ensure_normalized()?;
    Ok(expectations_from_probabilities(
        &state.probabilities(),
        n_atoms,
    ))
}

pub(crate) fn expectations_from_probabilities(probs: &[f64], n_atoms: usize) -> Vec<f64> {
    let pairs = atom_pairs(n_atoms);
    let mut out = vec![0.0; n_atoms + pairs.len()];
    for (b, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for i in 0..n_atoms {
            out[i] += p * sign(b, i);
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            out[n_atoms + k] += p * sign(b, i) * sign(b, j);
        }
    }
    for v in &mut out {
        *v = v.clamp(-1.0, 1.0);
    }
    out
}

/// Diagonal of Σ_o g_o·O_o in the computational basis, for a cotangent `g`
/// over one snapshot's observables.
pub fn observable_weights(n_atoms: usize, cotangent: &[f64]) -> Result<Vec<f64>> {
    let pairs = atom_pairs(n_atoms);
    check_len(
        "observable cotangent",
        n_atoms + pairs.len(),
        cotangent.len(),
    )?;
    Ok((0..1usize << n_atoms)
        .map(|b| {
            let single: f64 = (0..n_atoms).map(|i| cotangent[i] * sign(b, i)).sum();
            let double: f64 = pairs
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| cotangent[n_atoms + k] * sign(b, i) * sign(b, j))
                .sum();
            single + double
        })
        .collect())
}
