//! Rydberg-chain reservoir: Hamiltonian assembly, time evolution and the
//! Pauli-z embedding sampled at uniformly spaced snapshots.

mod bessel;
pub mod config;
pub mod hamiltonian;
pub mod observables;
pub mod propagator;
pub mod state;

use nalgebra::DMatrix;

pub use config::{angular_mhz, InitialState, ReservoirConfig};
pub use hamiltonian::{build_hamiltonian, build_hamiltonian_unclamped, HamiltonianOperator};
pub use observables::{atom_pairs, measure_observables, observable_weights};
pub use propagator::{evolve_to_times, propagate, PropagatorSettings, ReverseTape};
pub use state::QuantumState;

use crate::error::{check_len, QrcError, Result};

/// Reservoir feature vector Φ.
///
/// Layout: for each snapshot t₁ … t_M, the N single-atom values followed by
/// the N(N−1)/2 pair correlations (see [`observables`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    per_snapshot: usize,
}

impl Embedding {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_snapshots(&self) -> usize {
        self.values.len() / self.per_snapshot
    }

    pub fn snapshot(&self, m: usize) -> &[f64] {
        &self.values[m * self.per_snapshot..(m + 1) * self.per_snapshot]
    }
}

/// Snapshots e^{−iHt_m}|ψ₀⟩ at t_m = m·T/M, m = 1..M.
pub fn evolve(
    h: &HamiltonianOperator,
    initial: &QuantumState,
    config: &ReservoirConfig,
) -> Result<Vec<QuantumState>> {
    evolve_to_times(
        h,
        initial,
        &config.snapshot_times(),
        &PropagatorSettings::default(),
    )
}

fn embed_states(states: &[QuantumState], config: &ReservoirConfig) -> Result<Embedding> {
    let mut values = Vec::with_capacity(config.embedding_dim());
    for s in states {
        values.extend(measure_observables(s, config.n_atoms)?);
    }
    Ok(Embedding {
        values,
        per_snapshot: config.observables_per_snapshot(),
    })
}

fn embed_operator(config: &ReservoirConfig, h: &HamiltonianOperator) -> Result<Embedding> {
    let initial = QuantumState::initial(config.initial_state, config.n_atoms);
    embed_states(&evolve(h, &initial, config)?, config)
}

/// Φ(Δ): build → evolve → measure at every snapshot → concatenate.
pub fn reservoir_embed(config: &ReservoirConfig, detunings: &[f64]) -> Result<Embedding> {
    embed_operator(config, &build_hamiltonian(config, detunings)?)
}

/// Default finite-difference step: 1e-4 of the detuning range.
pub fn default_jacobian_step(config: &ReservoirConfig) -> f64 {
    let range = config.detuning_range();
    if range > 0.0 {
        1e-4 * range
    } else {
        1e-4
    }
}

/// Central-difference Jacobian ∂Φ/∂Δ, a D × N matrix.
///
/// Perturbed points are evaluated without clamping. A perturbation leaving
/// the window [Δ_min − w, Δ_max + w] (w = max(range, 1)) shrinks the step ten
/// times once; if that is still outside, the call fails.
pub fn reservoir_jacobian(
    config: &ReservoirConfig,
    detunings: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    config.validate()?;
    check_len("detuning vector", config.n_atoms, detunings.len())?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(QrcError::InvalidInput(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let margin = config.detuning_range().max(1.0);
    let safe = |d: f64, h: f64| {
        d - h >= config.detuning_min - margin && d + h <= config.detuning_max + margin
    };
    let mut step = step;
    if detunings.iter().any(|&d| !safe(d, step)) {
        step /= 10.0;
        if let Some(d) = detunings.iter().find(|&&d| !safe(d, step)) {
            return Err(QrcError::Numerical(format!(
                "detuning {d} ± {step} leaves the safe window around [{}, {}]",
                config.detuning_min, config.detuning_max
            )));
        }
    }
    let dim = config.embedding_dim();
    let mut jac = DMatrix::zeros(dim, config.n_atoms);
    for i in 0..config.n_atoms {
        let mut plus = detunings.to_vec();
        let mut minus = detunings.to_vec();
        plus[i] += step;
        minus[i] -= step;
        let up = embed_operator(config, &build_hamiltonian_unclamped(config, &plus)?)?;
        let down = embed_operator(config, &build_hamiltonian_unclamped(config, &minus)?)?;
        for (r, (u, d)) in up.values().iter().zip(down.values()).enumerate() {
            jac[(r, i)] = (u - d) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Forward pass with everything needed for adjoint differentiation of Φ
/// with respect to the detunings.
pub struct ReservoirTape<'a> {
    config: &'a ReservoirConfig,
    h: HamiltonianOperator,
    tape: ReverseTape,
    embedding: Embedding,
}

impl<'a> ReservoirTape<'a> {
    /// Evolves at `detunings` taken verbatim (no clamping) and records the
    /// Chebyshev basis.
    pub fn record(config: &'a ReservoirConfig, detunings: &[f64]) -> Result<Self> {
        let h = build_hamiltonian_unclamped(config, detunings)?;
        let initial = QuantumState::initial(config.initial_state, config.n_atoms);
        let tape = ReverseTape::record(
            &h,
            &initial,
            &config.snapshot_times(),
            &PropagatorSettings::default(),
        )?;
        let embedding = embed_states(tape.states(), config)?;
        Ok(Self {
            config,
            h,
            tape,
            embedding,
        })
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    /// gᵀ·∂Φ/∂Δ for a cotangent g of length D.
    pub fn vjp(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        let config = self.config;
        let n = config.n_atoms;
        check_len(
            "embedding cotangent",
            config.embedding_dim(),
            cotangent.len(),
        )?;
        let weights = cotangent
            .chunks_exact(config.observables_per_snapshot())
            .map(|gm| observable_weights(n, gm))
            .collect::<Result<Vec<_>>>()?;
        let diag_grad = self.tape.diagonal_gradient(&self.h, &weights)?;
        // h_b = −Σᵢ αᵢΔᵢ bitᵢ(b) + …
        Ok((0..n)
            .map(|i| {
                let s: f64 = diag_grad
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| b >> i & 1 == 1)
                    .map(|(_, g)| g)
                    .sum();
                -config.local_modulation[i] * s
            })
            .collect())
    }
}

/// Φ and the vector–Jacobian products gᵀ·∂Φ/∂Δ for several cotangents,
/// sharing one forward pass. See [`ReservoirTape`].
pub fn reservoir_vjp(
    config: &ReservoirConfig,
    detunings: &[f64],
    cotangents: &[Vec<f64>],
) -> Result<(Embedding, Vec<Vec<f64>>)> {
    config.validate()?;
    let tape = ReservoirTape::record(config, detunings)?;
    let grads = cotangents
        .iter()
        .map(|g| tape.vjp(g))
        .collect::<Result<Vec<_>>>()?;
    Ok((tape.embedding, grads))
}
