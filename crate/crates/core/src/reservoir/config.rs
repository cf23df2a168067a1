//! Physical parameters of the atom array.
//!
//! # Units
//!
//! Every frequency-like quantity (Rabi frequency, detunings, the C6
//! coefficient) is stored as an *angular* frequency in rad/µs, i.e. the
//! factor 2π is already included: a laser quoted at "2π × 5 MHz" is stored as
//! `TAU * 5.0`. Times are in µs and lengths in µm, so a phase is simply
//! `rate * time`. [`angular_mhz`] is the single conversion point.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{QrcError, Result};

/// Converts a cyclic frequency in MHz into the angular rad/µs used internally.
pub fn angular_mhz(cyclic_mhz: f64) -> f64 {
    TAU * cyclic_mhz
}

/// Initial reservoir state |ψ₀⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InitialState {
    /// |+⟩^⊗N, the uniform superposition.
    #[default]
    Plus,
    /// |g…g⟩, every atom in the ground state (basis index 0).
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub n_atoms: usize,
    /// Nearest-neighbour distance of the 1-D chain, µm.
    pub lattice_spacing: f64,
    /// Van der Waals coefficient, rad/µs · µm⁶.
    pub c6_coefficient: f64,
    /// Global Rabi frequency Ω, rad/µs (constant in time).
    pub rabi_frequency: f64,
    pub detuning_min: f64,
    pub detuning_max: f64,
    /// Site-dependent modulation αᵢ ∈ [0, 1] scaling each encoded detuning.
    pub local_modulation: Vec<f64>,
    /// Evolution window t_end − t₀, µs.
    pub total_time: f64,
    pub num_snapshots: usize,
    pub initial_state: InitialState,
}

impl Default for ReservoirConfig {
    /// The 8-atom chain used for the benchmark.
    fn default() -> Self {
        Self::uniform(8)
    }
}

impl ReservoirConfig {
    /// Default physical parameters with `n_atoms` sites and uniform α = 0.15.
    pub fn uniform(n_atoms: usize) -> Self {
        Self {
            n_atoms,
            lattice_spacing: 10.0,
            c6_coefficient: angular_mhz(2000.0),
            rabi_frequency: angular_mhz(5.0),
            detuning_min: 0.0,
            detuning_max: angular_mhz(10.0),
            local_modulation: vec![0.15; n_atoms],
            total_time: 3.0,
            num_snapshots: 6,
            initial_state: InitialState::Plus,
        }
    }

    /// Same parameters with a different atom count; the modulation vector is
    /// resized, new sites taking the value of the first one (or 0.15).
    pub fn with_atoms(&self, n_atoms: usize) -> Self {
        let fill = self.local_modulation.first().copied().unwrap_or(0.15);
        let mut local_modulation = self.local_modulation.clone();
        local_modulation.resize(n_atoms, fill);
        Self {
            n_atoms,
            local_modulation,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(QrcError::Config("n_atoms must be at least 1".into()));
        }
        if self.n_atoms > 20 {
            return Err(QrcError::Config(format!(
                "n_atoms = {} exceeds the dense state-vector limit of 20",
                self.n_atoms
            )));
        }
        if !(self.lattice_spacing > 0.0) || !self.lattice_spacing.is_finite() {
            return Err(QrcError::Config(format!(
                "lattice_spacing must be positive, got {}",
                self.lattice_spacing
            )));
        }
        if !(self.detuning_max >= self.detuning_min) {
            return Err(QrcError::Config(format!(
                "detuning_max ({}) < detuning_min ({})",
                self.detuning_max, self.detuning_min
            )));
        }
        if self.num_snapshots == 0 {
            return Err(QrcError::Config("num_snapshots must be at least 1".into()));
        }
        if !(self.total_time > 0.0) || !self.total_time.is_finite() {
            return Err(QrcError::Config(format!(
                "total_time must be positive, got {}",
                self.total_time
            )));
        }
        if self.local_modulation.len() != self.n_atoms {
            return Err(QrcError::Config(format!(
                "local_modulation has {} entries for {} atoms",
                self.local_modulation.len(),
                self.n_atoms
            )));
        }
        if let Some(a) = self
            .local_modulation
            .iter()
            .find(|a| !(0.0..=1.0).contains(*a))
        {
            return Err(QrcError::Config(format!(
                "local modulation {a} outside [0, 1]"
            )));
        }
        for (name, v) in [
            ("c6_coefficient", self.c6_coefficient),
            ("rabi_frequency", self.rabi_frequency),
            ("detuning_min", self.detuning_min),
            ("detuning_max", self.detuning_max),
        ] {
            if !v.is_finite() {
                return Err(QrcError::Config(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_atoms
    }

    /// Position of atom `i` on the chain, µm.
    pub fn position(&self, i: usize) -> f64 {
        i as f64 * self.lattice_spacing
    }

    /// V_ij = C6 / |rᵢ − rⱼ|⁶.
    pub fn interaction(&self, i: usize, j: usize) -> f64 {
        let r = (self.position(i) - self.position(j)).abs();
        self.c6_coefficient / r.powi(6)
    }

    pub fn detuning_range(&self) -> f64 {
        self.detuning_max - self.detuning_min
    }

    /// Number of observables per snapshot, N + N(N−1)/2.
    pub fn observables_per_snapshot(&self) -> usize {
        self.n_atoms + self.n_atoms * (self.n_atoms - 1) / 2
    }

    /// Embedding length D = M·(N + N(N−1)/2).
    pub fn embedding_dim(&self) -> usize {
        self.num_snapshots * self.observables_per_snapshot()
    }

    /// Snapshot times t_m = m·T/M for m = 1..M (t₀ = 0 excluded).
    pub fn snapshot_times(&self) -> Vec<f64> {
        let dt = self.total_time / self.num_snapshots as f64;
        (1..=self.num_snapshots).map(|m| m as f64 * dt).collect()
    }
}
