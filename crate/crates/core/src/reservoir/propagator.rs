//! Chebyshev propagator for time-independent Hamiltonians.
//!
//! With H = a·H̃ + c and spec(H̃) ⊂ [−1, 1],
//!
//! e^{−iHt} = e^{−ict} Σ_k β_k (−i)^k J_k(a t) T_k(H̃),   β₀ = 1, β_k = 2,
//!
//! and the vectors T_k(H̃)ψ₀ follow the three-term recurrence
//! u_{k+1} = 2H̃u_k − u_{k−1}. One recurrence serves every snapshot time: only
//! the scalar coefficients depend on t. H is real symmetric, so the real and
//! imaginary parts of ψ₀ are propagated as two independent real recurrences
//! (the imaginary one is skipped for real initial states such as |+⟩^⊗N).
//!
//! [`ReverseTape`] keeps the recurrence vectors and runs the adjoint
//! (Clenshaw-type) recurrence to obtain gradients of diagonal-observable
//! expectation values with respect to the Hamiltonian diagonal.

use num_complex::Complex64 as C64;

use crate::error::{QrcError, Result};
use crate::reservoir::bessel::truncated_bessel_coefficients;
use crate::reservoir::hamiltonian::HamiltonianOperator;
use crate::reservoir::state::{QuantumState, NORM_TOLERANCE};

/// Truncation and safety limits of the expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorSettings {
    /// Expansion stops once every remaining |J_k| is below this.
    pub coefficient_tolerance: f64,
    /// Hard cap on the number of recurrence terms.
    pub max_terms: usize,
}

impl Default for PropagatorSettings {
    fn default() -> Self {
        Self {
            coefficient_tolerance: 1e-16,
            max_terms: 1 << 16,
        }
    }
}

/// Scalar part of the expansion: the spectral map and β_k·J_k(a t_m).
#[derive(Debug, Clone)]
struct Expansion {
    shift: f64,
    scale: f64,
    times: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl Expansion {
    fn new(h: &HamiltonianOperator, times: &[f64], settings: &PropagatorSettings) -> Result<Self> {
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(QrcError::InvalidInput(format!(
                "evolution time {t} must be finite and non-negative"
            )));
        }
        let (lo, hi) = h.spectral_bounds();
        if !lo.is_finite() || !hi.is_finite() {
            return Err(QrcError::Numerical(
                "hamiltonian has non-finite entries".into(),
            ));
        }
        let shift = 0.5 * (lo + hi);
        // Slight widening keeps the spectrum strictly inside [−1, 1] after
        // rounding, and keeps the scale positive for a constant operator.
        let scale = 0.5 * (hi - lo) * (1.0 + 1e-10) + 1e-10;
        let mut coeffs = Vec::with_capacity(times.len());
        for &t in times {
            let mut c = truncated_bessel_coefficients(scale * t, settings.coefficient_tolerance);
            if c.len() > settings.max_terms {
                return Err(QrcError::Numerical(format!(
                    "propagation to t = {t} needs {} expansion terms (limit {})",
                    c.len(),
                    settings.max_terms
                )));
            }
            for v in c.iter_mut().skip(1) {
                *v *= 2.0;
            }
            coeffs.push(c);
        }
        Ok(Self {
            shift,
            scale,
            times: times.to_vec(),
            coeffs,
        })
    }

    fn num_terms(&self) -> usize {
        self.coeffs.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Runs the recurrence u_{k+1} = 2H̃u_k − u_{k−1} from `start`, handing every
/// u_k to `visit`.
fn recurse(
    h: &HamiltonianOperator,
    shift: f64,
    scale: f64,
    start: &[f64],
    terms: usize,
    mut visit: impl FnMut(usize, &[f64]),
) {
    if terms == 0 {
        return;
    }
    let dim = start.len();
    let mut prev = start.to_vec();
    visit(0, &prev);
    if terms == 1 {
        return;
    }
    let mut cur = vec![0.0; dim];
    h.apply_shifted_real(&prev, &mut cur, shift, scale);
    visit(1, &cur);
    let mut next = vec![0.0; dim];
    for k in 2..terms {
        h.apply_shifted_real(&cur, &mut next, shift, scale);
        for (n, p) in next.iter_mut().zip(&prev) {
            *n = 2.0 * *n - p;
        }
        visit(k, &next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Un-phased snapshot amplitudes φ_m = Σ_k β_k(−i)^k J_k T_k(H̃)ψ₀ split into
/// real and imaginary parts.
struct Accumulator {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Accumulator {
    fn new(times: usize, dim: usize) -> Self {
        Self {
            re: vec![vec![0.0; dim]; times],
            im: vec![vec![0.0; dim]; times],
        }
    }

    /// Adds the contribution of u_k = T_k(H̃)·(real part of ψ₀).
    fn add_real_source(&mut self, exp: &Expansion, k: usize, v: &[f64]) {
        for (m, c) in exp.coeffs.iter().enumerate() {
            if let Some(&c) = c.get(k) {
                match k % 4 {
                    0 => axpy(&mut self.re[m], c, v),
                    1 => axpy(&mut self.im[m], -c, v),
                    2 => axpy(&mut self.re[m], -c, v),
                    _ => axpy(&mut self.im[m], c, v),
                }
            }
        }
    }

    /// Adds the contribution of i·T_k(H̃)·(imaginary part of ψ₀).
    fn add_imag_source(&mut self, exp: &Expansion, k: usize, w: &[f64]) {
        for (m, c) in exp.coeffs.iter().enumerate() {
            if let Some(&c) = c.get(k) {
                match k % 4 {
                    0 => axpy(&mut self.im[m], c, w),
                    1 => axpy(&mut self.re[m], c, w),
                    2 => axpy(&mut self.im[m], -c, w),
                    _ => axpy(&mut self.re[m], -c, w),
                }
            }
        }
    }

    fn into_states(self, exp: &Expansion, n_atoms: usize) -> Result<Vec<QuantumState>> {
        self.re
            .into_iter()
            .zip(self.im)
            .zip(&exp.times)
            .map(|((re, im), &t)| {
                let phase = C64::from_polar(1.0, -exp.shift * t);
                let amps = re
                    .into_iter()
                    .zip(im)
                    .map(|(r, i)| phase * C64::new(r, i))
                    .collect();
                let state = QuantumState::new(n_atoms, amps)?;
                check_norm(&state, t)?;
                Ok(state)
            })
            .collect()
    }
}

fn check_norm(state: &QuantumState, t: f64) -> Result<()> {
    let norm_sq = state.norm_sq();
    if (norm_sq - 1.0).abs() > NORM_TOLERANCE || !norm_sq.is_finite() {
        return Err(QrcError::Numerical(format!(
            "norm drift at t = {t}: |psi|^2 = {norm_sq}"
        )));
    }
    Ok(())
}

fn split_parts(state: &QuantumState) -> (Vec<f64>, Option<Vec<f64>>) {
    let re = state.amplitudes().iter().map(|a| a.re).collect();
    let im: Vec<f64> = state.amplitudes().iter().map(|a| a.im).collect();
    let im = im.iter().any(|&x| x != 0.0).then_some(im);
    (re, im)
}

fn check_initial(h: &HamiltonianOperator, initial: &QuantumState) -> Result<()> {
    if initial.dim() != h.dim() {
        return Err(QrcError::Dimension {
            context: "initial state",
            expected: h.dim(),
            actual: initial.dim(),
        });
    }
    initial.ensure_normalized()
}

/// e^{−iHt}|ψ₀⟩ for every t in `times`.
pub fn evolve_to_times(
    h: &HamiltonianOperator,
    initial: &QuantumState,
    times: &[f64],
    settings: &PropagatorSettings,
) -> Result<Vec<QuantumState>> {
    check_initial(h, initial)?;
    let exp = Expansion::new(h, times, settings)?;
    let terms = exp.num_terms();
    let (re, im) = split_parts(initial);
    let mut acc = Accumulator::new(times.len(), h.dim());
    recurse(h, exp.shift, exp.scale, &re, terms, |k, v| {
        acc.add_real_source(&exp, k, v)
    });
    if let Some(im) = im {
        recurse(h, exp.shift, exp.scale, &im, terms, |k, w| {
            acc.add_imag_source(&exp, k, w)
        });
    }
    acc.into_states(&exp, h.n_atoms())
}

/// e^{−iHt}|ψ⟩ for a single time.
pub fn propagate(h: &HamiltonianOperator, state: &QuantumState, t: f64) -> Result<QuantumState> {
    let mut out = evolve_to_times(h, state, &[t], &PropagatorSettings::default())?;
    Ok(out.pop().expect("one time requested"))
}

/// Forward pass that keeps every recurrence vector for a later adjoint pass.
pub struct ReverseTape {
    exp: Expansion,
    dim: usize,
    basis_re: Vec<f64>,
    basis_im: Option<Vec<f64>>,
    phi_re: Vec<Vec<f64>>,
    phi_im: Vec<Vec<f64>>,
    states: Vec<QuantumState>,
}

impl ReverseTape {
    pub fn record(
        h: &HamiltonianOperator,
        initial: &QuantumState,
        times: &[f64],
        settings: &PropagatorSettings,
    ) -> Result<Self> {
        check_initial(h, initial)?;
        let exp = Expansion::new(h, times, settings)?;
        let terms = exp.num_terms();
        let dim = h.dim();
        let (re, im) = split_parts(initial);
        let mut acc = Accumulator::new(times.len(), dim);
        let mut basis_re = Vec::with_capacity(terms * dim);
        recurse(h, exp.shift, exp.scale, &re, terms, |k, v| {
            acc.add_real_source(&exp, k, v);
            basis_re.extend_from_slice(v);
        });
        let basis_im = im.map(|im| {
            let mut basis = Vec::with_capacity(terms * dim);
            recurse(h, exp.shift, exp.scale, &im, terms, |k, w| {
                acc.add_imag_source(&exp, k, w);
                basis.extend_from_slice(w);
            });
            basis
        });
        let phi_re = acc.re.clone();
        let phi_im = acc.im.clone();
        let states = acc.into_states(&exp, h.n_atoms())?;
        Ok(Self {
            exp,
            dim,
            basis_re,
            basis_im,
            phi_re,
            phi_im,
            states,
        })
    }

    pub fn states(&self) -> &[QuantumState] {
        &self.states
    }

    /// Gradient of L = Σ_m Σ_b ω_m(b)·|ψ_m(b)|² with respect to the diagonal
    /// of `h` (the operator the tape was recorded with). `weights[m]` is ω_m.
    pub fn diagonal_gradient(
        &self,
        h: &HamiltonianOperator,
        weights: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        if weights.len() != self.exp.times.len() {
            return Err(QrcError::Dimension {
                context: "snapshot weights",
                expected: self.exp.times.len(),
                actual: weights.len(),
            });
        }
        let dim = self.dim;
        // χ_m = ω_m ⊙ φ_m
        let chi: Vec<(Vec<f64>, Vec<f64>)> = weights
            .iter()
            .enumerate()
            .map(|(m, w)| {
                let re = w.iter().zip(&self.phi_re[m]).map(|(a, b)| a * b).collect();
                let im = w.iter().zip(&self.phi_im[m]).map(|(a, b)| a * b).collect();
                (re, im)
            })
            .collect();
        let terms = self.exp.num_terms();

        // ū_k = Σ_m β_k J_k(a t_m) i^k χ_m; returns its real (or imaginary) part.
        let adjoint_source = |k: usize, imaginary: bool, out: &mut [f64]| {
            out.iter_mut().for_each(|x| *x = 0.0);
            for (m, c) in self.exp.coeffs.iter().enumerate() {
                if let Some(&c) = c.get(k) {
                    let (re, im) = &chi[m];
                    // i^k χ = (re + i im)·{1, i, −1, −i}
                    let (src, sign) = match (k % 4, imaginary) {
                        (0, false) => (re, 1.0),
                        (1, false) => (im, -1.0),
                        (2, false) => (re, -1.0),
                        (3, false) => (im, 1.0),
                        (0, true) => (im, 1.0),
                        (1, true) => (re, 1.0),
                        (2, true) => (im, -1.0),
                        _ => (re, -1.0),
                    };
                    axpy(out, sign * c, src);
                }
            }
        };

        let mut grad = vec![0.0; dim];
        let parts: Vec<(bool, &Vec<f64>)> = std::iter::once((false, &self.basis_re))
            .chain(self.basis_im.as_ref().map(|b| (true, b)))
            .collect();
        for (imaginary, basis) in parts {
            // λ_j = ū_j + 2H̃λ_{j+1} − λ_{j+2}, for j = terms−1 … 1, and
            // ∂L/∂h += c_j·λ_j ⊙ u_{j−1} with c_1 = 1, c_j = 2 otherwise.
            let mut lam_next = vec![0.0; dim];
            let mut lam_next2 = vec![0.0; dim];
            let mut lam = vec![0.0; dim];
            let mut src = vec![0.0; dim];
            for j in (1..terms).rev() {
                h.apply_shifted_real(&lam_next, &mut lam, self.exp.shift, self.exp.scale);
                adjoint_source(j, imaginary, &mut src);
                for ((l, s), l2) in lam.iter_mut().zip(&src).zip(&lam_next2) {
                    *l = s + 2.0 * *l - l2;
                }
                let weight = if j == 1 { 1.0 } else { 2.0 };
                let u_prev = &basis[(j - 1) * dim..j * dim];
                for ((g, l), u) in grad.iter_mut().zip(&lam).zip(u_prev) {
                    *g += weight * l * u;
                }
                std::mem::swap(&mut lam_next2, &mut lam_next);
                std::mem::swap(&mut lam_next, &mut lam);
            }
        }
        let factor = 2.0 / self.exp.scale;
        grad.iter_mut().for_each(|g| *g *= factor);
        Ok(grad)
    }
}
