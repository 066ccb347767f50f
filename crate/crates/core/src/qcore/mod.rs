//! Dense statevector and density-matrix simulation primitives.
//!
//! Basis ordering: qubit 0 is the most significant bit of a basis index and
//! the leftmost letter of a Pauli string.

pub(crate) mod density;
pub(crate) mod gates;
pub mod linalg;
mod measure;
pub(crate) mod pauli;
mod state;

use num_complex::Complex64 as C64;

pub use density::DensityMatrix;
pub use gates::{ry_matrix, GateOp};
pub use measure::{measure_qubits, postselect, Measurement};
pub use pauli::{Hamiltonian, Pauli, PauliString, PauliTerm};
pub use state::StateVector;

use crate::{QcsError, Result};

pub type Matrix = nalgebra::DMatrix<C64>;

/// Largest statevector register the simulator will allocate.
pub const MAX_STATE_QUBITS: usize = 20;
/// Largest density-matrix register the simulator will allocate.
pub const MAX_DENSITY_QUBITS: usize = 12;

pub(crate) const NORM_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn bit_mask(n_qubits: usize, qubit: usize) -> usize {
    1usize << (n_qubits - 1 - qubit)
}

pub(crate) fn check_qubits(indices: &[usize], n_qubits: usize) -> Result<()> {
    for (k, &q) in indices.iter().enumerate() {
        if q >= n_qubits {
            return Err(QcsError::InvalidQubit { index: q, n_qubits });
        }
        if indices[..k].contains(&q) {
            return Err(QcsError::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// Applies a `2^k x 2^k` matrix to the qubits `targets` of a flat amplitude
/// vector in place. `targets[0]` is the most significant local bit.
pub(crate) fn apply_local(amps: &mut [C64], n_qubits: usize, targets: &[usize], m: &Matrix) {
    let k = targets.len();
    let local_dim = 1usize << k;
    debug_assert_eq!(m.nrows(), local_dim);
    let masks: Vec<usize> = targets.iter().map(|&q| bit_mask(n_qubits, q)).collect();
    let target_mask: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..local_dim)
        .map(|s| {
            (0..k)
                .filter(|j| s & (1 << (k - 1 - j)) != 0)
                .map(|j| masks[j])
                .sum()
        })
        .collect();
    let mut buf = vec![C64::new(0.0, 0.0); local_dim];
    for base in 0..amps.len() {
        if base & target_mask != 0 {
            continue;
        }
        for (s, off) in offsets.iter().enumerate() {
            buf[s] = amps[base | off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (c, b) in buf.iter().enumerate() {
                acc += m[(r, c)] * b;
            }
            amps[base | off] = acc;
        }
    }
}

/// A pure or mixed register state.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn n_qubits(&self) -> usize {
        match self {
            QuantumState::Pure(s) => s.n_qubits(),
            QuantumState::Mixed(r) => r.n_qubits(),
        }
    }

    pub fn is_pure_representation(&self) -> bool {
        matches!(self, QuantumState::Pure(_))
    }

    /// Real expectation of a Pauli string; the imaginary part vanishes for
    /// Hermitian observables and is dropped.
    pub fn pauli_expectation(&self, p: &PauliString) -> f64 {
        match self {
            QuantumState::Pure(s) => s.pauli_expectation(p).re,
            QuantumState::Mixed(r) => r.pauli_expectation(p).re,
        }
    }

    pub fn expectation_term(&self, term: &PauliTerm) -> Result<f64> {
        if term.axes.len() != self.n_qubits() {
            return Err(QcsError::DimensionMismatch {
                expected: self.n_qubits(),
                found: term.axes.len(),
            });
        }
        Ok(term.coefficient * self.pauli_expectation(&term.axes))
    }

    pub fn expectation(&self, h: &Hamiltonian) -> Result<f64> {
        h.terms().iter().map(|t| self.expectation_term(t)).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            QuantumState::Pure(s) => s.probabilities(),
            QuantumState::Mixed(r) => r.probabilities(),
        }
    }

    pub fn apply_unitary(&mut self, targets: &[usize], u: &Matrix) -> Result<()> {
        match self {
            QuantumState::Pure(s) => s.apply_unitary(targets, u),
            QuantumState::Mixed(r) => r.apply_unitary(targets, u),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(s) => DensityMatrix::from_pure(s),
            QuantumState::Mixed(r) => r.clone(),
        }
    }
}

impl From<StateVector> for QuantumState {
    fn from(s: StateVector) -> Self {
        QuantumState::Pure(s)
    }
}

impl From<DensityMatrix> for QuantumState {
    fn from(r: DensityMatrix) -> Self {
        QuantumState::Mixed(r)
    }
}

/// State fidelity. Pure-pure uses `|<a|b>|^2`, pure-mixed `<a|rho|a>` and
/// mixed-mixed the Uhlmann form `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(QcsError::DimensionMismatch {
            expected: a.n_qubits(),
            found: b.n_qubits(),
        });
    }
    let f = match (a, b) {
        (QuantumState::Pure(x), QuantumState::Pure(y)) => x.inner(y).norm_sqr(),
        (QuantumState::Pure(x), QuantumState::Mixed(r))
        | (QuantumState::Mixed(r), QuantumState::Pure(x)) => {
            r.check_positive()?;
            r.sandwich(x)
        }
        (QuantumState::Mixed(r), QuantumState::Mixed(s)) => {
            r.check_positive()?;
            s.check_positive()?;
            let sr = linalg::psd_sqrt(r.matrix());
            let inner = &sr * s.matrix() * &sr;
            let t: f64 = linalg::eigvalsh(&inner)
                .into_iter()
                .map(|l| l.max(0.0).sqrt())
                .sum();
            t * t
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Reduced state on `keep` (ascending qubit order in the output).
pub fn partial_trace(state: &QuantumState, keep: &[usize]) -> Result<DensityMatrix> {
    state.to_density().partial_trace(keep)
}

/// `0.5 * || a - b ||_1`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(QcsError::DimensionMismatch {
            expected: a.n_qubits(),
            found: b.n_qubits(),
        });
    }
    let diff = a.matrix() - b.matrix();
    Ok(0.5 * linalg::eigvalsh(&diff).iter().map(|l| l.abs()).sum::<f64>())
}
