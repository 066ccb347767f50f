use num_complex::Complex64 as C64;

use super::pauli::i_pow;
use super::{apply_local, bit_mask, check_qubits, linalg, GateOp, Matrix, PauliString, MAX_STATE_QUBITS, NORM_TOL};
use crate::{QcsError, Result};

/// Unit-norm amplitude vector over `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(QcsError::invalid(format!(
            "amplitude vector length {len} is not a power of two"
        )));
    }
    let n = len.trailing_zeros() as usize;
    if n > MAX_STATE_QUBITS {
        return Err(QcsError::TooManyQubits {
            n_qubits: n,
            cap: MAX_STATE_QUBITS,
        });
    }
    Ok(n)
}

impl StateVector {
    /// Wraps amplitudes that are already normalised (within 1e-10).
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amps.len())?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QcsError::OutOfRange {
                name: "state norm",
                value: norm,
                range: "1 +/- 1e-10",
            });
        }
        Ok(StateVector { n_qubits, amps })
    }

    /// Normalises arbitrary non-zero amplitudes.
    pub fn from_unnormalized(mut amps: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amps.len())?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(QcsError::invalid("cannot normalise a zero vector"));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_unnormalized(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn zero_state(n_qubits: usize) -> Self {
        Self::basis_state(n_qubits, 0).expect("index 0 is always valid")
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits > MAX_STATE_QUBITS {
            return Err(QcsError::TooManyQubits {
                n_qubits,
                cap: MAX_STATE_QUBITS,
            });
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(QcsError::invalid(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    /// Uniform superposition `|+>^n`.
    pub fn plus_state(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let a = C64::new((dim as f64).sqrt().recip(), 0.0);
        StateVector {
            n_qubits,
            amps: vec![a; dim],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `self (x) other`; `self` occupies the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector {
            n_qubits: self.n_qubits + other.n_qubits,
            amps,
        }
    }

    pub fn apply_gate(&self, gate: &GateOp) -> Result<StateVector> {
        let mut out = self.clone();
        out.apply_unitary(gate.targets(), gate.unitary())?;
        Ok(out)
    }

    /// In-place unitary on `targets`; the matrix is checked for unitarity.
    pub fn apply_unitary(&mut self, targets: &[usize], u: &Matrix) -> Result<()> {
        self.check_local(targets, u)?;
        let dev = linalg::unitarity_error(u);
        if dev > NORM_TOL {
            return Err(QcsError::NonUnitary { deviation: dev });
        }
        apply_local(&mut self.amps, self.n_qubits, targets, u);
        Ok(())
    }

    /// Applies `u` on `target` only in the branch where every control qubit
    /// holds the requested bit value.
    pub fn apply_controlled(
        &mut self,
        controls: &[(usize, bool)],
        target: usize,
        u: &Matrix,
    ) -> Result<()> {
        let mut all: Vec<usize> = controls.iter().map(|c| c.0).collect();
        all.push(target);
        check_qubits(&all, self.n_qubits)?;
        if u.shape() != (2, 2) {
            return Err(QcsError::DimensionMismatch {
                expected: 2,
                found: u.nrows(),
            });
        }
        let n = self.n_qubits;
        let (mut cmask, mut cval) = (0usize, 0usize);
        for &(q, b) in controls {
            cmask |= bit_mask(n, q);
            if b {
                cval |= bit_mask(n, q);
            }
        }
        let t = bit_mask(n, target);
        for i in 0..self.amps.len() {
            if i & t != 0 || i & cmask != cval {
                continue;
            }
            let (a0, a1) = (self.amps[i], self.amps[i | t]);
            self.amps[i] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
            self.amps[i | t] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
        }
        Ok(())
    }

    /// Applies a Pauli string in place (exact, no phase dropped).
    pub fn apply_pauli(&mut self, p: &PauliString) {
        let (x, z, ny) = p.masks();
        let base = i_pow(ny);
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let sign = if (i & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[i ^ x] = base * sign * a;
        }
        self.amps = out;
    }

    /// Raw `<psi|P|psi>`.
    pub fn pauli_expectation(&self, p: &PauliString) -> C64 {
        assert_eq!(p.len(), self.n_qubits, "Pauli string length mismatch");
        let (x, z, ny) = p.masks();
        let mut acc = C64::new(0.0, 0.0);
        for (i, a) in self.amps.iter().enumerate() {
            let term = self.amps[i ^ x].conj() * a;
            if (i & z).count_ones() % 2 == 1 {
                acc -= term;
            } else {
                acc += term;
            }
        }
        acc * i_pow(ny)
    }

    fn check_local(&self, targets: &[usize], m: &Matrix) -> Result<()> {
        check_qubits(targets, self.n_qubits)?;
        let d = 1usize << targets.len();
        if m.shape() != (d, d) {
            return Err(QcsError::DimensionMismatch {
                expected: d,
                found: m.nrows(),
            });
        }
        Ok(())
    }
}
