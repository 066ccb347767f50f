use num_complex::Complex64 as C64;

use super::pauli::i_pow;
use super::{apply_local, bit_mask, check_qubits, linalg, Matrix, PauliString, StateVector, MAX_DENSITY_QUBITS, NORM_TOL};
use crate::{QcsError, Result};

const PSD_TOL: f64 = 1e-9;

/// Hermitian, unit-trace, positive semidefinite operator on `n_qubits`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    m: Matrix,
}

/// `left * m * right^dagger` with both factors acting on `targets`.
/// Works for arbitrary (not necessarily Hermitian) `m`.
pub(crate) fn conjugate_local(
    m: &Matrix,
    n_qubits: usize,
    targets: &[usize],
    left: &Matrix,
    right: &Matrix,
) -> Matrix {
    let dim = m.nrows();
    let mut out = m.clone();
    for col in out.as_mut_slice().chunks_mut(dim) {
        apply_local(col, n_qubits, targets, left);
    }
    let mut t = out.transpose();
    let right_conj = right.map(|z| z.conj());
    for col in t.as_mut_slice().chunks_mut(dim) {
        apply_local(col, n_qubits, targets, &right_conj);
    }
    t.transpose()
}

/// `sum_k K m K^dagger` for Kraus operators on `targets`.
pub(crate) fn kraus_local(m: &Matrix, n_qubits: usize, targets: &[usize], ops: &[Matrix]) -> Matrix {
    let dim = m.nrows();
    ops.iter().fold(Matrix::zeros(dim, dim), |acc, k| {
        acc + conjugate_local(m, n_qubits, targets, k, k)
    })
}

impl DensityMatrix {
    pub fn from_pure(s: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        DensityMatrix {
            n_qubits: s.n_qubits(),
            m: &v * v.adjoint(),
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_cap(n_qubits)?;
        let dim = 1usize << n_qubits;
        Ok(DensityMatrix {
            n_qubits,
            m: Matrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0),
        })
    }

    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        let r = Self::from_matrix_unchecked(m)?;
        r.validate()?;
        Ok(r)
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim || dim == 0 || !dim.is_power_of_two() {
            return Err(QcsError::invalid(format!(
                "density matrix shape {:?} is not square with power-of-two side",
                m.shape()
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_cap(n_qubits)?;
        Ok(DensityMatrix { n_qubits, m })
    }

    /// Convex combination `sum_k w_k |psi_k><psi_k|`, weights renormalised.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (f64, &'a StateVector)>) -> Result<Self> {
        let mut acc: Option<Matrix> = None;
        let mut total = 0.0;
        let mut n_qubits = 0;
        for (w, s) in parts {
            if !(w >= 0.0) {
                return Err(QcsError::invalid("mixture weights must be non-negative"));
            }
            let v = nalgebra::DVector::from_column_slice(s.amplitudes());
            let term = (&v * v.adjoint()) * C64::new(w, 0.0);
            match acc.as_mut() {
                None => {
                    n_qubits = s.n_qubits();
                    check_cap(n_qubits)?;
                    acc = Some(term);
                }
                Some(a) => {
                    if s.n_qubits() != n_qubits {
                        return Err(QcsError::DimensionMismatch {
                            expected: n_qubits,
                            found: s.n_qubits(),
                        });
                    }
                    *a += term;
                }
            }
            total += w;
        }
        let m = acc.ok_or_else(|| QcsError::invalid("empty mixture"))?;
        if !(total > 0.0) {
            return Err(QcsError::invalid("mixture has zero total weight"));
        }
        Ok(DensityMatrix {
            n_qubits,
            m: m / C64::new(total, 0.0),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re.max(0.0)).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.m)
    }

    /// Raw `Tr(rho P)`.
    pub fn pauli_expectation(&self, p: &PauliString) -> C64 {
        assert_eq!(p.len(), self.n_qubits, "Pauli string length mismatch");
        let (x, z, ny) = p.masks();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            let term = self.m[(i, i ^ x)];
            if (i & z).count_ones() % 2 == 1 {
                acc -= term;
            } else {
                acc += term;
            }
        }
        acc * i_pow(ny)
    }

    /// `<psi|rho|psi>`.
    pub fn sandwich(&self, psi: &StateVector) -> f64 {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        (v.adjoint() * &self.m * &v)[(0, 0)].re
    }

    pub fn apply_unitary(&mut self, targets: &[usize], u: &Matrix) -> Result<()> {
        self.check_local(targets, u)?;
        let dev = linalg::unitarity_error(u);
        if dev > NORM_TOL {
            return Err(QcsError::NonUnitary { deviation: dev });
        }
        self.m = conjugate_local(&self.m, self.n_qubits, targets, u, u);
        Ok(())
    }

    /// `rho -> sum_k K rho K^dagger` on `targets`. Completeness is the
    /// caller's responsibility.
    pub fn apply_kraus(&mut self, targets: &[usize], ops: &[Matrix]) -> Result<()> {
        for k in ops {
            self.check_local(targets, k)?;
        }
        self.m = kraus_local(&self.m, self.n_qubits, targets, ops);
        Ok(())
    }

    pub fn check_positive(&self) -> Result<()> {
        let min = self
            .eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(QcsError::NotPositive {
                min_eigenvalue: min,
            });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let herm = linalg::hermiticity_error(&self.m);
        if herm > NORM_TOL {
            return Err(QcsError::OutOfRange {
                name: "hermiticity error",
                value: herm,
                range: "<= 1e-10",
            });
        }
        let tr = self.m.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(QcsError::OutOfRange {
                name: "trace",
                value: tr.re,
                range: "1 +/- 1e-10",
            });
        }
        self.check_positive()
    }

    /// Reduced state on `keep`, qubits ordered ascending.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(QcsError::invalid("partial trace needs a non-empty keep set"));
        }
        check_qubits(keep, self.n_qubits)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let n = self.n_qubits;
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let spread = |bits: usize, qubits: &[usize]| -> usize {
            let k = qubits.len();
            qubits
                .iter()
                .enumerate()
                .filter(|(j, _)| bits & (1 << (k - 1 - j)) != 0)
                .map(|(_, &q)| bit_mask(n, q))
                .sum()
        };
        let kd = 1usize << keep.len();
        let td = 1usize << traced.len();
        let keep_idx: Vec<usize> = (0..kd).map(|a| spread(a, &keep)).collect();
        let trace_idx: Vec<usize> = (0..td).map(|e| spread(e, &traced)).collect();
        let mut out = Matrix::zeros(kd, kd);
        for a in 0..kd {
            for b in 0..kd {
                let mut acc = C64::new(0.0, 0.0);
                for e in &trace_idx {
                    acc += self.m[(keep_idx[a] | e, keep_idx[b] | e)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(DensityMatrix {
            n_qubits: keep.len(),
            m: out,
        })
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

fn check_cap(n_qubits: usize) -> Result<()> {
    if n_qubits > MAX_DENSITY_QUBITS {
        return Err(QcsError::TooManyQubits {
            n_qubits,
            cap: MAX_DENSITY_QUBITS,
        });
    }
    Ok(())
}
