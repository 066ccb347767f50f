use num_complex::Complex64 as C64;

use super::{check_qubits, linalg, Matrix, Pauli, NORM_TOL};
use crate::{QcsError, Result};

/// A validated 1- or 2-qubit unitary bound to target qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    unitary: Matrix,
    targets: Vec<usize>,
    label: String,
}

impl GateOp {
    pub fn new(unitary: Matrix, targets: Vec<usize>, label: impl Into<String>) -> Result<Self> {
        if targets.is_empty() || targets.len() > 2 {
            return Err(QcsError::invalid("gates act on one or two qubits"));
        }
        let d = 1usize << targets.len();
        if unitary.shape() != (d, d) {
            return Err(QcsError::DimensionMismatch {
                expected: d,
                found: unitary.nrows(),
            });
        }
        check_qubits(&targets, usize::MAX)?;
        let dev = linalg::unitarity_error(&unitary);
        if dev > NORM_TOL {
            return Err(QcsError::NonUnitary { deviation: dev });
        }
        Ok(GateOp {
            unitary,
            targets,
            label: label.into(),
        })
    }

    fn fixed(unitary: Matrix, targets: Vec<usize>, label: &str) -> Self {
        GateOp::new(unitary, targets, label).expect("built-in gate is valid")
    }

    pub fn unitary(&self) -> &Matrix {
        &self.unitary
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn x(q: usize) -> Self {
        Self::fixed(Pauli::X.matrix(), vec![q], "x")
    }

    pub fn y(q: usize) -> Self {
        Self::fixed(Pauli::Y.matrix(), vec![q], "y")
    }

    pub fn z(q: usize) -> Self {
        Self::fixed(Pauli::Z.matrix(), vec![q], "z")
    }

    pub fn h(q: usize) -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::fixed(Matrix::from_row_slice(2, 2, &[s, s, s, -s]), vec![q], "h")
    }

    pub fn ry(q: usize, theta: f64) -> Self {
        Self::fixed(ry_matrix(theta), vec![q], "ry")
    }

    pub fn rz(q: usize, theta: f64) -> Self {
        let m = Matrix::from_row_slice(
            2,
            2,
            &[
                C64::from_polar(1.0, -theta / 2.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::from_polar(1.0, theta / 2.0),
            ],
        );
        Self::fixed(m, vec![q], "rz")
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        #[rustfmt::skip]
        let m = Matrix::from_row_slice(4, 4, &[
            l, o, o, o,
            o, l, o, o,
            o, o, o, l,
            o, o, l, o,
        ]);
        Self::fixed(m, vec![control, target], "cnot")
    }
}

/// `Ry(theta) = exp(-i theta Y / 2)`; maps `|0>` to `cos(theta/2)|0> + sin(theta/2)|1>`.
pub fn ry_matrix(theta: f64) -> Matrix {
    let (s, c) = (theta / 2.0).sin_cos();
    Matrix::from_row_slice(
        2,
        2,
        &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)],
    )
}
