//! Small dense helpers over nalgebra for Hermitian matrices.

use nalgebra::SymmetricEigen;
use num_complex::Complex64 as C64;

use super::Matrix;

/// Eigen-decomposition of a Hermitian matrix: real eigenvalues and a unitary
/// whose columns are the eigenvectors.
pub fn eigh(m: &Matrix) -> (Vec<f64>, Matrix) {
    let sym = hermitize(m);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub fn eigvalsh(m: &Matrix) -> Vec<f64> {
    eigh(m).0
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_map(m: &Matrix, f: impl Fn(f64) -> C64) -> Matrix {
    let (vals, vecs) = eigh(m);
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = f(v);
        for x in scaled.column_mut(j).iter_mut() {
            *x *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// `exp(-i t A)` for Hermitian `A`.
pub fn unitary_exp(a: &Matrix, t: f64) -> Matrix {
    hermitian_map(a, |l| C64::from_polar(1.0, -t * l))
}

pub fn psd_sqrt(m: &Matrix) -> Matrix {
    hermitian_map(m, |l| C64::new(l.max(0.0).sqrt(), 0.0))
}

fn hermitize(m: &Matrix) -> Matrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn hermiticity_error(m: &Matrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn unitarity_error(u: &Matrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - Matrix::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
