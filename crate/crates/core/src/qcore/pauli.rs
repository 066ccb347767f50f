//! Pauli strings, weighted terms and Hamiltonians.
//!
//! Strings are written with qubit 0 as the leftmost letter, so `"ZIIII"` is
//! Z on qubit 0 of a five-qubit register.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use super::{bit_mask, Matrix};
use crate::{QcsError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn matrix(self) -> Matrix {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => Matrix::from_row_slice(2, 2, &[l, o, o, l]),
            Pauli::X => Matrix::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => Matrix::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => Matrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    /// `self * other = phase * result`.
    pub fn mul(self, other: Pauli) -> (C64, Pauli) {
        use Pauli::*;
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match (self, other) {
            (I, p) | (p, I) => (one, p),
            (a, b) if a == b => (one, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
            _ => unreachable!(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    ops: Vec<Pauli>,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Self {
        PauliString { ops }
    }

    pub fn identity(n_qubits: usize) -> Self {
        PauliString {
            ops: vec![Pauli::I; n_qubits],
        }
    }

    pub fn single(n_qubits: usize, qubit: usize, pauli: Pauli) -> Self {
        let mut s = Self::identity(n_qubits);
        s.ops[qubit] = pauli;
        s
    }

    /// Enumerates all `4^k` strings on `k` qubits in lexicographic order
    /// (I < X < Y < Z, qubit 0 most significant). The identity comes first.
    pub fn all(k: usize) -> Vec<PauliString> {
        (0..1usize << (2 * k))
            .map(|code| {
                let ops = (0..k)
                    .map(|q| Pauli::ALL[(code >> (2 * (k - 1 - q))) & 3])
                    .collect();
                PauliString { ops }
            })
            .collect()
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|p| *p == Pauli::I)
    }

    pub fn is_diagonal(&self) -> bool {
        self.ops.iter().all(|p| matches!(p, Pauli::I | Pauli::Z))
    }

    /// Qubits acted on non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.ops
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != Pauli::I)
            .map(|(q, _)| q)
            .collect()
    }

    pub fn mul(&self, other: &PauliString) -> (C64, PauliString) {
        assert_eq!(self.len(), other.len(), "Pauli string length mismatch");
        let mut phase = C64::new(1.0, 0.0);
        let ops = self
            .ops
            .iter()
            .zip(&other.ops)
            .map(|(a, b)| {
                let (ph, p) = a.mul(*b);
                phase *= ph;
                p
            })
            .collect();
        (phase, PauliString { ops })
    }

    /// Places a string defined on `positions.len()` qubits into an
    /// `n_qubits` register.
    pub fn embed(&self, positions: &[usize], n_qubits: usize) -> PauliString {
        assert_eq!(self.len(), positions.len());
        let mut out = Self::identity(n_qubits);
        for (p, &q) in self.ops.iter().zip(positions) {
            out.ops[q] = *p;
        }
        out
    }

    pub fn restrict(&self, positions: &[usize]) -> PauliString {
        PauliString {
            ops: positions.iter().map(|&q| self.ops[q]).collect(),
        }
    }

    /// Bit-flip mask, phase mask (Y and Z positions) and the number of Ys,
    /// in basis-index bit positions.
    pub(crate) fn masks(&self) -> (usize, usize, usize) {
        let n = self.len();
        let (mut x, mut z, mut ny) = (0usize, 0usize, 0usize);
        for (q, p) in self.ops.iter().enumerate() {
            let b = bit_mask(n, q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= b,
                Pauli::Y => {
                    x |= b;
                    z |= b;
                    ny += 1;
                }
                Pauli::Z => z |= b,
            }
        }
        (x, z, ny)
    }

    /// Dense `2^k x 2^k` matrix, qubit 0 as the most significant factor.
    pub fn matrix(&self) -> Matrix {
        self.ops
            .iter()
            .fold(Matrix::from_element(1, 1, C64::new(1.0, 0.0)), |acc, p| {
                acc.kronecker(&p.matrix())
            })
    }
}

/// `i^k` for small non-negative `k`.
pub(crate) fn i_pow(k: usize) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.ops {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = QcsError;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(QcsError::invalid("empty Pauli string"));
        }
        s.chars()
            .map(|c| {
                Pauli::from_char(c)
                    .ok_or_else(|| QcsError::invalid(format!("invalid Pauli letter {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString::new)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub axes: PauliString,
}

impl PauliTerm {
    pub fn new(coefficient: f64, axes: PauliString) -> Self {
        PauliTerm { coefficient, axes }
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.coefficient < 0.0 { '-' } else { '+' };
        let mag = self.coefficient.abs();
        if mag == 1.0 {
            write!(f, "{sign}{}", self.axes)
        } else {
            write!(f, "{sign}{mag}{}", self.axes)
        }
    }
}

/// A non-empty sum of Pauli terms on a fixed register size.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    terms: Vec<PauliTerm>,
    n_qubits: usize,
}

impl Hamiltonian {
    pub fn new(terms: Vec<PauliTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| QcsError::invalid("Hamiltonian needs at least one term"))?;
        let n_qubits = first.axes.len();
        if n_qubits == 0 {
            return Err(QcsError::invalid("Pauli terms must act on at least one qubit"));
        }
        for t in &terms {
            if t.axes.len() != n_qubits {
                return Err(QcsError::DimensionMismatch {
                    expected: n_qubits,
                    found: t.axes.len(),
                });
            }
            if !t.coefficient.is_finite() {
                return Err(QcsError::invalid("non-finite Hamiltonian coefficient"));
            }
        }
        Ok(Hamiltonian { terms, n_qubits })
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.axes.is_diagonal())
    }

    pub fn matrix(&self) -> Matrix {
        let dim = 1usize << self.n_qubits;
        self.terms.iter().fold(Matrix::zeros(dim, dim), |acc, t| {
            acc + t.axes.matrix() * C64::new(t.coefficient, 0.0)
        })
    }
}

impl fmt::Display for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        write!(f, "{}", words.join(" "))
    }
}

/// Parses whitespace-separated signed Pauli words such as `"-ZII -IIZ"` or
/// `"+0.5XX -ZZ"`. A bare sign token applies to the following word.
impl FromStr for Hamiltonian {
    type Err = QcsError;

    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut pending: Option<f64> = None;
        for tok in s.split_whitespace() {
            if tok == "+" || tok == "-" {
                if pending.is_some() {
                    return Err(QcsError::invalid(format!("dangling sign in {s:?}")));
                }
                pending = Some(if tok == "-" { -1.0 } else { 1.0 });
                continue;
            }
            let mut term = parse_word(tok)?;
            if let Some(sign) = pending.take() {
                term.coefficient *= sign;
            }
            terms.push(term);
        }
        if pending.is_some() {
            return Err(QcsError::invalid(format!("dangling sign in {s:?}")));
        }
        Hamiltonian::new(terms)
    }
}

fn parse_word(tok: &str) -> Result<PauliTerm> {
    let bad = || QcsError::invalid(format!("malformed Pauli word {tok:?}"));
    let (sign, rest) = match tok.as_bytes()[0] {
        b'+' => (1.0, &tok[1..]),
        b'-' => (-1.0, &tok[1..]),
        _ => (1.0, tok),
    };
    let split = rest
        .find(|c: char| Pauli::from_char(c).is_some())
        .ok_or_else(bad)?;
    let (num, letters) = rest.split_at(split);
    let num = num.strip_suffix('*').unwrap_or(num);
    let magnitude = if num.is_empty() {
        1.0
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    if !magnitude.is_finite() || num.starts_with(['+', '-']) {
        return Err(bad());
    }
    let axes: PauliString = letters.parse().map_err(|_| bad())?;
    Ok(PauliTerm::new(sign * magnitude, axes))
}
