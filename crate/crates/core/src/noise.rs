//! Noise models: axis-flip, depolarizing and amplitude-damping channels as
//! exact Kraus maps on density matrices, their stochastic Pauli unravelings on
//! statevectors, and multinomial shot sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::qcore::{DensityMatrix, Matrix, Pauli, PauliString, StateVector};
use crate::{QcsError, Result};

const COMPLETENESS_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    BitFlip,
    PhaseFlip,
    BitPhaseFlip,
    Depolarizing,
    AmpDamp,
}

impl NoiseKind {
    pub const CHANNELS: [NoiseKind; 5] = [
        NoiseKind::BitFlip,
        NoiseKind::PhaseFlip,
        NoiseKind::BitPhaseFlip,
        NoiseKind::Depolarizing,
        NoiseKind::AmpDamp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::BitFlip => "bitflip",
            NoiseKind::PhaseFlip => "phaseflip",
            NoiseKind::BitPhaseFlip => "bitphaseflip",
            NoiseKind::Depolarizing => "depolarizing",
            NoiseKind::AmpDamp => "ampdamp",
        }
    }

    /// Whether the channel has a Pauli unraveling usable on statevectors.
    pub fn has_pauli_unraveling(self) -> bool {
        !matches!(self, NoiseKind::AmpDamp)
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = QcsError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "none" | "noiseless" => NoiseKind::None,
            "bitflip" | "bit-flip" => NoiseKind::BitFlip,
            "phaseflip" | "phase-flip" | "dephasing" => NoiseKind::PhaseFlip,
            "bitphaseflip" | "bit-phase-flip" => NoiseKind::BitPhaseFlip,
            "depolarizing" | "depolarising" => NoiseKind::Depolarizing,
            "ampdamp" | "amplitude-damping" | "amplitudedamping" => NoiseKind::AmpDamp,
            other => return Err(QcsError::invalid(format!("unknown noise kind {other:?}"))),
        })
    }
}

/// Which channel to inject, how strongly, and on which qubits. Noise is
/// injected after every gate application that touches a target qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    kind: NoiseKind,
    probability: f64,
    targets: Vec<usize>,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, probability: f64, targets: Vec<usize>) -> Result<Self> {
        check_probability(probability)?;
        if kind != NoiseKind::None && targets.is_empty() {
            return Err(QcsError::invalid("noise targets must be non-empty"));
        }
        Ok(NoiseSpec {
            kind,
            probability,
            targets,
        })
    }

    pub fn none() -> Self {
        NoiseSpec {
            kind: NoiseKind::None,
            probability: 0.0,
            targets: Vec::new(),
        }
    }

    /// Noise on every qubit of an `n_qubits` register.
    pub fn on_all(kind: NoiseKind, probability: f64, n_qubits: usize) -> Result<Self> {
        Self::new(kind, probability, (0..n_qubits).collect())
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn is_noiseless(&self) -> bool {
        self.kind == NoiseKind::None || self.probability == 0.0
    }

    pub fn channel(&self) -> Result<KrausChannel> {
        channel_kraus(self.kind, self.probability)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QcsError::OutOfRange {
            name: "noise probability",
            value: p,
            range: "[0, 1]",
        });
    }
    Ok(())
}

/// Single-qubit CPTP map in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    operators: Vec<Matrix>,
    label: String,
}

impl KrausChannel {
    pub fn new(operators: Vec<Matrix>, label: impl Into<String>) -> Result<Self> {
        if operators.is_empty() {
            return Err(QcsError::invalid("a channel needs at least one Kraus operator"));
        }
        if operators.iter().any(|k| k.shape() != (2, 2)) {
            return Err(QcsError::invalid("Kraus operators must be 2x2"));
        }
        let ch = KrausChannel {
            operators,
            label: label.into(),
        };
        let err = ch.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(QcsError::OutOfRange {
                name: "Kraus completeness error",
                value: err,
                range: "<= 1e-10",
            });
        }
        Ok(ch)
    }

    pub fn operators(&self) -> &[Matrix] {
        &self.operators
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `max |(sum K^dagger K - I)_ij|`.
    pub fn completeness_error(&self) -> f64 {
        let sum = self
            .operators
            .iter()
            .fold(Matrix::zeros(2, 2), |acc, k| acc + k.adjoint() * k);
        (sum - Matrix::identity(2, 2))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

fn scaled(p: Pauli, w: f64) -> Matrix {
    p.matrix() * C64::new(w.sqrt(), 0.0)
}

/// Kraus operators for a channel of the given kind and strength. Operators
/// with zero weight are dropped, so `param = 0` yields the identity alone.
pub fn channel_kraus(kind: NoiseKind, param: f64) -> Result<KrausChannel> {
    check_probability(param)?;
    let weighted: Vec<(Pauli, f64)> = match kind {
        NoiseKind::None => vec![(Pauli::I, 1.0)],
        NoiseKind::BitFlip => vec![(Pauli::I, 1.0 - param), (Pauli::X, param)],
        NoiseKind::PhaseFlip => vec![(Pauli::I, 1.0 - param), (Pauli::Z, param)],
        NoiseKind::BitPhaseFlip => vec![(Pauli::I, 1.0 - param), (Pauli::Y, param)],
        NoiseKind::Depolarizing => vec![
            (Pauli::I, 1.0 - 0.75 * param),
            (Pauli::X, 0.25 * param),
            (Pauli::Y, 0.25 * param),
            (Pauli::Z, 0.25 * param),
        ],
        NoiseKind::AmpDamp => {
            let o = C64::new(0.0, 0.0);
            let k0 = Matrix::from_row_slice(
                2,
                2,
                &[C64::new(1.0, 0.0), o, o, C64::new((1.0 - param).sqrt(), 0.0)],
            );
            let k1 = Matrix::from_row_slice(2, 2, &[o, C64::new(param.sqrt(), 0.0), o, o]);
            let ops = if param == 0.0 { vec![k0] } else { vec![k0, k1] };
            return KrausChannel::new(ops, kind.as_str());
        }
    };
    let ops = weighted
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(p, w)| scaled(p, w))
        .collect();
    KrausChannel::new(ops, kind.as_str())
}

/// `rho -> sum_k K rho K^dagger` with the channel on `qubit`.
pub fn apply_channel(rho: &DensityMatrix, channel: &KrausChannel, qubit: usize) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    out.apply_kraus(&[qubit], channel.operators())?;
    Ok(out)
}

/// Applies the channel of `spec` to each listed qubit of a density matrix.
pub fn apply_channel_on(rho: &mut DensityMatrix, spec: &NoiseSpec, qubits: &[usize]) -> Result<()> {
    if spec.is_noiseless() || qubits.is_empty() {
        return Ok(());
    }
    let ch = spec.channel()?;
    for &q in qubits {
        rho.apply_kraus(&[q], ch.operators())?;
    }
    Ok(())
}

/// Draws the Pauli error (if any) for one qubit under the unraveling of
/// `kind`. Exactly two uniforms are consumed per call regardless of the
/// outcome, so streams stay aligned across probabilities and error sets grow
/// monotonically with `p` under a fixed seed.
pub fn sample_pauli_error<R: Rng + ?Sized>(kind: NoiseKind, p: f64, rng: &mut R) -> Result<Option<Pauli>> {
    let fire: f64 = rng.random();
    let which: f64 = rng.random();
    Ok(match kind {
        NoiseKind::None => None,
        NoiseKind::BitFlip => (fire < p).then_some(Pauli::X),
        NoiseKind::PhaseFlip => (fire < p).then_some(Pauli::Z),
        NoiseKind::BitPhaseFlip => (fire < p).then_some(Pauli::Y),
        NoiseKind::Depolarizing => (fire < 0.75 * p).then(|| {
            if which < 1.0 / 3.0 {
                Pauli::X
            } else if which < 2.0 / 3.0 {
                Pauli::Y
            } else {
                Pauli::Z
            }
        }),
        NoiseKind::AmpDamp => return Err(QcsError::DensityMatrixOnly("amplitude damping")),
    })
}

/// One stochastic trajectory step: a sampled Pauli error on each target.
pub fn inject_stochastic<R: Rng + ?Sized>(state: &StateVector, spec: &NoiseSpec, rng: &mut R) -> Result<StateVector> {
    let mut out = state.clone();
    inject_in_place(&mut out, spec, spec.targets(), rng)?;
    Ok(out)
}

/// Samples and applies errors on `qubits` (which the caller has already
/// intersected with the noise targets). Returns whether any error fired.
pub(crate) fn inject_in_place<R: Rng + ?Sized>(
    state: &mut StateVector,
    spec: &NoiseSpec,
    qubits: &[usize],
    rng: &mut R,
) -> Result<bool> {
    if spec.kind() == NoiseKind::AmpDamp {
        return Err(QcsError::DensityMatrixOnly("amplitude damping"));
    }
    if spec.kind() == NoiseKind::None {
        return Ok(false);
    }
    let n = state.n_qubits();
    let mut fired = false;
    for &q in qubits {
        if q >= n {
            return Err(QcsError::InvalidQubit { index: q, n_qubits: n });
        }
        if let Some(p) = sample_pauli_error(spec.kind(), spec.probability(), rng)? {
            state.apply_pauli(&PauliString::single(n, q, p));
            fired = true;
        }
    }
    Ok(fired)
}

/// Multinomial counts over outcomes with the given probabilities, drawn as a
/// chain of conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(probs: &[f64], n_shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n_shots;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (k, p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if k + 1 == probs.len() || q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    counts
}

pub(crate) fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|q| if index & (1 << (n_qubits - 1 - q)) != 0 { '1' } else { '0' })
        .collect()
}

/// Histogram of `n_shots` full-register measurements, keyed by bitstring
/// (qubit 0 leftmost). Outcomes never observed are omitted.
pub fn sample_counts<R: Rng + ?Sized>(state: &StateVector, n_shots: u64, rng: &mut R) -> Result<BTreeMap<String, u64>> {
    if n_shots == 0 {
        return Err(QcsError::invalid("n_shots must be at least 1"));
    }
    let counts = multinomial(&state.probabilities(), n_shots, rng);
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(i, c)| (bitstring(i, state.n_qubits()), c))
        .collect())
}
