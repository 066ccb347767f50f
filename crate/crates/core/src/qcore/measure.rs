use rand::Rng;

use super::{bit_mask, check_qubits, StateVector};
use crate::{QcsError, Result};

const IMPOSSIBLE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    /// One bit per measured index, in the order requested.
    pub bits: Vec<u8>,
    /// Post-measurement state on the full register, renormalised.
    pub state: StateVector,
    /// Born probability of the observed outcome.
    pub probability: f64,
}

fn pattern_of(i: usize, n: usize, indices: &[usize]) -> usize {
    indices.iter().fold(0, |acc, &q| (acc << 1) | usize::from(i & bit_mask(n, q) != 0))
}

/// Projective computational-basis measurement of `indices`.
pub fn measure_qubits<R: Rng + ?Sized>(
    state: &StateVector,
    indices: &[usize],
    rng: &mut R,
) -> Result<Measurement> {
    check_qubits(indices, state.n_qubits())?;
    let n = state.n_qubits();
    let mut dist = vec![0.0; 1 << indices.len()];
    for (i, a) in state.amplitudes().iter().enumerate() {
        dist[pattern_of(i, n, indices)] += a.norm_sqr();
    }
    let total: f64 = dist.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut outcome = dist.len() - 1;
    for (k, p) in dist.iter().enumerate() {
        if u < *p {
            outcome = k;
            break;
        }
        u -= p;
    }
    // guard against landing on a zero-probability tail through rounding
    if dist[outcome] <= 0.0 {
        outcome = dist
            .iter()
            .enumerate()
            .rev()
            .find(|(_, p)| **p > 0.0)
            .map(|(k, _)| k)
            .unwrap_or(outcome);
    }
    let bits: Vec<u8> = (0..indices.len())
        .map(|j| ((outcome >> (indices.len() - 1 - j)) & 1) as u8)
        .collect();
    let probability = dist[outcome];
    let amps = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| if pattern_of(i, n, indices) == outcome { *a } else { Default::default() })
        .collect();
    Ok(Measurement {
        bits,
        state: StateVector::from_unnormalized(amps)?,
        probability,
    })
}

/// Deterministically projects `indices` onto `bits` and removes those qubits.
/// Returns the renormalised state on the remaining qubits (in ascending
/// order) and the success probability.
pub fn postselect(state: &StateVector, indices: &[usize], bits: &[u8]) -> Result<(StateVector, f64)> {
    check_qubits(indices, state.n_qubits())?;
    if bits.len() != indices.len() {
        return Err(QcsError::DimensionMismatch {
            expected: indices.len(),
            found: bits.len(),
        });
    }
    if bits.iter().any(|b| *b > 1) {
        return Err(QcsError::invalid("postselection bits must be 0 or 1"));
    }
    let n = state.n_qubits();
    let want = bits.iter().fold(0usize, |acc, b| (acc << 1) | *b as usize);
    let rest: Vec<usize> = (0..n).filter(|q| !indices.contains(q)).collect();
    let mut amps = vec![Default::default(); 1 << rest.len()];
    let mut probability = 0.0;
    for (i, a) in state.amplitudes().iter().enumerate() {
        if pattern_of(i, n, indices) == want {
            amps[pattern_of(i, n, &rest)] = *a;
            probability += a.norm_sqr();
        }
    }
    if probability < IMPOSSIBLE {
        return Err(QcsError::ImpossiblePostselection { probability });
    }
    Ok((StateVector::from_unnormalized(amps)?, probability))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::GateOp;
    use crate::rng;

    fn bell() -> StateVector {
        StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn deterministic_measurement() {
        let mut r = rng::seeded(1);
        let m = measure_qubits(&StateVector::zero_state(1), &[0], &mut r).unwrap();
        assert_eq!(m.bits, vec![0]);
        assert_eq!(m.state, StateVector::zero_state(1));
        assert!((m.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plus_measurement_is_fair() {
        // 10^4 trials, binomial sd = 50; 3 sigma = 150
        let plus = StateVector::plus_state(1);
        let mut r = rng::seeded(2);
        let ones: usize = (0..10_000)
            .map(|_| {
                let m = measure_qubits(&plus, &[0], &mut r).unwrap();
                assert!((m.probability - 0.5).abs() < 1e-12);
                m.bits[0] as usize
            })
            .sum();
        assert!((ones as f64 - 5000.0).abs() < 150.0, "ones = {ones}");
    }

    #[test]
    fn bell_bits_agree() {
        let mut r = rng::seeded(3);
        for _ in 0..200 {
            let m = measure_qubits(&bell(), &[0, 1], &mut r).unwrap();
            assert_eq!(m.bits[0], m.bits[1]);
        }
    }

    #[test]
    fn postselect_examples() {
        let s = StateVector::zero_state(1).tensor(&StateVector::plus_state(1));
        let (rest, p) = postselect(&s, &[0], &[0]).unwrap();
        assert_eq!(rest.n_qubits(), 1);
        assert!((rest.inner(&StateVector::plus_state(1)).norm() - 1.0).abs() < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);

        let (rest, p) = postselect(&bell(), &[0], &[0]).unwrap();
        assert!((rest.inner(&StateVector::zero_state(1)).norm() - 1.0).abs() < 1e-12);
        assert!((p - 0.5).abs() < 1e-12);

        let one = StateVector::zero_state(1).apply_gate(&GateOp::x(0)).unwrap();
        assert!(matches!(
            postselect(&one, &[0], &[0]),
            Err(QcsError::ImpossiblePostselection { .. })
        ));
        assert!(postselect(&one, &[0], &[0, 1]).is_err());
    }
}
