//! Quantum-average Born machines. A training set `D` of encoded signals
//! becomes the normalized superposition of its elements, built either by
//! direct vector addition or by simulating the multiplexed preparation
//! circuit with postselected control register. Noisy training runs the same
//! circuit with errors after every multiplexed layer.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataio::{sample_subsets, Dataset};
use crate::encoding::{encoding_angle, PixelMap, Signal};
use crate::noise::{sample_pauli_error, NoiseKind, NoiseSpec};
use crate::qcore::{
    fidelity, postselect, ry_matrix, DensityMatrix, GateOp, Matrix, QuantumState, StateVector,
    MAX_DENSITY_QUBITS, MAX_STATE_QUBITS,
};
use crate::rng;
use crate::{QcsError, Result};

/// Largest training set the circuit construction will simulate.
pub const MAX_CIRCUIT_SAMPLES: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    samples: Vec<Signal>,
    map: PixelMap,
}

impl TrainingSet {
    pub fn new(samples: Vec<Signal>, map: PixelMap) -> Result<Self> {
        if samples.is_empty() {
            return Err(QcsError::invalid("training set is empty"));
        }
        if let Some(s) = samples.iter().find(|s| s.len() != map.len()) {
            return Err(QcsError::DimensionMismatch {
                expected: map.len(),
                found: s.len(),
            });
        }
        if map.len() > MAX_STATE_QUBITS {
            return Err(QcsError::TooManyQubits {
                n_qubits: map.len(),
                cap: MAX_STATE_QUBITS,
            });
        }
        Ok(TrainingSet { samples, map })
    }

    /// Training set of the dataset samples at `indices`.
    pub fn from_indices(ds: &Dataset, indices: &[usize], map: PixelMap) -> Result<Self> {
        let samples = indices
            .iter()
            .map(|&i| {
                ds.samples()
                    .get(i)
                    .cloned()
                    .ok_or_else(|| QcsError::invalid(format!("sample index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, map)
    }

    pub fn samples(&self) -> &[Signal] {
        &self.samples
    }

    pub fn map(&self) -> &PixelMap {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_pixels(&self) -> usize {
        self.map.len()
    }

    /// Repeats the last sample until the size is a power of two.
    pub fn padded_to_power_of_two(&self) -> TrainingSet {
        let mut samples = self.samples.clone();
        let last = samples[samples.len() - 1].clone();
        samples.resize(self.len().next_power_of_two(), last);
        TrainingSet {
            samples,
            map: self.map.clone(),
        }
    }

    /// Ry angles, `angles[z][q]` for sample `z` and pixel `q`.
    fn angles(&self) -> Result<Vec<Vec<f64>>> {
        self.samples
            .iter()
            .map(|s| {
                s.pixels()
                    .iter()
                    .zip(self.map.midpoints())
                    .map(|(&y, &v)| encoding_angle(y, v))
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Direct,
    Circuit,
    NoisyMixture,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BornMachine {
    state: QuantumState,
    provenance: Provenance,
    training_size: usize,
}

impl BornMachine {
    pub fn new(state: QuantumState, provenance: Provenance, training_size: usize) -> Self {
        BornMachine {
            state,
            provenance,
            training_size,
        }
    }

    pub fn state(&self) -> &QuantumState {
        &self.state
    }

    pub fn into_state(self) -> QuantumState {
        self.state
    }

    pub fn n_pixels(&self) -> usize {
        self.state.n_qubits()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn training_size(&self) -> usize {
        self.training_size
    }

    pub fn fidelity(&self, other: &BornMachine) -> Result<f64> {
        fidelity(&self.state, &other.state)
    }

    /// The statevector, if this machine is pure.
    pub fn pure_state(&self) -> Option<&StateVector> {
        match &self.state {
            QuantumState::Pure(s) => Some(s),
            QuantumState::Mixed(_) => None,
        }
    }
}

/// Amplitudes of `sum_z |y_z>` (unnormalized) for a product-state encoding.
fn summed_products(angles: &[Vec<f64>], n: usize) -> Vec<C64> {
    let mut acc = vec![0.0f64; 1 << n];
    let mut prod = vec![0.0f64; 1 << n];
    for row in angles {
        prod[0] = 1.0;
        let mut len = 1;
        for &theta in row {
            let (s, c) = (theta / 2.0).sin_cos();
            for i in (0..len).rev() {
                let a = prod[i];
                prod[2 * i] = a * c;
                prod[2 * i + 1] = a * s;
            }
            len *= 2;
        }
        acc.iter_mut().zip(&prod).for_each(|(a, p)| *a += p);
    }
    acc.into_iter().map(|x| C64::new(x, 0.0)).collect()
}

/// `|Psi> ∝ sum_z |y_z>`, renormalized.
pub fn quantum_average_direct(d: &TrainingSet) -> Result<BornMachine> {
    let amps = summed_products(&d.angles()?, d.n_pixels());
    let state = StateVector::from_unnormalized(amps)?;
    Ok(BornMachine::new(QuantumState::Pure(state), Provenance::Direct, d.len()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitOutcome {
    pub machine: BornMachine,
    /// `||sum_z |y_z>||^2 / |D|^2`.
    pub success_probability: f64,
    /// Postselection probability observed in the simulated circuit.
    pub simulated_probability: f64,
    /// Repeat-until-success attempts, drawn geometrically.
    pub attempts: u64,
}

fn check_circuit_size(d: &TrainingSet) -> Result<usize> {
    if !d.len().is_power_of_two() {
        return Err(QcsError::invalid(format!(
            "the circuit construction needs a power-of-two training set, got {}",
            d.len()
        )));
    }
    if d.len() > MAX_CIRCUIT_SAMPLES {
        return Err(QcsError::OutOfRange {
            name: "training set size",
            value: d.len() as f64,
            range: "<= 256",
        });
    }
    let c = d.len().trailing_zeros() as usize;
    if c + d.n_pixels() > MAX_STATE_QUBITS {
        return Err(QcsError::TooManyQubits {
            n_qubits: c + d.n_pixels(),
            cap: MAX_STATE_QUBITS,
        });
    }
    Ok(c)
}

/// Simulates the preparation circuit: Hadamards on `log2 |D|` control
/// qubits, one multiplexed layer per sample applying that sample's Ry
/// rotations under the matching control pattern, Hadamards again, and
/// postselection of every control on `0`. Controls are qubits
/// `0..c`, pixels follow.
pub fn quantum_average_circuit<R: Rng + ?Sized>(d: &TrainingSet, rng: &mut R) -> Result<CircuitOutcome> {
    let c = check_circuit_size(d)?;
    let n = d.n_pixels();
    let angles = d.angles()?;
    let mut state = StateVector::zero_state(c + n);
    let hadamards = |s: &mut StateVector| -> Result<()> {
        for q in 0..c {
            let h = GateOp::h(q);
            s.apply_unitary(h.targets(), h.unitary())?;
        }
        Ok(())
    };
    hadamards(&mut state)?;
    for (z, row) in angles.iter().enumerate() {
        let controls: Vec<(usize, bool)> = (0..c).map(|j| (j, (z >> (c - 1 - j)) & 1 == 1)).collect();
        for (q, &theta) in row.iter().enumerate() {
            state.apply_controlled(&controls, c + q, &ry_matrix(theta))?;
        }
    }
    hadamards(&mut state)?;
    let controls: Vec<usize> = (0..c).collect();
    let (collapsed, simulated_probability) = postselect(&state, &controls, &vec![0; c])?;

    let norm_sqr: f64 = summed_products(&angles, n).iter().map(|a| a.norm_sqr()).sum();
    let success_probability = norm_sqr / (d.len() * d.len()) as f64;
    let attempts = if success_probability >= 1.0 {
        1
    } else {
        Geometric::new(success_probability)
            .map_err(|e| QcsError::invalid(e.to_string()))?
            .sample(rng)
            + 1
    };
    Ok(CircuitOutcome {
        machine: BornMachine::new(QuantumState::Pure(collapsed), Provenance::Circuit, d.len()),
        success_probability,
        simulated_probability,
        attempts,
    })
}

fn state_targets(spec: &NoiseSpec, n: usize) -> Vec<usize> {
    spec.targets().iter().copied().filter(|&q| q < n).collect()
}

/// Postselected (unnormalized) state-register vector for one Pauli
/// trajectory of the layered circuit. `errors[k][j]` is the error after
/// layer `k` on the `j`-th noisy qubit; its squared norm is the success
/// probability of this trajectory.
fn layered_branch_sum(angles: &[Vec<f64>], n: usize, targets: &[usize], errors: &[Vec<Option<Matrix>>]) -> Vec<C64> {
    let l = angles.len();
    let id = Matrix::identity(2, 2);
    // per-qubit full error product F and running prefix P_z
    let mut full = vec![id.clone(); n];
    for layer in errors {
        for (j, e) in layer.iter().enumerate() {
            if let Some(m) = e {
                full[targets[j]] = m * &full[targets[j]];
            }
        }
    }
    let mut prefix = vec![id; n];
    let mut acc = vec![C64::new(0.0, 0.0); 1 << n];
    let mut prod = vec![C64::new(0.0, 0.0); 1 << n];
    for (z, row) in angles.iter().enumerate() {
        prod[0] = C64::new(1.0, 0.0);
        let mut len = 1;
        for (q, &theta) in row.iter().enumerate() {
            // S_z Ry P_z |0> with S_z = F P_z^dagger (Paulis are unitary)
            let m = &full[q] * prefix[q].adjoint() * ry_matrix(theta) * &prefix[q];
            let (a0, a1) = (m[(0, 0)], m[(1, 0)]);
            for i in (0..len).rev() {
                let a = prod[i];
                prod[2 * i] = a * a0;
                prod[2 * i + 1] = a * a1;
            }
            len *= 2;
        }
        acc.iter_mut().zip(&prod).for_each(|(a, p)| *a += p);
        for (j, e) in errors[z].iter().enumerate() {
            if let Some(m) = e {
                prefix[targets[j]] = m * &prefix[targets[j]];
            }
        }
    }
    let scale = 1.0 / l as f64;
    acc.iter_mut().for_each(|a| *a *= scale);
    acc
}

fn outer_add(m: &mut Matrix, v: &[C64], w: f64) {
    let d = v.len();
    for i in 0..d {
        let vi = v[i] * w;
        for j in 0..d {
            m[(i, j)] += vi * v[j].conj();
        }
    }
}

/// Noisy training by Pauli trajectories of the layered circuit. Each
/// multiplexed layer is followed by the sampled error on every targeted state
/// qubit; controls stay noiseless. Trajectory `t` draws from its own stream,
/// so results for different probabilities are coupled under one seed. Each
/// trajectory enters the mixture weighted by its postselection probability,
/// which is the distribution seen by repeat-until-success sampling.
/// Amplitude damping has no Pauli unraveling and is evolved exactly.
pub fn train_noisy_mixture(d: &TrainingSet, spec: &NoiseSpec, n_traj: usize, seed: u64) -> Result<BornMachine> {
    if n_traj < 1 {
        return Err(QcsError::invalid("n_traj must be at least 1"));
    }
    if !spec.kind().has_pauli_unraveling() {
        return train_noisy_exact(d, spec);
    }
    let n = d.n_pixels();
    if n > MAX_DENSITY_QUBITS {
        return Err(QcsError::TooManyQubits {
            n_qubits: n,
            cap: MAX_DENSITY_QUBITS,
        });
    }
    let angles = d.angles()?;
    let targets = state_targets(spec, n);
    let none = vec![vec![None; targets.len()]; d.len()];
    let clean = layered_branch_sum(&angles, n, &targets, &none);

    let kind = spec.kind();
    let p = spec.probability();
    let noisy: Vec<Option<Vec<C64>>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|t| -> Result<Option<Vec<C64>>> {
            let mut r = rng::stream(seed, t);
            let mut fired = false;
            let mut errors = Vec::with_capacity(d.len());
            for _ in 0..d.len() {
                let mut layer = Vec::with_capacity(targets.len());
                for _ in &targets {
                    let e = sample_pauli_error(kind, p, &mut r)?.map(|pl| pl.matrix());
                    fired |= e.is_some();
                    layer.push(e);
                }
                errors.push(layer);
            }
            Ok(fired.then(|| layered_branch_sum(&angles, n, &targets, &errors)))
        })
        .collect::<Result<_>>()?;

    let dim = 1 << n;
    let mut m = Matrix::zeros(dim, dim);
    let n_clean = noisy.iter().filter(|v| v.is_none()).count();
    outer_add(&mut m, &clean, n_clean as f64);
    for v in noisy.iter().flatten() {
        outer_add(&mut m, v, 1.0);
    }
    let tr = m.trace().re;
    if tr < 1e-300 {
        return Err(QcsError::ImpossiblePostselection { probability: tr });
    }
    m /= C64::new(tr, 0.0);
    let rho = DensityMatrix::from_matrix(m)?;
    Ok(BornMachine::new(QuantumState::Mixed(rho), Provenance::NoisyMixture, d.len()))
}

/// Exact density-matrix evolution of the noisy layered circuit. Tracks four
/// aggregated blocks of the control-indexed state: `u` (no layer applied on
/// either side), `l`/`r` (applied on the left/right only) and `t` (both).
/// Returns the postselected state and its success probability.
pub fn noisy_circuit_exact(d: &TrainingSet, spec: &NoiseSpec) -> Result<(DensityMatrix, f64)> {
    let n = d.n_pixels();
    if n > MAX_DENSITY_QUBITS {
        return Err(QcsError::TooManyQubits {
            n_qubits: n,
            cap: MAX_DENSITY_QUBITS,
        });
    }
    let targets = state_targets(spec, n);
    let channel = spec.channel()?;
    let phi = |m: &Matrix| -> Matrix {
        let mut out = m.clone();
        if !spec.is_noiseless() {
            for &q in &targets {
                out = crate::qcore::density::kraus_local(&out, n, &[q], channel.operators());
            }
        }
        out
    };
    let size = d.len() as f64;
    let dim = 1 << n;
    let mut u = Matrix::zeros(dim, dim);
    u[(0, 0)] = C64::new(1.0 / size, 0.0);
    let mut l = Matrix::zeros(dim, dim);
    let mut r = Matrix::zeros(dim, dim);
    let mut t = Matrix::zeros(dim, dim);
    for row in d.angles()? {
        let mut big = Matrix::identity(1, 1);
        for &theta in &row {
            big = big.kronecker(&ry_matrix(theta));
        }
        let bu = &big * &u;
        let bud = big.adjoint();
        let t_next = phi(&(&t + &l * &bud + &big * &r + &bu * &bud));
        let l_next = phi(&(&l + &bu));
        let r_next = phi(&(&r + &u * &bud));
        u = phi(&u);
        l = l_next;
        r = r_next;
        t = t_next;
    }
    let tr = t.trace().re;
    if tr < 1e-300 {
        return Err(QcsError::ImpossiblePostselection { probability: tr });
    }
    let success = tr / size;
    t /= C64::new(tr, 0.0);
    Ok((DensityMatrix::from_matrix(t)?, success))
}

/// Noisy training by exact density-matrix evolution; works for every channel.
pub fn train_noisy_exact(d: &TrainingSet, spec: &NoiseSpec) -> Result<BornMachine> {
    let (rho, _) = noisy_circuit_exact(d, spec)?;
    Ok(BornMachine::new(QuantumState::Mixed(rho), Provenance::NoisyMixture, d.len()))
}

/// Uniform superposition over all `2^n` basis states.
pub fn psi_even(n_pixels: usize) -> Result<BornMachine> {
    if n_pixels == 0 || n_pixels > MAX_STATE_QUBITS {
        return Err(QcsError::OutOfRange {
            name: "n_pixels",
            value: n_pixels as f64,
            range: "1..=20",
        });
    }
    Ok(BornMachine::new(
        QuantumState::Pure(StateVector::plus_state(n_pixels)),
        Provenance::Direct,
        1 << n_pixels,
    ))
}

/// Reference machine built from the train split, capped at `cap` samples
/// (a seeded random subset when the split is larger).
pub fn psi_global(ds: &Dataset, map: &PixelMap, cap: usize, seed: u64) -> Result<BornMachine> {
    let train = ds.train_indices();
    let indices = if train.len() > cap {
        sample_subsets(ds, cap, 1, seed)?.subsets.remove(0)
    } else {
        train.to_vec()
    };
    quantum_average_direct(&TrainingSet::from_indices(ds, &indices, map.clone())?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeRow {
    pub subset_size: usize,
    pub repeat: usize,
    pub fidelity_global: f64,
    pub fidelity_even: f64,
}

/// Fidelity of quantum averages over random train subsets with `global` and
/// with the uniform superposition. Subsets for each size are disjoint; sizes
/// that do not fit `repeats` times get fewer rows.
pub fn fidelity_vs_size_experiment(
    ds: &Dataset,
    map: &PixelMap,
    global: &BornMachine,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<SizeRow>> {
    let even = psi_even(map.len())?;
    let jobs: Vec<(usize, usize, Vec<usize>)> = sizes
        .iter()
        .map(|&size| {
            let draw = sample_subsets(ds, size, repeats, rng::derive(seed, size as u64))?;
            Ok(draw.subsets.into_iter().enumerate().map(move |(k, s)| (size, k, s)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    jobs.into_par_iter()
        .map(|(size, repeat, idx)| {
            let m = quantum_average_direct(&TrainingSet::from_indices(ds, &idx, map.clone())?)?;
            Ok(SizeRow {
                subset_size: size,
                repeat,
                fidelity_global: m.fidelity(global)?,
                fidelity_even: m.fidelity(&even)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseRow {
    pub noise_kind: NoiseKind,
    pub p: f64,
    pub fidelity_global: f64,
}

/// Fidelity with `global` of noisy-trained machines over a grid of channels
/// and strengths. All strengths share trajectory streams.
pub fn fidelity_vs_noise_experiment(
    d: &TrainingSet,
    global: &BornMachine,
    kinds: &[NoiseKind],
    probabilities: &[f64],
    n_traj: usize,
    seed: u64,
) -> Result<Vec<NoiseRow>> {
    let mut rows = Vec::new();
    for &kind in kinds {
        for &p in probabilities {
            let spec = NoiseSpec::on_all(kind, p, d.n_pixels())?;
            let m = train_noisy_mixture(d, &spec, n_traj, seed)?;
            rows.push(NoiseRow {
                noise_kind: kind,
                p,
                fidelity_global: m.fidelity(global)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_signal;
    use crate::qcore::{trace_distance, PauliString};

    fn sig(p: &[f64]) -> Signal {
        Signal::new(p.to_vec()).unwrap()
    }

    fn random_set<R: rand::Rng>(r: &mut R, n: usize, size: usize) -> TrainingSet {
        let map = PixelMap::new((0..n).map(|_| r.random_range(0.1..0.9)).collect()).unwrap();
        let samples = (0..size).map(|_| sig(&(0..n).map(|_| r.random()).collect::<Vec<_>>())).collect();
        TrainingSet::new(samples, map).unwrap()
    }

    fn pure(m: &BornMachine) -> &StateVector {
        m.pure_state().unwrap()
    }

    #[test]
    fn direct_examples() {
        let map = PixelMap::uniform(3);
        let y = sig(&[0.1, 0.7, 0.4]);
        let one = quantum_average_direct(&TrainingSet::new(vec![y.clone()], map.clone()).unwrap()).unwrap();
        assert!((pure(&one).inner(&encode_signal(&y, &map).unwrap()).norm() - 1.0).abs() < 1e-12);
        let twice = quantum_average_direct(&TrainingSet::new(vec![y.clone(), y.clone()], map.clone()).unwrap()).unwrap();
        assert!((pure(&twice).inner(pure(&one)).norm() - 1.0).abs() < 1e-12);

        let bits = TrainingSet::new(vec![sig(&[0.0]), sig(&[1.0])], PixelMap::uniform(1)).unwrap();
        let m = quantum_average_direct(&bits).unwrap();
        assert!((pure(&m).inner(&StateVector::plus_state(1)).norm() - 1.0).abs() < 1e-12);
        assert!(TrainingSet::new(vec![], map).is_err());
    }

    #[test]
    fn circuit_examples() {
        let mut r = rng::seeded(31);
        let single = TrainingSet::new(vec![sig(&[0.3, 0.9])], PixelMap::uniform(2)).unwrap();
        let out = quantum_average_circuit(&single, &mut r).unwrap();
        assert!((out.success_probability - 1.0).abs() < 1e-12);
        assert_eq!(out.attempts, 1);

        let bits = TrainingSet::new(vec![sig(&[0.0]), sig(&[1.0])], PixelMap::uniform(1)).unwrap();
        let out = quantum_average_circuit(&bits, &mut r).unwrap();
        assert!((out.success_probability - 0.5).abs() < 1e-12);
        assert!((out.simulated_probability - 0.5).abs() < 1e-12);

        let three = TrainingSet::new(vec![sig(&[0.1]); 3], PixelMap::uniform(1)).unwrap();
        assert!(quantum_average_circuit(&three, &mut r).is_err());
        let padded = three.padded_to_power_of_two();
        assert_eq!(padded.len(), 4);
        assert!(quantum_average_circuit(&padded, &mut r).is_ok());
    }

    #[test]
    fn circuit_matches_direct_on_random_sets() {
        let mut r = rng::seeded(32);
        for _ in 0..200 {
            let n = r.random_range(1..=4);
            let size = 1 << r.random_range(0..=3);
            let d = random_set(&mut r, n, size);
            let out = quantum_average_circuit(&d, &mut r).unwrap();
            let direct = quantum_average_direct(&d).unwrap();
            assert!(out.machine.fidelity(&direct).unwrap() >= 1.0 - 1e-9);
            assert!(out.success_probability >= 1.0 / size as f64 - 1e-12);
            assert!((out.success_probability - out.simulated_probability).abs() < 1e-10);
        }
    }

    #[test]
    fn psi_even_examples() {
        let e = psi_even(5).unwrap();
        for a in pure(&e).amplitudes() {
            assert!((a.re - 1.0 / 32f64.sqrt()).abs() < 1e-12);
        }
        assert!((e.fidelity(&e).unwrap() - 1.0).abs() < 1e-12);
        assert!((pure(&psi_even(1).unwrap()).inner(&StateVector::plus_state(1)).norm() - 1.0).abs() < 1e-12);
        assert!(psi_even(0).is_err());
    }

    /// Full-register simulation of one noisy trajectory, sampling errors in
    /// the same order as the fast path.
    fn brute_force_trajectory(d: &TrainingSet, spec: &NoiseSpec, r: &mut rng::Rng) -> Vec<C64> {
        let c = d.len().trailing_zeros() as usize;
        let n = d.n_pixels();
        let mut s = StateVector::zero_state(c + n);
        for q in 0..c {
            s = s.apply_gate(&GateOp::h(q)).unwrap();
        }
        for (z, row) in d.angles().unwrap().iter().enumerate() {
            let controls: Vec<(usize, bool)> = (0..c).map(|j| (j, (z >> (c - 1 - j)) & 1 == 1)).collect();
            for (q, &theta) in row.iter().enumerate() {
                s.apply_controlled(&controls, c + q, &ry_matrix(theta)).unwrap();
            }
            for &q in spec.targets() {
                if let Some(p) = sample_pauli_error(spec.kind(), spec.probability(), r).unwrap() {
                    s.apply_pauli(&PauliString::single(c + n, c + q, p));
                }
            }
        }
        for q in 0..c {
            s = s.apply_gate(&GateOp::h(q)).unwrap();
        }
        // unnormalized projection onto controls = 0
        s.amplitudes()[..1 << n].to_vec()
    }

    #[test]
    fn layered_trajectories_match_full_circuit() {
        let mut r = rng::seeded(33);
        for kind in [NoiseKind::BitFlip, NoiseKind::PhaseFlip, NoiseKind::Depolarizing] {
            for _ in 0..20 {
                let d = random_set(&mut r, 3, 4);
                let spec = NoiseSpec::on_all(kind, 0.3, 3).unwrap();
                let seed: u64 = r.random();
                let slow = brute_force_trajectory(&d, &spec, &mut rng::stream(seed, 0));
                let mut fr = rng::stream(seed, 0);
                let targets = spec.targets().to_vec();
                let errors: Vec<Vec<Option<Matrix>>> = (0..d.len())
                    .map(|_| {
                        targets
                            .iter()
                            .map(|_| sample_pauli_error(kind, 0.3, &mut fr).unwrap().map(|p| p.matrix()))
                            .collect()
                    })
                    .collect();
                let fast = layered_branch_sum(&d.angles().unwrap(), 3, &targets, &errors);
                for (a, b) in slow.iter().zip(&fast) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn exact_recurrence_matches_noiseless_and_full_channel() {
        let mut r = rng::seeded(34);
        let d = random_set(&mut r, 2, 4);
        let direct = quantum_average_direct(&d).unwrap();
        let (rho, success) = noisy_circuit_exact(&d, &NoiseSpec::none()).unwrap();
        assert!((rho.sandwich(pure(&direct)) - 1.0).abs() < 1e-10);
        let analytic = quantum_average_circuit(&d, &mut r).unwrap().success_probability;
        assert!((success - analytic).abs() < 1e-12);

        // compare to the full control+state density-matrix circuit
        let spec = NoiseSpec::on_all(NoiseKind::AmpDamp, 0.2, 2).unwrap();
        let (rho, success) = noisy_circuit_exact(&d, &spec).unwrap();
        let mut full = DensityMatrix::from_pure(&StateVector::zero_state(4));
        let hs = |m: &mut DensityMatrix| {
            for q in 0..2 {
                let h = GateOp::h(q);
                m.apply_unitary(h.targets(), h.unitary()).unwrap();
            }
        };
        hs(&mut full);
        let ch = spec.channel().unwrap();
        for (z, row) in d.angles().unwrap().iter().enumerate() {
            let mut u = Matrix::identity(16, 16);
            for (q, &theta) in row.iter().enumerate() {
                let controls = [(0, z >> 1 == 1), (1, z & 1 == 1)];
                // build the controlled rotation column by column
                let mut cu = Matrix::zeros(16, 16);
                for col in 0..16 {
                    let mut s = StateVector::basis_state(4, col).unwrap();
                    s.apply_controlled(&controls, 2 + q, &ry_matrix(theta)).unwrap();
                    for (row_i, a) in s.amplitudes().iter().enumerate() {
                        cu[(row_i, col)] = *a;
                    }
                }
                u = cu * u;
            }
            full.apply_unitary(&[0, 1, 2, 3], &u).unwrap();
            for q in [2, 3] {
                full.apply_kraus(&[q], ch.operators()).unwrap();
            }
        }
        hs(&mut full);
        let block = full.matrix().view((0, 0), (4, 4)).into_owned();
        let p = block.trace().re;
        assert!((p - success).abs() < 1e-12);
        assert!((block / C64::new(p, 0.0) - rho.matrix()).norm() < 1e-10);
    }

    #[test]
    fn noiseless_mixture_is_the_pure_projector() {
        let mut r = rng::seeded(35);
        let d = random_set(&mut r, 3, 8);
        let direct = quantum_average_direct(&d).unwrap();
        let spec = NoiseSpec::on_all(NoiseKind::Depolarizing, 0.0, 3).unwrap();
        let m = train_noisy_mixture(&d, &spec, 50, 1).unwrap();
        let QuantumState::Mixed(rho) = m.state() else { panic!() };
        let proj = DensityMatrix::from_pure(pure(&direct));
        assert!(trace_distance(rho, &proj).unwrap() < 1e-9);
        assert!(train_noisy_mixture(&d, &spec, 0, 1).is_err());
    }

    #[test]
    fn trajectories_converge_to_exact_evolution() {
        let mut r = rng::seeded(36);
        let d = random_set(&mut r, 2, 4);
        for kind in [NoiseKind::BitFlip, NoiseKind::Depolarizing] {
            let spec = NoiseSpec::on_all(kind, 0.1, 2).unwrap();
            let m = train_noisy_mixture(&d, &spec, 5000, 7).unwrap();
            let QuantumState::Mixed(rho) = m.state() else { panic!() };
            let (exact, _) = noisy_circuit_exact(&d, &spec).unwrap();
            let dist = trace_distance(rho, &exact).unwrap();
            assert!(dist < 0.02, "{kind}: {dist}");
        }
    }

    #[test]
    fn weak_bitflip_keeps_high_fidelity() {
        let mut r = rng::seeded(37);
        let d = random_set(&mut r, 5, 16);
        let clean = quantum_average_direct(&d).unwrap();
        let spec = NoiseSpec::on_all(NoiseKind::BitFlip, 1e-4, 5).unwrap();
        let f = train_noisy_mixture(&d, &spec, 5000, 3).unwrap().fidelity(&clean).unwrap();
        let exact = train_noisy_exact(&d, &spec).unwrap().fidelity(&clean).unwrap();
        assert!((0.9..=1.0).contains(&f), "{f}");
        assert!((f - exact).abs() < 0.01, "{f} vs {exact}");
    }

    #[test]
    fn ampdamp_uses_exact_evolution() {
        let mut r = rng::seeded(38);
        let d = random_set(&mut r, 2, 2);
        let spec = NoiseSpec::on_all(NoiseKind::AmpDamp, 0.3, 2).unwrap();
        let a = train_noisy_mixture(&d, &spec, 10, 1).unwrap();
        let b = train_noisy_exact(&d, &spec).unwrap();
        assert_eq!(a, b);
    }
}
