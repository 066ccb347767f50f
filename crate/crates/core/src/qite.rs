//! Quantum imaginary time evolution.
//!
//! Each Trotter substep replaces `exp(-dtau h)` for one term `h = w P` by a
//! unitary `exp(-i dtau A)`, `A = sum_I a_I sigma_I` over every non-identity
//! Pauli string on the term's domain. The real coefficients `a` minimise
//! `|| (phi - psi)/dtau - (-i A) psi ||` where `phi` is the normalized
//! imaginary-time target; all inputs are Pauli expectations of the current
//! state, measured exactly or with a finite number of shots.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::noise::{apply_channel_on, inject_in_place, NoiseSpec};
use crate::qcore::pauli::i_pow;
use crate::qcore::{linalg, DensityMatrix, Hamiltonian, Matrix, Pauli, PauliString, PauliTerm, QuantumState, StateVector};
use crate::rng;
use crate::{QcsError, Result};

pub const DEFAULT_MAX_DISCARDS: usize = 30;
pub const DEFAULT_REGULARIZATION: f64 = 1e-8;
/// Largest domain for which the Pauli basis (`4^k - 1` strings) is built.
pub const MAX_DOMAIN: usize = 6;
const EXACT_TOLERANCE: f64 = 1e-9;
const NOISE_SALT: u64 = 0x6e6f697365;

/// How Pauli expectations are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tomography {
    Exact,
    /// Shots per observable.
    Shots(u64),
}

impl Tomography {
    pub fn is_exact(self) -> bool {
        self == Tomography::Exact
    }
}

impl fmt::Display for Tomography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tomography::Exact => f.write_str("exact"),
            Tomography::Shots(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Tomography {
    type Err = QcsError;

    /// `exact`, or a shot count such as `100000` or `1e5`.
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Tomography::Exact);
        }
        let x: f64 = s
            .parse()
            .map_err(|_| QcsError::invalid(format!("shots must be `exact` or a count, got {s:?}")))?;
        if !(x >= 1.0 && x.fract() == 0.0 && x <= u64::MAX as f64) {
            return Err(QcsError::invalid(format!("shot count must be a positive integer, got {s:?}")));
        }
        Ok(Tomography::Shots(x as u64))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QiteConfig {
    pub d_beta: f64,
    pub total_beta: f64,
    pub tomography: Tomography,
    /// Sweeps that raised the energy may be redone this many times per step.
    pub max_discards: usize,
    /// Qubits in each fitted generator's support; `None` uses the term's own support.
    pub domain_size: Option<usize>,
    pub regularization: f64,
}

impl QiteConfig {
    pub fn new(d_beta: f64, total_beta: f64) -> Result<Self> {
        let cfg = QiteConfig {
            d_beta,
            total_beta,
            tomography: Tomography::Exact,
            max_discards: DEFAULT_MAX_DISCARDS,
            domain_size: None,
            regularization: DEFAULT_REGULARIZATION,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_tomography(mut self, t: Tomography) -> Self {
        self.tomography = t;
        self
    }

    pub fn with_max_discards(mut self, k: usize) -> Self {
        self.max_discards = k;
        self
    }

    pub fn with_domain_size(mut self, d: Option<usize>) -> Self {
        self.domain_size = d;
        self
    }

    pub fn with_regularization(mut self, lambda: f64) -> Self {
        self.regularization = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_beta > 0.0 && self.d_beta.is_finite()) {
            return Err(QcsError::OutOfRange {
                name: "d_beta",
                value: self.d_beta,
                range: "> 0",
            });
        }
        if !(self.total_beta >= self.d_beta && self.total_beta.is_finite()) {
            return Err(QcsError::OutOfRange {
                name: "total_beta",
                value: self.total_beta,
                range: ">= d_beta",
            });
        }
        if let Tomography::Shots(0) = self.tomography {
            return Err(QcsError::invalid("n_shots must be at least 1"));
        }
        if matches!(self.domain_size, Some(0)) || self.domain_size.is_some_and(|d| d > MAX_DOMAIN) {
            return Err(QcsError::OutOfRange {
                name: "domain_size",
                value: self.domain_size.unwrap_or(0) as f64,
                range: "1..=6",
            });
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(QcsError::OutOfRange {
                name: "regularization",
                value: self.regularization,
                range: ">= 0",
            });
        }
        Ok(())
    }

    /// Number of Trotter steps, `round(beta / dbeta)` and at least one.
    pub fn steps(&self) -> usize {
        ((self.total_beta / self.d_beta).round() as usize).max(1)
    }

    /// Step size actually used, so that the steps land exactly on `total_beta`.
    pub fn step_size(&self) -> f64 {
        self.total_beta / self.steps() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QitePoint {
    pub beta: f64,
    pub energy: f64,
    /// Sweeps thrown away before this point was accepted.
    pub discards: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QiteTrajectory {
    /// Starts at `beta = 0` with the initial energy.
    pub points: Vec<QitePoint>,
    pub final_state: QuantumState,
}

impl QiteTrajectory {
    pub fn final_energy(&self) -> f64 {
        self.points[self.points.len() - 1].energy
    }

    pub fn total_discards(&self) -> usize {
        self.points.iter().map(|p| p.discards).sum()
    }
}

/// Estimate of `<P>` from `n_shots` measurements in the eigenbasis of `P`:
/// the parity outcome is `+1` with probability `(1 + <P>)/2`.
fn shot_estimate<R: Rng + ?Sized>(exact: f64, n_shots: u64, rng: &mut R) -> f64 {
    let p_even = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
    let k = Binomial::new(n_shots, p_even).expect("valid binomial").sample(rng);
    2.0 * k as f64 / n_shots as f64 - 1.0
}

fn estimate<R: Rng + ?Sized>(state: &QuantumState, p: &PauliString, mode: Tomography, rng: &mut R) -> f64 {
    if p.is_identity() {
        return 1.0;
    }
    let exact = state.pauli_expectation(p);
    match mode {
        Tomography::Exact => exact,
        Tomography::Shots(n) => shot_estimate(exact, n, rng),
    }
}

/// Expectations of weighted Pauli observables, exact or from `n_shots`
/// samples each.
pub fn tomography<R: Rng + ?Sized>(
    state: &QuantumState,
    observables: &[PauliTerm],
    mode: Tomography,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if let Tomography::Shots(0) = mode {
        return Err(QcsError::invalid("n_shots must be at least 1"));
    }
    observables
        .iter()
        .map(|t| {
            if t.axes.len() != state.n_qubits() {
                return Err(QcsError::DimensionMismatch {
                    expected: state.n_qubits(),
                    found: t.axes.len(),
                });
            }
            Ok(t.coefficient * estimate(state, &t.axes, mode, rng))
        })
        .collect()
}

/// The term's support grown to `size` qubits by adding the nearest qubits
/// (lower index first on ties). Sorted ascending.
pub fn term_domain(term: &PauliTerm, n_qubits: usize, size: Option<usize>) -> Result<Vec<usize>> {
    let support = term.axes.support();
    let size = size.unwrap_or(support.len());
    if support.len() > size {
        return Err(QcsError::invalid(format!(
            "term {term} acts on {} qubits but the domain holds {size}",
            support.len()
        )));
    }
    if size > n_qubits {
        return Err(QcsError::invalid(format!(
            "domain of {size} qubits exceeds the {n_qubits}-qubit register"
        )));
    }
    let mut rest: Vec<usize> = (0..n_qubits).filter(|q| !support.contains(q)).collect();
    rest.sort_by_key(|&q| (support.iter().map(|&s| q.abs_diff(s)).min().unwrap_or(q), q));
    let mut domain = support;
    domain.extend(rest.into_iter().take(size - domain.len()));
    domain.sort_unstable();
    Ok(domain)
}

/// Multiplication of base-4 indexed Pauli strings on `k` qubits (first letter
/// most significant, `I, X, Y, Z` as digits 0..3).
struct IndexAlgebra {
    k: usize,
    table: [[(C64, usize); 4]; 4],
}

impl IndexAlgebra {
    fn new(k: usize) -> Self {
        let mut table = [[(C64::new(0.0, 0.0), 0); 4]; 4];
        for (a, pa) in Pauli::ALL.iter().enumerate() {
            for (b, pb) in Pauli::ALL.iter().enumerate() {
                let (ph, r) = pa.mul(*pb);
                table[a][b] = (ph, Pauli::ALL.iter().position(|p| *p == r).expect("pauli"));
            }
        }
        IndexAlgebra { k, table }
    }

    fn mul(&self, a: usize, b: usize) -> (C64, usize) {
        let mut phase = C64::new(1.0, 0.0);
        let mut out = 0;
        for j in (0..self.k).rev() {
            let shift = 2 * j;
            let (ph, r) = self.table[(a >> shift) & 3][(b >> shift) & 3];
            phase *= ph;
            out |= r << shift;
        }
        (phase, out)
    }

    fn index_of(&self, s: &PauliString) -> usize {
        s.ops()
            .iter()
            .fold(0, |acc, p| (acc << 2) | Pauli::ALL.iter().position(|q| q == p).expect("pauli"))
    }
}

/// Ingredients of one substep that do not depend on the solve route.
struct Substep<'a> {
    domain: Vec<usize>,
    basis: Vec<PauliString>,
    weight: f64,
    axes: &'a PauliString,
    dtau: f64,
}

impl Substep<'_> {
    /// `sinh(dtau w) / dtau`, the first-order weight of the term.
    fn rhs_scale(&self, c: f64) -> f64 {
        (self.dtau * self.weight).sinh() / self.dtau / c.sqrt()
    }

    /// Squared norm of `exp(-dtau w P) psi` given `<P>`.
    fn norm_factor(&self, p_exp: f64) -> f64 {
        let x = 2.0 * self.dtau * self.weight;
        x.cosh() - x.sinh() * p_exp
    }
}

fn solve_regularized(s: DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let n = s.nrows();
    let m = s + DMatrix::identity(n, n) * lambda;
    if let Some(ch) = m.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    match m.lu().solve(b) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => Err(QcsError::DegenerateTomography),
    }
}

/// Normal equations `(S + lambda) a = b` assembled from a table of all
/// `4^k` domain Pauli expectations.
fn coefficients_gram<R: Rng + ?Sized>(
    state: &QuantumState,
    sub: &Substep,
    cfg: &QiteConfig,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = state.n_qubits();
    let k = sub.domain.len();
    let alg = IndexAlgebra::new(k);
    let table: Vec<f64> = PauliString::all(k)
        .iter()
        .map(|s| estimate(state, &s.embed(&sub.domain, n), cfg.tomography, rng))
        .collect();
    let term_idx = alg.index_of(&sub.axes.restrict(&sub.domain));
    let c = sub.norm_factor(table[term_idx]).max(f64::MIN_POSITIVE);
    let scale = sub.rhs_scale(c);
    let m = sub.basis.len();
    let mut s = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    for i in 0..m {
        for j in i..m {
            let (ph, r) = alg.mul(i + 1, j + 1);
            let v = (ph * table[r]).re;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
        let (ph, r) = alg.mul(i + 1, term_idx);
        b[i] = scale * (ph * table[r]).im;
    }
    solve_regularized(s, &b, cfg.regularization)
}

/// Same least-squares problem in its dual form for an exactly known pure
/// state: with `W` the real embedding of the vectors `-i sigma_I psi`,
/// `a = W^T (W W^T + lambda)^{-1} delta`. This equals the Gram solution and
/// is cheaper when the basis is larger than twice the state dimension.
fn coefficients_dual(psi: &StateVector, sub: &Substep, lambda: f64) -> Result<DVector<f64>> {
    let n = psi.n_qubits();
    let dim = psi.dim();
    let mut p_psi = psi.clone();
    p_psi.apply_pauli(sub.axes);
    let p_exp = psi.inner(&p_psi).re;
    let c = sub.norm_factor(p_exp).max(f64::MIN_POSITIVE);
    let x = sub.dtau * sub.weight;
    let (ch, sh) = (x.cosh() / c.sqrt(), x.sinh() / c.sqrt());
    let mut delta = DVector::zeros(2 * dim);
    for (i, (a, pa)) in psi.amplitudes().iter().zip(p_psi.amplitudes()).enumerate() {
        let d = (a * ch - pa * sh - a) / sub.dtau;
        delta[i] = d.re;
        delta[dim + i] = d.im;
    }
    let m = sub.basis.len();
    let mut w = DMatrix::zeros(2 * dim, m);
    for (col, s) in sub.basis.iter().enumerate() {
        let mut v = psi.clone();
        v.apply_pauli(&s.embed(&sub.domain, n));
        for (i, a) in v.amplitudes().iter().enumerate() {
            // -i a
            w[(i, col)] = a.im;
            w[(dim + i, col)] = -a.re;
        }
    }
    let gram = &w * w.transpose();
    let y = solve_regularized(gram, &delta, lambda)?;
    Ok(w.transpose() * y)
}

/// Dense `sum_I a_I sigma_I` on the domain.
fn generator(basis: &[PauliString], a: &DVector<f64>) -> Matrix {
    let k = basis.first().map_or(0, |b| b.len());
    let d = 1usize << k;
    let mut out = Matrix::zeros(d, d);
    for (s, &ai) in basis.iter().zip(a.iter()) {
        if ai == 0.0 {
            continue;
        }
        let (x, z, ny) = s.masks();
        let base = i_pow(ny) * ai;
        for i in 0..d {
            let sign = if (i & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[(i ^ x, i)] += base * sign;
        }
    }
    out
}

/// Fits and applies one substep for `term` in place. Returns the domain the
/// unitary acted on (empty for an identity term, which only rescales).
fn substep_in_place<R: Rng + ?Sized>(
    state: &mut QuantumState,
    term: &PauliTerm,
    cfg: &QiteConfig,
    dtau: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = state.n_qubits();
    if term.axes.len() != n {
        return Err(QcsError::DimensionMismatch {
            expected: n,
            found: term.axes.len(),
        });
    }
    if term.axes.is_identity() || term.coefficient == 0.0 {
        return Ok(Vec::new());
    }
    let domain = term_domain(term, n, cfg.domain_size)?;
    if domain.len() > MAX_DOMAIN {
        return Err(QcsError::OutOfRange {
            name: "domain_size",
            value: domain.len() as f64,
            range: "1..=6",
        });
    }
    let basis: Vec<PauliString> = PauliString::all(domain.len()).into_iter().skip(1).collect();
    let sub = Substep {
        domain,
        basis,
        weight: term.coefficient,
        axes: &term.axes,
        dtau,
    };
    let a = match state {
        QuantumState::Pure(psi) if cfg.tomography.is_exact() && sub.basis.len() > 2 * psi.dim() => {
            coefficients_dual(psi, &sub, cfg.regularization)?
        }
        _ => coefficients_gram(state, &sub, cfg, rng)?,
    };
    let u = linalg::unitary_exp(&generator(&sub.basis, &a), dtau);
    state.apply_unitary(&sub.domain, &u)?;
    Ok(sub.domain)
}

/// One imaginary-time substep for a single term. The flag reports whether
/// the term's energy did not rise (beyond numerical slack).
pub fn qite_step<R: Rng + ?Sized>(
    state: &StateVector,
    term: &PauliTerm,
    config: &QiteConfig,
    rng: &mut R,
) -> Result<(StateVector, bool)> {
    config.validate()?;
    let mut s = QuantumState::Pure(state.clone());
    let before = s.expectation_term(term)?;
    substep_in_place(&mut s, term, config, config.d_beta, rng)?;
    let after = s.expectation_term(term)?;
    let QuantumState::Pure(out) = s else {
        unreachable!("pure input stays pure")
    };
    Ok((out, after <= before + EXACT_TOLERANCE))
}

/// Noise applied after every fitted unitary, on the qubits it touched.
enum NoiseMode<'a> {
    None,
    Trajectory(&'a NoiseSpec, rng::Rng),
    Channel(&'a NoiseSpec),
}

fn sweep(
    state: &mut QuantumState,
    h: &Hamiltonian,
    cfg: &QiteConfig,
    dtau: f64,
    tomo: &mut rng::Rng,
    noise: &mut NoiseMode,
) -> Result<()> {
    for term in h.terms() {
        let touched = substep_in_place(state, term, cfg, dtau, tomo)?;
        match noise {
            NoiseMode::None => {}
            NoiseMode::Trajectory(spec, r) => {
                let qubits: Vec<usize> = touched.into_iter().filter(|q| spec.targets().contains(q)).collect();
                match state {
                    QuantumState::Pure(psi) => {
                        inject_in_place(psi, spec, &qubits, r)?;
                    }
                    QuantumState::Mixed(_) => unreachable!("trajectories run on statevectors"),
                }
            }
            NoiseMode::Channel(spec) => {
                let qubits: Vec<usize> = touched.into_iter().filter(|q| spec.targets().contains(q)).collect();
                let QuantumState::Mixed(rho) = state else {
                    unreachable!("channel mode runs on density matrices")
                };
                apply_channel_on(rho, spec, &qubits)?;
            }
        }
    }
    Ok(())
}

fn run_loop(
    h: &Hamiltonian,
    state0: QuantumState,
    cfg: &QiteConfig,
    mut tomo: rng::Rng,
    mut noise: NoiseMode,
) -> Result<QiteTrajectory> {
    cfg.validate()?;
    if h.n_qubits() != state0.n_qubits() {
        return Err(QcsError::DimensionMismatch {
            expected: state0.n_qubits(),
            found: h.n_qubits(),
        });
    }
    let steps = cfg.steps();
    let dtau = cfg.step_size();
    let (tolerance, retries) = match cfg.tomography {
        Tomography::Exact => (EXACT_TOLERANCE, 0),
        Tomography::Shots(_) => (0.0, cfg.max_discards),
    };
    let mut state = state0;
    let mut energy = state.expectation(h)?;
    let mut measured = measured_energy(&state, h, cfg.tomography, &mut tomo);
    let mut points = Vec::with_capacity(steps + 1);
    points.push(QitePoint {
        beta: 0.0,
        energy,
        discards: 0,
    });
    for k in 1..=steps {
        let mut discards = 0;
        let (next, e) = loop {
            let mut trial = state.clone();
            sweep(&mut trial, h, cfg, dtau, &mut tomo, &mut noise)?;
            let m = measured_energy(&trial, h, cfg.tomography, &mut tomo);
            if m <= measured + tolerance || discards >= retries {
                break (trial, m);
            }
            discards += 1;
        };
        energy = next.expectation(h)?;
        state = next;
        measured = e;
        points.push(QitePoint {
            beta: if k == steps { cfg.total_beta } else { k as f64 * dtau },
            energy,
            discards,
        });
    }
    Ok(QiteTrajectory {
        points,
        final_state: state,
    })
}

/// `<H>` as the retry check sees it: exact, or one shot estimate per term.
fn measured_energy(state: &QuantumState, h: &Hamiltonian, mode: Tomography, rng: &mut rng::Rng) -> f64 {
    h.terms()
        .iter()
        .map(|t| t.coefficient * estimate(state, &t.axes, mode, rng))
        .sum()
}

/// Noiseless QITE: `steps()` Trotter sweeps over the terms in declaration
/// order, recording the exact energy after each sweep. With shot-based
/// tomography the energy is also measured from shots, and a sweep whose
/// measured energy exceeds the last accepted measurement is redone with
/// fresh samples, up to `max_discards` times, before it is accepted.
pub fn qite_run(h: &Hamiltonian, state0: &QuantumState, config: &QiteConfig, seed: u64) -> Result<QiteTrajectory> {
    run_loop(h, state0.clone(), config, rng::stream(seed, 0), NoiseMode::None)
}

/// Result of an ensemble of noisy runs.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyQite {
    pub trajectories: Vec<QiteTrajectory>,
    /// Ensemble-mean energy per step; `discards` holds the total over runs.
    pub mean: Vec<QitePoint>,
}

impl NoisyQite {
    pub fn final_energy(&self) -> f64 {
        self.mean[self.mean.len() - 1].energy
    }

    /// Equal-weight mixture of the final states.
    pub fn final_mixture(&self) -> Result<DensityMatrix> {
        let dims = self.trajectories[0].final_state.to_density().dim();
        let mut m = Matrix::zeros(dims, dims);
        for t in &self.trajectories {
            m += t.final_state.to_density().matrix();
        }
        m /= C64::new(self.trajectories.len() as f64, 0.0);
        DensityMatrix::from_matrix(m)
    }
}

/// QITE with noise after every fitted unitary on the qubits it acted on
/// (restricted to the noise targets). Pauli channels on pure inputs run as
/// `n_traj` statevector trajectories; run `t` uses tomography stream
/// `(seed, t)` and an independent noise stream, so at zero noise run 0
/// reproduces [`qite_run`] and different strengths share random numbers.
/// Amplitude damping, or a mixed input, evolves the density matrix with
/// exact channels; exact tomography then needs a single run.
pub fn qite_run_noisy(
    h: &Hamiltonian,
    state0: &QuantumState,
    config: &QiteConfig,
    spec: &NoiseSpec,
    n_traj: usize,
    seed: u64,
) -> Result<NoisyQite> {
    if n_traj < 1 {
        return Err(QcsError::invalid("n_traj must be at least 1"));
    }
    let n = state0.n_qubits();
    if let Some(&q) = spec.targets().iter().find(|&&q| q >= n) {
        return Err(QcsError::InvalidQubit { index: q, n_qubits: n });
    }
    let density_mode = !spec.kind().has_pauli_unraveling() || !state0.is_pure_representation();
    let runs = if density_mode && config.tomography.is_exact() { 1 } else { n_traj };
    let noise_seed = rng::derive(seed, NOISE_SALT);
    let trajectories: Vec<QiteTrajectory> = (0..runs as u64)
        .into_par_iter()
        .map(|t| {
            let tomo = rng::stream(seed, t);
            if density_mode {
                let rho = QuantumState::Mixed(state0.to_density());
                run_loop(h, rho, config, tomo, NoiseMode::Channel(spec))
            } else {
                let noise = NoiseMode::Trajectory(spec, rng::stream(noise_seed, t));
                run_loop(h, state0.clone(), config, tomo, noise)
            }
        })
        .collect::<Result<_>>()?;
    let len = trajectories[0].points.len();
    let mean = (0..len)
        .map(|k| QitePoint {
            beta: trajectories[0].points[k].beta,
            energy: trajectories.iter().map(|t| t.points[k].energy).sum::<f64>() / runs as f64,
            discards: trajectories.iter().map(|t| t.points[k].discards).sum(),
        })
        .collect();
    Ok(NoisyQite { trajectories, mean })
}
