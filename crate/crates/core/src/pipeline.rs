//! Compressed sensing with a Born machine: classically measure a few pixels,
//! project the machine onto states consistent with those bits by imaginary
//! time evolution, then sample the projected state and decode the remaining
//! pixels from bit frequencies.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bornmachine::{BornMachine, Provenance};
use crate::encoding::{decode_frequency, f_v, PixelMap, Signal};
use crate::noise::{bitstring, multinomial, NoiseKind, NoiseSpec};
use crate::qcore::{Hamiltonian, Pauli, PauliString, PauliTerm, QuantumState};
use crate::qite::{qite_run, qite_run_noisy, QiteConfig, QitePoint};
use crate::rng;
use crate::{QcsError, Result};

/// Default number of measurements drawn per reconstruction.
pub const DEFAULT_SAMPLES: u64 = 10_000;
/// Default trajectory count for noisy projections.
pub const DEFAULT_TRAJECTORIES: usize = 50;

const SALT_INDICES: u64 = 1;
const SALT_QITE: u64 = 2;
const SALT_SAMPLES: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensingOutcome {
    pub indices: Vec<usize>,
    pub raw_values: Vec<f64>,
    pub bits: Vec<u8>,
}

impl SensingOutcome {
    /// Pixels not measured, ascending.
    pub fn unmeasured(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|i| !self.indices.contains(i)).collect()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.indices.is_empty() || self.indices.len() >= n {
            return Err(QcsError::invalid(format!(
                "measure between 1 and {} of {n} pixels, got {}",
                n.saturating_sub(1),
                self.indices.len()
            )));
        }
        if self.raw_values.len() != self.indices.len() || self.bits.len() != self.indices.len() {
            return Err(QcsError::DimensionMismatch {
                expected: self.indices.len(),
                found: self.bits.len().min(self.raw_values.len()),
            });
        }
        crate::qcore::check_qubits(&self.indices, n)
    }
}

/// Reads the pixels at `indices` and binarizes each against its midpoint
/// (`1` when strictly above).
pub fn sense(signal: &Signal, indices: &[usize], map: &PixelMap) -> Result<SensingOutcome> {
    let n = signal.len();
    if map.len() != n {
        return Err(QcsError::DimensionMismatch {
            expected: n,
            found: map.len(),
        });
    }
    let raw_values: Vec<f64> = indices
        .iter()
        .map(|&i| {
            signal
                .pixels()
                .get(i)
                .copied()
                .ok_or(QcsError::InvalidQubit { index: i, n_qubits: n })
        })
        .collect::<Result<_>>()?;
    let bits = indices
        .iter()
        .zip(&raw_values)
        .map(|(&i, &x)| u8::from(x > map.midpoints()[i]))
        .collect();
    let out = SensingOutcome {
        indices: indices.to_vec(),
        raw_values,
        bits,
    };
    out.validate(n)?;
    Ok(out)
}

/// `H = -sum_i s_i Z_i` with `s_i = +1` for bit 0 and `-1` for bit 1. The
/// ground space is every basis state agreeing with the bits, at energy `-N_c`.
pub fn build_projection_hamiltonian(outcome: &SensingOutcome, n: usize) -> Result<Hamiltonian> {
    outcome.validate(n)?;
    let terms = outcome
        .indices
        .iter()
        .zip(&outcome.bits)
        .map(|(&i, &b)| PauliTerm::new(if b == 0 { -1.0 } else { 1.0 }, PauliString::single(n, i, Pauli::Z)))
        .collect();
    Hamiltonian::new(terms)
}

/// Real-valued variant: `h_i = (Z_i - c_i)^2 = (1 + c_i^2) I - 2 c_i Z_i`
/// with `c_i = cos(pi f_v(x_i))`, the Z expectation of the encoded value.
pub fn build_gaussian_hamiltonian(outcome: &SensingOutcome, map: &PixelMap, n: usize) -> Result<Hamiltonian> {
    outcome.validate(n)?;
    let mut terms = Vec::new();
    for (&i, &x) in outcome.indices.iter().zip(&outcome.raw_values) {
        let c = (std::f64::consts::PI * f_v(x, map.midpoints()[i])?).cos();
        terms.push(PauliTerm::new(1.0 + c * c, PauliString::identity(n)));
        terms.push(PauliTerm::new(-2.0 * c, PauliString::single(n, i, Pauli::Z)));
    }
    Hamiltonian::new(terms)
}

/// A projected machine and the energy curve that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub machine: BornMachine,
    pub energies: Vec<QitePoint>,
}

/// Runs QITE from the machine's state. Noiseless specs use a single run;
/// noisy ones average `n_traj` trajectories (or evolve the density matrix)
/// and return the resulting mixture.
pub fn project(
    machine: &BornMachine,
    h: &Hamiltonian,
    qcfg: &QiteConfig,
    spec: &NoiseSpec,
    n_traj: usize,
    seed: u64,
) -> Result<Projection> {
    let (state, energies) = if spec.is_noiseless() {
        let tr = qite_run(h, machine.state(), qcfg, seed)?;
        (tr.final_state, tr.points)
    } else {
        let out = qite_run_noisy(h, machine.state(), qcfg, spec, n_traj, seed)?;
        let state = if out.trajectories.len() == 1 {
            out.trajectories[0].final_state.clone()
        } else {
            QuantumState::Mixed(out.final_mixture()?)
        };
        (state, out.mean)
    };
    let provenance = if state.is_pure_representation() {
        machine.provenance()
    } else {
        Provenance::NoisyMixture
    };
    Ok(Projection {
        machine: BornMachine::new(state, provenance, machine.training_size()),
        energies,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionResult {
    /// Unmeasured pixel positions, ascending.
    pub pixels: Vec<usize>,
    pub estimates: Vec<f64>,
    /// Filled in by [`ReconstructionResult::score`].
    pub truths: Vec<f64>,
    pub n_samples_used: u64,
    pub srmse: Option<f64>,
}

impl ReconstructionResult {
    /// Sets truths from `signal` and the sRMSE against per-pixel `sigmas`.
    /// Pixels whose sigma is zero are left out of the score.
    pub fn score(&mut self, signal: &Signal, sigmas: &[f64]) -> Result<f64> {
        self.truths = self.pixels.iter().map(|&i| signal.pixels()[i]).collect();
        let (p, t, s) = scorable(&self.pixels, &self.estimates, &self.truths, sigmas);
        let v = mean_srmse(&p, &t, &s)?;
        self.srmse = Some(v);
        Ok(v)
    }
}

fn scorable(pixels: &[usize], est: &[f64], truth: &[f64], sigmas: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    for (k, &i) in pixels.iter().enumerate() {
        if sigmas[i] > 0.0 {
            out.0.push(est[k]);
            out.1.push(truth[k]);
            out.2.push(sigmas[i]);
        } else {
            log::warn!("pixel {i} has zero spread in the training data and is left out of the sRMSE");
        }
    }
    out
}

/// Draws `n_samples` full-register measurements and decodes the bit-1
/// frequency of each unmeasured pixel.
pub fn sample_reconstruction<R: Rng + ?Sized>(
    projected: &BornMachine,
    outcome: &SensingOutcome,
    map: &PixelMap,
    n_samples: u64,
    rng: &mut R,
) -> Result<ReconstructionResult> {
    let n = projected.n_pixels();
    outcome.validate(n)?;
    if map.len() != n {
        return Err(QcsError::DimensionMismatch {
            expected: n,
            found: map.len(),
        });
    }
    if n_samples == 0 {
        return Err(QcsError::invalid("n_samples must be at least 1"));
    }
    let counts = multinomial(&projected.state().probabilities(), n_samples, rng);
    let pixels = outcome.unmeasured(n);
    let estimates = pixels
        .iter()
        .map(|&i| {
            let bit = 1usize << (n - 1 - i);
            let ones: u64 = counts.iter().enumerate().filter(|(k, _)| k & bit != 0).map(|(_, c)| c).sum();
            decode_frequency(ones as f64 / n_samples as f64, map.midpoints()[i])
        })
        .collect::<Result<_>>()?;
    Ok(ReconstructionResult {
        pixels,
        estimates,
        truths: Vec::new(),
        n_samples_used: n_samples,
        srmse: None,
    })
}

/// Per-sample projection: every measurement comes from a fresh projection of
/// the machine, as repeat-until-success hardware would need. Statistics match
/// [`sample_reconstruction`]; only the cost differs.
#[allow(clippy::too_many_arguments)]
pub fn sample_reconstruction_faithful(
    machine: &BornMachine,
    h: &Hamiltonian,
    outcome: &SensingOutcome,
    map: &PixelMap,
    qcfg: &QiteConfig,
    spec: &NoiseSpec,
    n_traj: usize,
    n_samples: u64,
    seed: u64,
) -> Result<ReconstructionResult> {
    let n = machine.n_pixels();
    outcome.validate(n)?;
    let draws: Vec<usize> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let p = project(machine, h, qcfg, spec, n_traj, rng::stream(seed, k).random())?;
            let probs = p.machine.state().probabilities();
            let counts = multinomial(&probs, 1, &mut rng::stream(rng::derive(seed, SALT_SAMPLES), k));
            Ok(counts.iter().position(|&c| c == 1).expect("one draw"))
        })
        .collect::<Result<_>>()?;
    let pixels = outcome.unmeasured(n);
    let estimates = pixels
        .iter()
        .map(|&i| {
            let ones = draws.iter().filter(|&&d| bitstring(d, n).as_bytes()[i] == b'1').count();
            decode_frequency(ones as f64 / n_samples as f64, map.midpoints()[i])
        })
        .collect::<Result<_>>()?;
    Ok(ReconstructionResult {
        pixels,
        estimates,
        truths: Vec::new(),
        n_samples_used: n_samples,
        srmse: None,
    })
}

/// `sqrt( sum_i ((P_i - R_i) / sigma_i)^2 / u )` over `u` guesses.
pub fn mean_srmse(predictions: &[f64], truths: &[f64], sigmas: &[f64]) -> Result<f64> {
    let u = predictions.len();
    if u == 0 {
        return Err(QcsError::invalid("mean sRMSE needs at least one guess"));
    }
    if truths.len() != u || sigmas.len() != u {
        return Err(QcsError::DimensionMismatch {
            expected: u,
            found: if truths.len() != u { truths.len() } else { sigmas.len() },
        });
    }
    let mut acc = 0.0;
    for ((p, r), s) in predictions.iter().zip(truths).zip(sigmas) {
        if !(*s > 0.0) {
            return Err(QcsError::OutOfRange {
                name: "sigma",
                value: *s,
                range: "> 0",
            });
        }
        acc += ((p - r) / s).powi(2);
    }
    Ok((acc / u as f64).sqrt())
}

/// Population standard deviation of each pixel over `samples`.
pub fn pixel_sigmas(samples: &[&Signal]) -> Result<Vec<f64>> {
    let first = samples.first().ok_or_else(|| QcsError::invalid("no samples"))?;
    let n = samples.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            let mean = samples.iter().map(|s| s.pixels()[i]).sum::<f64>() / n;
            (samples.iter().map(|s| (s.pixels()[i] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect())
}

/// Settings of a reconstruction sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub n_c_values: Vec<usize>,
    /// Channels to run; a `none` entry (or zero strength) is the noiseless run.
    pub noise: Vec<(NoiseKind, f64)>,
    pub n_samples: u64,
    pub n_traj: usize,
    pub hardware_faithful: bool,
    /// Project with [`build_gaussian_hamiltonian`] instead of the binarized one.
    pub gaussian: bool,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n_c_values: vec![2, 3, 4],
            noise: vec![(NoiseKind::None, 0.0)],
            n_samples: DEFAULT_SAMPLES,
            n_traj: DEFAULT_TRAJECTORIES,
            hardware_faithful: false,
            gaussian: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_c: usize,
    pub noise_kind: NoiseKind,
    pub p: f64,
    pub test_index: usize,
    pub srmse: f64,
    /// Projection energy reached, for diagnostics.
    pub final_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub n_c: usize,
    pub noise_kind: NoiseKind,
    pub p: f64,
    /// Pooled over every guess of every test signal in the configuration.
    pub mean_srmse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SweepSummary>,
}

/// Pixels measured for test signal `t` at `n_c` measurements: the first
/// `n_c` entries of one random order per signal, so larger `n_c` measures a
/// superset. Shared by every noise setting of a sweep.
pub fn sensing_indices(n: usize, n_c: usize, t: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(rng::derive(seed, SALT_INDICES), t as u64);
    let mut idx = index::sample(&mut r, n, n).into_vec();
    idx.truncate(n_c);
    idx.sort_unstable();
    idx
}

/// Senses, projects, samples and scores every test signal for each `N_c`
/// and noise setting. Random choices depend only on `(seed, N_c, test
/// index)`, so a zero-strength channel reproduces the noiseless rows.
pub fn run_reconstruction_sweep(
    test: &[&Signal],
    machine: &BornMachine,
    map: &PixelMap,
    sigmas: &[f64],
    qcfg: &QiteConfig,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let n = machine.n_pixels();
    if test.is_empty() {
        return Err(QcsError::invalid("the test set is empty"));
    }
    if sigmas.len() != n || map.len() != n {
        return Err(QcsError::DimensionMismatch {
            expected: n,
            found: if sigmas.len() != n { sigmas.len() } else { map.len() },
        });
    }
    for &n_c in &opts.n_c_values {
        if n_c == 0 || n_c >= n {
            return Err(QcsError::invalid(format!("N_c must be in 1..{n}, got {n_c}")));
        }
    }
    let specs: Vec<NoiseSpec> = opts
        .noise
        .iter()
        .map(|&(k, p)| {
            if k == NoiseKind::None {
                Ok(NoiseSpec::none())
            } else {
                NoiseSpec::on_all(k, p, n)
            }
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &n_c in &opts.n_c_values {
        for (spec, &(kind, p)) in specs.iter().zip(&opts.noise) {
            let jobs: Vec<(SweepRow, ReconstructionResult)> = test
                .par_iter()
                .enumerate()
                .map(|(t, signal)| {
                    let idx = sensing_indices(n, n_c, t, opts.seed);
                    let outcome = sense(signal, &idx, map)?;
                    let key = rng::derive(opts.seed, ((n_c as u64) << 32) | t as u64);
                    let qseed = rng::derive(key, SALT_QITE);
                    let h = if opts.gaussian {
                        build_gaussian_hamiltonian(&outcome, map, n)?
                    } else {
                        build_projection_hamiltonian(&outcome, n)?
                    };
                    let (rec, energy) = if opts.hardware_faithful {
                        let rec = sample_reconstruction_faithful(
                            machine, &h, &outcome, map, qcfg, spec, opts.n_traj, opts.n_samples, qseed,
                        )?;
                        (rec, f64::NAN)
                    } else {
                        let proj = project(machine, &h, qcfg, spec, opts.n_traj, qseed)?;
                        let mut r = rng::seeded(rng::derive(key, SALT_SAMPLES));
                        let rec = sample_reconstruction(&proj.machine, &outcome, map, opts.n_samples, &mut r)?;
                        (rec, proj.energies.last().map_or(f64::NAN, |pt| pt.energy))
                    };
                    finish(rec, signal, sigmas, n_c, kind, p, t, energy)
                })
                .collect::<Result<_>>()?;
            let (mut pred, mut truth, mut sig) = (Vec::new(), Vec::new(), Vec::new());
            for (row, rec) in jobs {
                let (a, b, c) = scorable(&rec.pixels, &rec.estimates, &rec.truths, sigmas);
                pred.extend(a);
                truth.extend(b);
                sig.extend(c);
                rows.push(row);
            }
            summaries.push(SweepSummary {
                n_c,
                noise_kind: kind,
                p,
                mean_srmse: mean_srmse(&pred, &truth, &sig)?,
            });
        }
    }
    Ok(SweepResult { rows, summaries })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    mut rec: ReconstructionResult,
    signal: &Signal,
    sigmas: &[f64],
    n_c: usize,
    noise_kind: NoiseKind,
    p: f64,
    test_index: usize,
    final_energy: f64,
) -> Result<(SweepRow, ReconstructionResult)> {
    let srmse = rec.score(signal, sigmas)?;
    Ok((
        SweepRow {
            n_c,
            noise_kind,
            p,
            test_index,
            srmse,
            final_energy,
        },
        rec,
    ))
}
