//! Acceptance run: every criterion prints one PASS/FAIL line. The process
//! exits non-zero when any criterion fails.
//!
//! Shared fixtures mirror `qcs gen-data` and `qcs reconstruct` at their
//! default seed of 0.

use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use qcs::bornmachine::{
    fidelity_vs_noise_experiment, fidelity_vs_size_experiment, psi_global, quantum_average_circuit,
    quantum_average_direct, BornMachine, TrainingSet,
};
use qcs::dataio::{generate_synthetic_lidar, preprocess, sample_subsets, Dataset, DEFAULT_N_SAMPLES};
use qcs::encoding::{PixelMap, Signal};
use qcs::noise::{apply_channel, apply_channel_on, channel_kraus, inject_stochastic, multinomial, NoiseKind, NoiseSpec};
use qcs::pipeline::{
    build_projection_hamiltonian, mean_srmse, pixel_sigmas, project, run_reconstruction_sweep, sense, SweepOptions,
};
use qcs::qcore::{
    linalg, trace_distance, DensityMatrix, Hamiltonian, Matrix, Pauli, PauliString, PauliTerm, QuantumState,
    StateVector,
};
use qcs::qite::{qite_run, qite_run_noisy, qite_step, QiteConfig, Tomography};
use qcs::rng;

const SEED: u64 = 0;
// Seed offsets used by the command-line runner.
const SALT_GLOBAL: u64 = 1;
const SALT_SIZES: u64 = 2;
const SALT_SUBSET: u64 = 3;
const SALT_NOISE: u64 = 4;

struct Fixture {
    ds: Dataset,
    map: PixelMap,
    machine: BornMachine,
    subset: TrainingSet,
    global: BornMachine,
}

fn fixture() -> Fixture {
    let raw = generate_synthetic_lidar(DEFAULT_N_SAMPLES, SEED).unwrap();
    let ds = preprocess(&raw, SEED).unwrap();
    let map = PixelMap::uniform(ds.n_pixels());
    let idx = sample_subsets(&ds, 256, 1, rng::derive(SEED, SALT_SUBSET)).unwrap().subsets.remove(0);
    let subset = TrainingSet::from_indices(&ds, &idx, map.clone()).unwrap();
    let machine = quantum_average_direct(&subset).unwrap();
    let global = psi_global(&ds, &map, 1 << 14, rng::derive(SEED, SALT_GLOBAL)).unwrap();
    Fixture {
        ds,
        map,
        machine,
        subset,
        global,
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, took: Duration) -> bool {
    took < limit
}

/// QITE ground state of `-ZII -IIZ` with exact tomography.
fn c1() -> Verdict {
    let h: Hamiltonian = "-ZII -IIZ".parse().unwrap();
    let s0 = QuantumState::Pure(StateVector::plus_state(3));
    let cfg = QiteConfig::new(0.005, 3.0).unwrap().with_domain_size(Some(3));
    let t = Instant::now();
    let e = qite_run(&h, &s0, &cfg, SEED).unwrap().final_energy();
    let took = t.elapsed();
    verdict(
        (e + 2.0).abs() <= 0.05 && within(Duration::from_secs(10), took),
        format!("final energy {e:.6} (target -2 +/- 0.05), {took:.2?} (limit 10s)"),
    )
}

/// Monotone projection of the 256-sample machine.
fn c2(f: &Fixture) -> Verdict {
    let h: Hamiltonian = "-ZIIII -IIZII".parse().unwrap();
    let cfg = QiteConfig::new(0.05, 3.0).unwrap().with_domain_size(Some(5));
    let t = Instant::now();
    let tr = qite_run(&h, f.machine.state(), &cfg, SEED).unwrap();
    let took = t.elapsed();
    let worst_rise = tr
        .points
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let e = tr.final_energy();
    verdict(
        worst_rise <= 1e-9 && (e + 2.0).abs() <= 0.05 && within(Duration::from_secs(60), took),
        format!(
            "start {:.6}, final {e:.6}, largest step change {worst_rise:.2e} (limit 1e-9), {took:.2?} (limit 60s)",
            tr.points[0].energy
        ),
    )
}

const C3_CHANNELS: [NoiseKind; 4] = [
    NoiseKind::BitFlip,
    NoiseKind::PhaseFlip,
    NoiseKind::Depolarizing,
    NoiseKind::AmpDamp,
];
const C3_PROBS: [f64; 3] = [1e-6, 1e-5, 1e-4];

/// Fidelity falls and projected energy rises with noise strength.
fn c3(f: &Fixture) -> Verdict {
    let t = Instant::now();
    let rows = fidelity_vs_noise_experiment(
        &f.subset,
        &f.global,
        &C3_CHANNELS,
        &C3_PROBS,
        5000,
        rng::derive(SEED, SALT_NOISE),
    )
    .unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, kind) in C3_CHANNELS.iter().enumerate() {
        let fid: Vec<f64> = rows[k * 3..k * 3 + 3].iter().map(|r| r.fidelity_global).collect();
        let mono = fid.windows(2).all(|w| w[1] <= w[0]);
        ok &= mono;
        detail.push(format!("{kind} fidelity {:.5}/{:.5}/{:.5}", fid[0], fid[1], fid[2]));
    }

    let cfg = QiteConfig::new(0.05, 3.0).unwrap().with_domain_size(Some(5));
    for kind in C3_CHANNELS {
        // damping drives toward |0...0>, the ground state of -Z, so the
        // damped run targets +Z where decay opposes the projection
        let h: Hamiltonian = if kind == NoiseKind::AmpDamp { "+ZIIII +IIZII" } else { "-ZIIII -IIZII" }
            .parse()
            .unwrap();
        let energies: Vec<f64> = C3_PROBS
            .iter()
            .map(|&p| {
                let spec = NoiseSpec::on_all(kind, p, 5).unwrap();
                qite_run_noisy(&h, f.machine.state(), &cfg, &spec, 50, SEED).unwrap().final_energy()
            })
            .collect();
        let mono = energies.windows(2).all(|w| w[1] >= w[0]);
        ok &= mono;
        detail.push(format!(
            "{kind} energy {:.7}/{:.7}/{:.7}",
            energies[0], energies[1], energies[2]
        ));
    }
    let took = t.elapsed();
    ok &= within(Duration::from_secs(600), took);
    verdict(ok, format!("{}; {took:.1?} (limit 10 min)", detail.join("; ")))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Diminishing returns in training size.
fn c4(f: &Fixture) -> Verdict {
    let sizes: Vec<usize> = (3..=10).map(|k| 1 << k).collect();
    let rows = fidelity_vs_size_experiment(&f.ds, &f.map, &f.global, &sizes, 5, rng::derive(SEED, SALT_SIZES)).unwrap();
    let x: Vec<f64> = rows.iter().map(|r| r.subset_size as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.fidelity_global).collect();
    let rho = pearson(&ranks(&x), &ranks(&y));
    let n = rows.len() as f64;
    let t_stat = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
    let p_value = 1.0 - StudentsT::new(0.0, 1.0, n - 2.0).unwrap().cdf(t_stat);

    let mean = |size: usize, pick: fn(&qcs::bornmachine::SizeRow) -> f64| {
        let r: Vec<f64> = rows.iter().filter(|r| r.subset_size == size).map(pick).collect();
        r.iter().sum::<f64>() / r.len() as f64
    };
    let largest = *sizes.last().unwrap();
    let below = rows
        .iter()
        .filter(|r| r.subset_size == largest)
        .all(|r| r.fidelity_even < r.fidelity_global);
    let at256 = mean(256, |r| r.fidelity_global);
    verdict(
        rows.len() == 40 && rho > 0.0 && p_value < 0.05 && below,
        format!(
            "Spearman rho {rho:.3} (one-sided p {p_value:.2e}); at {largest}: global {:.5}, even {:.5}; reported: mean fidelity at 256 = {at256:.5}",
            mean(largest, |r| r.fidelity_global),
            mean(largest, |r| r.fidelity_even)
        ),
    )
}

fn random_density<R: Rng>(n: usize, r: &mut R) -> DensityMatrix {
    let d = 1 << n;
    let g = Matrix::from_fn(d, d, |_, _| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::from_matrix(m / tr).unwrap()
}

fn random_state<R: Rng>(n: usize, r: &mut R) -> StateVector {
    StateVector::from_unnormalized(
        (0..1 << n)
            .map(|_| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
            .collect(),
    )
    .unwrap()
}

/// Kraus completeness, trace preservation, and trajectory averages.
fn c5() -> Verdict {
    let mut r = rng::seeded(5);
    let mut worst_complete: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for kind in NoiseKind::CHANNELS {
        for _ in 0..1000 {
            let param: f64 = r.random();
            let ch = channel_kraus(kind, param).unwrap();
            worst_complete = worst_complete.max(ch.completeness_error());
            let rho = random_density(2, &mut r);
            let out = apply_channel(&rho, &ch, r.random_range(0..2)).unwrap();
            worst_trace = worst_trace.max((out.trace() - 1.0).abs());
        }
    }
    let mut worst_td: f64 = 0.0;
    let mut detail = Vec::new();
    for kind in NoiseKind::CHANNELS.into_iter().filter(|k| k.has_pauli_unraveling()) {
        let psi = random_state(2, &mut r);
        let spec = NoiseSpec::on_all(kind, 0.3, 2).unwrap();
        let mut exact = DensityMatrix::from_pure(&psi);
        apply_channel_on(&mut exact, &spec, &[0, 1]).unwrap();
        let mut acc = Matrix::zeros(4, 4);
        for _ in 0..5000 {
            let s = inject_stochastic(&psi, &spec, &mut r).unwrap();
            let v = nalgebra::DVector::from_column_slice(s.amplitudes());
            acc += &v * v.adjoint();
        }
        let mean = DensityMatrix::from_matrix(acc / C64::new(5000.0, 0.0)).unwrap();
        let td = trace_distance(&mean, &exact).unwrap();
        worst_td = worst_td.max(td);
        detail.push(format!("{kind} {td:.4}"));
    }
    verdict(
        worst_complete < 1e-10 && worst_trace < 1e-10 && worst_td < 0.02,
        format!(
            "completeness {worst_complete:.1e}, trace {worst_trace:.1e} (limits 1e-10); trajectory trace distance {} (limit 0.02; ampdamp has no statevector unraveling)",
            detail.join(", ")
        ),
    )
}

/// Postselected circuit against the direct sum.
fn c6() -> Verdict {
    let mut r = rng::seeded(6);
    let mut worst_f: f64 = 1.0;
    let mut min_margin = f64::INFINITY;
    for _ in 0..200 {
        let n = r.random_range(1..=4);
        let size = 1usize << r.random_range(0..=3);
        let map = PixelMap::new((0..n).map(|_| r.random_range(0.1..0.9)).collect()).unwrap();
        let samples = (0..size)
            .map(|_| Signal::new((0..n).map(|_| r.random()).collect()).unwrap())
            .collect();
        let d = TrainingSet::new(samples, map).unwrap();
        let direct = quantum_average_direct(&d).unwrap();
        let out = quantum_average_circuit(&d, &mut r).unwrap();
        worst_f = worst_f.min(out.machine.fidelity(&direct).unwrap());
        min_margin = min_margin.min(out.simulated_probability - 1.0 / size as f64);
    }
    verdict(
        // equality holds exactly for |D| = 1, so allow rounding error
        worst_f >= 1.0 - 1e-9 && min_margin >= -1e-12,
        format!(
            "worst fidelity {worst_f:.12}, smallest success probability minus 1/|D| {min_margin:.3e} (rounding slack 1e-12)"
        ),
    )
}

/// Fitted step against the normalized `exp(-dtau h)` target.
fn c7() -> Verdict {
    let mut r = rng::seeded(7);
    let dtau = 0.005;
    let mut worst: f64 = 1.0;
    for _ in 0..100 {
        let n = r.random_range(1..=4);
        let axes = PauliString::single(n, r.random_range(0..n), Pauli::Z);
        let term = PauliTerm::new(r.random_range(-2.0..2.0), axes);
        let psi = random_state(n, &mut r);
        let cfg = QiteConfig::new(dtau, dtau).unwrap().with_domain_size(Some(n));
        let (out, _) = qite_step(&psi, &term, &cfg, &mut r).unwrap();
        let m = linalg::hermitian_map(&term.axes.matrix(), |l| C64::new((-dtau * term.coefficient * l).exp(), 0.0));
        let v = m * nalgebra::DVector::from_column_slice(psi.amplitudes());
        let target = StateVector::from_unnormalized(v.iter().copied().collect()).unwrap();
        worst = worst.min(out.inner(&target).norm_sqr());
    }
    let bound = 1.0 - 10.0 * dtau * dtau;
    verdict(worst >= bound, format!("worst fidelity {worst:.10} (bound {bound})"))
}

/// The discard heuristic under 1e5 shots per observable.
fn c8() -> Verdict {
    let h: Hamiltonian = "-ZII -IIZ".parse().unwrap();
    let s0 = QuantumState::Pure(StateVector::plus_state(3));
    let mean_final = |discards: usize| {
        let cfg = QiteConfig::new(0.005, 3.0)
            .unwrap()
            .with_tomography(Tomography::Shots(100_000))
            .with_max_discards(discards)
            .with_domain_size(Some(3));
        (0..5u64).map(|s| qite_run(&h, &s0, &cfg, SEED + s).unwrap().final_energy()).sum::<f64>() / 5.0
    };
    let (e0, e30) = (mean_final(0), mean_final(30));
    verdict(
        (e30 + 2.0).abs() < (e0 + 2.0).abs(),
        format!("mean final energy: 0 discards {e0:.8}, 30 discards {e30:.8}"),
    )
}

/// Projected-then-sampled conditionals against brute force.
fn c9() -> Verdict {
    let mut r = rng::seeded(9);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 2..=3usize {
        for _ in 0..8 {
            let size = r.random_range(1..=8);
            let map = PixelMap::new((0..n).map(|_| r.random_range(0.2..0.8)).collect()).unwrap();
            let samples: Vec<Signal> = (0..size)
                .map(|_| Signal::new((0..n).map(|_| r.random()).collect()).unwrap())
                .collect();
            let probe = samples[0].clone();
            let machine = quantum_average_direct(&TrainingSet::new(samples, map.clone()).unwrap()).unwrap();
            let born = machine.state().probabilities();
            for mask in 1..(1usize << n) - 1 {
                let idx: Vec<usize> = (0..n).filter(|q| mask >> (n - 1 - q) & 1 == 1).collect();
                let outcome = sense(&probe, &idx, &map).unwrap();
                let matches = |k: usize| {
                    idx.iter()
                        .zip(&outcome.bits)
                        .all(|(&q, &b)| (k >> (n - 1 - q) & 1) as u8 == b)
                };
                let z: f64 = (0..born.len()).filter(|&k| matches(k)).map(|k| born[k]).sum();
                let h = build_projection_hamiltonian(&outcome, n).unwrap();
                let cfg = QiteConfig::new(0.05, 3.0).unwrap().with_domain_size(Some(n));
                let proj = project(&machine, &h, &cfg, &NoiseSpec::none(), 1, r.random()).unwrap();
                let counts = multinomial(&proj.machine.state().probabilities(), 100_000, &mut r);
                let tv: f64 = 0.5
                    * (0..born.len())
                        .map(|k| {
                            let exact = if matches(k) { born[k] / z } else { 0.0 };
                            (counts[k] as f64 / 1e5 - exact).abs()
                        })
                        .sum::<f64>();
                worst = worst.max(tv);
                cases += 1;
            }
        }
    }
    verdict(worst < 0.05, format!("{cases} cases, worst TV distance {worst:.4} (limit 0.05)"))
}

/// sRMSE formula and its trend in the number of measured pixels.
fn c10(f: &Fixture) -> Verdict {
    let mut r = rng::seeded(10);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let len = r.random_range(1..=20);
        let p: Vec<f64> = (0..len).map(|_| r.random()).collect();
        let t: Vec<f64> = (0..len).map(|_| r.random()).collect();
        let s: Vec<f64> = (0..len).map(|_| r.random_range(0.01..1.0)).collect();
        let mut acc = 0.0;
        for i in 0..len {
            acc += ((p[i] - t[i]) / s[i]).powi(2);
        }
        let direct = (acc / len as f64).sqrt();
        worst = worst.max((mean_srmse(&p, &t, &s).unwrap() - direct).abs());
    }

    let test: Vec<&Signal> = f.ds.test().into_iter().take(64).collect();
    let sigmas = pixel_sigmas(&f.ds.train()).unwrap();
    let qcfg = QiteConfig::new(0.05, 3.0).unwrap().with_domain_size(Some(5));
    let opts = SweepOptions {
        seed: SEED,
        ..SweepOptions::default()
    };
    let res = run_reconstruction_sweep(&test, &f.machine, &f.map, &sigmas, &qcfg, &opts).unwrap();
    let means: Vec<f64> = res.summaries.iter().map(|s| s.mean_srmse).collect();
    let mono = means.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        worst <= 1e-12 && mono,
        format!(
            "largest formula deviation {worst:.1e} (limit 1e-12); mean sRMSE at N_c = 2/3/4: {:.4}/{:.4}/{:.4}",
            means[0], means[1], means[2]
        ),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let start = Instant::now();
    let f = fixture();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("QITE ground state", Box::new(c1)),
        ("5-qubit projection", Box::new(|| c2(&f))),
        ("noise monotonicity", Box::new(|| c3(&f))),
        ("training-size returns", Box::new(|| c4(&f))),
        ("channel oracle", Box::new(c5)),
        ("circuit equivalence", Box::new(c6)),
        ("QITE step oracle", Box::new(c7)),
        ("shot-noise discards", Box::new(c8)),
        ("conditional sampling", Box::new(c9)),
        ("sRMSE", Box::new(|| c10(&f))),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<22} {}  {} [{:.1?}]",
            k + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1?}",
        criteria.len() - failed,
        start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
