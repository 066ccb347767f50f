//! Subcommand implementations. Each validates its inputs, computes every
//! row, then writes once.

use std::fs;
use std::path::{Path, PathBuf};

use qcs::bornmachine::{
    fidelity_vs_noise_experiment, fidelity_vs_size_experiment, psi_global, quantum_average_direct, BornMachine,
    TrainingSet,
};
use qcs::dataio::{generate_synthetic_lidar, preprocess, sample_subsets, Dataset};
use qcs::encoding::PixelMap;
use qcs::noise::{NoiseKind, NoiseSpec};
use qcs::pipeline::{pixel_sigmas, run_reconstruction_sweep, SweepOptions};
use qcs::qcore::{Hamiltonian, QuantumState, StateVector};
use qcs::qite::{qite_run, qite_run_noisy, QiteConfig, QiteTrajectory, MAX_DOMAIN};
use qcs::rng;

use crate::output::{banner, emit, io, num, Table};
use crate::{Cli, CliError, Command, GenDataArgs, Initial, QiteArgs, ReconstructArgs, TrainArgs};

const DATA_CSV: &str = "dataset.csv";
const DATA_JSON: &str = "dataset.json";

// Seed offsets so commands sharing --seed draw independent subsets.
const SALT_GLOBAL: u64 = 1;
const SALT_SIZES: u64 = 2;
const SALT_SUBSET: u64 = 3;
const SALT_NOISE: u64 = 4;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenData(a) => gen_data(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Qite(a) => qite(cli, a),
        Command::Reconstruct(a) => reconstruct(cli, a),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn gen_data(cli: &Cli, a: &GenDataArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(invalid("--n must be at least 1"));
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    let raw = generate_synthetic_lidar(a.n, cli.seed)?;
    let ds = preprocess(&raw, cli.seed)?;
    fs::create_dir_all(&dir).map_err(io)?;
    ds.save(&dir.join(DATA_CSV), &dir.join(DATA_JSON))?;
    log::info!(
        "wrote {} samples ({} train, {} test) to {}",
        ds.len(),
        ds.train_indices().len(),
        ds.test_indices().len(),
        dir.display()
    );
    Ok(())
}

fn load_dataset(dir: &Path) -> Result<Dataset, CliError> {
    let (csv, json) = (dir.join(DATA_CSV), dir.join(DATA_JSON));
    for p in [&csv, &json] {
        if !p.is_file() {
            return Err(invalid(format!("dataset file {} not found (run gen-data first)", p.display())));
        }
    }
    Ok(Dataset::load(&csv, &json)?)
}

fn train_subset(ds: &Dataset, map: &PixelMap, size: usize, seed: u64) -> Result<TrainingSet, CliError> {
    let idx = sample_subsets(ds, size, 1, seed)?.subsets.remove(0);
    Ok(TrainingSet::from_indices(ds, &idx, map.clone())?)
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<(), CliError> {
    if a.repeats == 0 || a.global_cap == 0 {
        return Err(invalid("--repeats and --global-cap must be at least 1"));
    }
    if a.sizes.is_empty() || a.sizes.contains(&0) {
        return Err(invalid("--sizes must list positive subset sizes"));
    }
    if !a.noise.is_empty() {
        if a.trajectories == 0 || a.subset_size == 0 {
            return Err(invalid("--trajectories and --subset-size must be at least 1"));
        }
        for &k in &a.noise {
            for &p in &a.probs {
                NoiseSpec::on_all(k, p, 1)?;
            }
        }
    }
    let ds = load_dataset(&a.data.data)?;
    let map = PixelMap::uniform(ds.n_pixels());
    let global = psi_global(&ds, &map, a.global_cap, rng::derive(cli.seed, SALT_GLOBAL))?;

    let table = if a.noise.is_empty() {
        let rows = fidelity_vs_size_experiment(&ds, &map, &global, &a.sizes, a.repeats, rng::derive(cli.seed, SALT_SIZES))?;
        let mut t = Table::new(&["subset_size", "repeat", "fidelity_global", "fidelity_even"]);
        for r in rows {
            t.push(vec![
                r.subset_size.to_string(),
                r.repeat.to_string(),
                num(r.fidelity_global)?,
                num(r.fidelity_even)?,
            ]);
        }
        t
    } else {
        let d = train_subset(&ds, &map, a.subset_size, rng::derive(cli.seed, SALT_SUBSET))?;
        let rows = fidelity_vs_noise_experiment(
            &d,
            &global,
            &a.noise,
            &a.probs,
            a.trajectories,
            rng::derive(cli.seed, SALT_NOISE),
        )?;
        let mut t = Table::new(&["noise_kind", "p", "fidelity_global"]);
        for r in rows {
            t.push(vec![r.noise_kind.to_string(), num(r.p)?, num(r.fidelity_global)?]);
        }
        t
    };
    emit(&table, cli.out.as_deref(), banner("train", cli.no_banner).as_deref())
}

fn qite(cli: &Cli, a: &QiteArgs) -> Result<(), CliError> {
    let h: Hamiltonian = a
        .hamiltonian
        .parse()
        .map_err(|e: qcs::QcsError| invalid(format!("hamiltonian: {e}")))?;
    let n = h.n_qubits();
    let domain = a.domain.unwrap_or(n.min(MAX_DOMAIN));
    let cfg = QiteConfig::new(a.dbeta, a.beta)?
        .with_tomography(a.shots)
        .with_max_discards(a.max_discards)
        .with_domain_size(Some(domain));
    cfg.validate()?;
    if domain > n {
        return Err(invalid(format!("--domain {domain} exceeds the {n}-qubit register")));
    }
    if a.runs == 0 {
        return Err(invalid("--runs must be at least 1"));
    }
    let spec = if a.noise_kind == NoiseKind::None {
        NoiseSpec::none()
    } else {
        NoiseSpec::on_all(a.noise_kind, a.noise_prob, n)?
    };
    let state0 = match a.initial {
        Initial::Plus => QuantumState::Pure(StateVector::plus_state(n)),
        Initial::Zero => QuantumState::Pure(StateVector::zero_state(n)),
        Initial::Born => {
            let ds = load_dataset(&a.data)?;
            if ds.n_pixels() != n {
                return Err(invalid(format!(
                    "hamiltonian acts on {n} qubits but the dataset has {} pixels",
                    ds.n_pixels()
                )));
            }
            let map = PixelMap::uniform(n);
            let d = train_subset(&ds, &map, a.train_size, rng::derive(cli.seed, SALT_SUBSET))?;
            quantum_average_direct(&d)?.into_state()
        }
    };

    let trajectories: Vec<QiteTrajectory> = if spec.is_noiseless() {
        (0..a.runs)
            .map(|i| qite_run(&h, &state0, &cfg, cli.seed.wrapping_add(i as u64)))
            .collect::<qcs::Result<_>>()?
    } else {
        qite_run_noisy(&h, &state0, &cfg, &spec, a.runs, cli.seed)?.trajectories
    };
    let mut t = Table::new(&["beta", "energy", "discards", "trajectory_id"]);
    for (id, tr) in trajectories.iter().enumerate() {
        for p in &tr.points {
            t.push(vec![num(p.beta)?, num(p.energy)?, p.discards.to_string(), id.to_string()]);
        }
    }
    emit(&t, cli.out.as_deref(), banner("qite", cli.no_banner).as_deref())
}

fn reconstruct(cli: &Cli, a: &ReconstructArgs) -> Result<(), CliError> {
    if a.train_size == 0 || a.test_size == 0 || a.samples == 0 || a.trajectories == 0 {
        return Err(invalid("--train-size, --test-size, --samples and --trajectories must be at least 1"));
    }
    if a.n_c.is_empty() {
        return Err(invalid("--n-c must list at least one value"));
    }
    if a.noise_kind == NoiseKind::None && !a.noise_probs.is_empty() {
        return Err(invalid("--noise-probs needs --noise-kind"));
    }
    let qcfg = QiteConfig::new(a.dbeta, a.beta)?;
    let mut noise = vec![(NoiseKind::None, 0.0)];
    for &p in &a.noise_probs {
        NoiseSpec::on_all(a.noise_kind, p, 1)?;
        noise.push((a.noise_kind, p));
    }

    let ds = load_dataset(&a.data.data)?;
    let n = ds.n_pixels();
    if a.n_c.iter().any(|&c| c == 0 || c >= n) {
        return Err(invalid(format!("--n-c values must lie in 1..{n}")));
    }
    let test: Vec<_> = ds.test().into_iter().take(a.test_size).collect();
    if test.len() < a.test_size {
        log::warn!("test split holds only {} signals (requested {})", test.len(), a.test_size);
    }
    let map = PixelMap::uniform(n);
    let d = train_subset(&ds, &map, a.train_size, rng::derive(cli.seed, SALT_SUBSET))?;
    let machine: BornMachine = quantum_average_direct(&d)?;
    let sigmas = pixel_sigmas(&ds.train())?;
    let opts = SweepOptions {
        n_c_values: a.n_c.clone(),
        noise,
        n_samples: a.samples,
        n_traj: a.trajectories,
        hardware_faithful: a.hardware_faithful,
        gaussian: a.gaussian,
        seed: cli.seed,
    };
    let qcfg = qcfg.with_domain_size(Some(n.min(MAX_DOMAIN)));
    let res = run_reconstruction_sweep(&test, &machine, &map, &sigmas, &qcfg, &opts)?;

    let mut t = Table::new(&["N_c", "noise_kind", "p", "test_index", "srmse", "mean_srmse"]);
    for r in &res.rows {
        t.push(vec![
            r.n_c.to_string(),
            r.noise_kind.to_string(),
            num(r.p)?,
            r.test_index.to_string(),
            num(r.srmse)?,
            String::new(),
        ]);
    }
    for s in &res.summaries {
        t.push(vec![
            s.n_c.to_string(),
            s.noise_kind.to_string(),
            num(s.p)?,
            String::new(),
            String::new(),
            num(s.mean_srmse)?,
        ]);
    }
    log::info!("{} rows", t.len());
    emit(&t, cli.out.as_deref(), banner("reconstruct", cli.no_banner).as_deref())
}
