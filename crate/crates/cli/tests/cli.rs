//! Runs the `qcs` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcs")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = qcs(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv.as_bytes());
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn gen(dir: &Path, n: &str) {
    ok(&["gen-data", "--n", n, "--seed", "7", "--out", dir.to_str().unwrap()]);
}

#[test]
fn gen_data_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    gen(&a, "3000");
    gen(&b, "3000");
    for f in ["dataset.csv", "dataset.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn validation_errors_exit_2_without_output() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("never.csv");
    let o = out.to_str().unwrap();
    assert_eq!(qcs(&["gen-data", "--n", "0", "--out", o]).status.code(), Some(2));
    assert_eq!(qcs(&["qite", "--hamiltonian", "-ZIX+", "--out", o]).status.code(), Some(2));
    assert_eq!(qcs(&["qite", "--hamiltonian", "-ZII -IIZ", "--dbeta", "0", "--out", o]).status.code(), Some(2));
    let missing = t.path().join("nothing");
    let m = missing.to_str().unwrap();
    assert_eq!(qcs(&["train", "--data", m, "--out", o]).status.code(), Some(2));
    assert_eq!(qcs(&["reconstruct", "--data", m, "--out", o]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn qite_exact_reaches_ground_energy() {
    let csv = ok(&["qite", "--hamiltonian", "-ZII -IIZ", "--dbeta", "0.005", "--shots", "exact", "--no-banner"]);
    let r = rows(&csv);
    assert_eq!(csv.lines().next().unwrap(), "beta,energy,discards,trajectory_id");
    assert_eq!(r.len(), 601);
    let last = &r[r.len() - 1];
    assert_eq!(last[0], "3");
    let e: f64 = last[1].parse().unwrap();
    assert!((e + 2.0).abs() < 0.05, "{e}");
}

#[test]
fn banner_is_the_only_difference_between_runs() {
    let args = ["qite", "--hamiltonian", "-ZI -IZ", "--shots", "1e3", "--runs", "2", "--beta", "1"];
    let a = ok(&args);
    assert!(a.starts_with("# qcs qite"));
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&a), body(&ok(&args)));
    let quiet: Vec<&str> = args.iter().copied().chain(["--no-banner"]).collect();
    assert_eq!(ok(&quiet), body(&a) + "\n");
    let ids: Vec<String> = rows(&a).into_iter().map(|r| r[3].clone()).collect();
    assert!(ids.contains(&"0".to_string()) && ids.contains(&"1".to_string()));
}

#[test]
fn noisy_qite_writes_one_block_per_trajectory() {
    let csv = ok(&[
        "qite", "--hamiltonian", "-ZII -IIZ", "--beta", "0.5", "--noise-kind", "bitflip", "--noise-prob", "0.01",
        "--runs", "3", "--no-banner",
    ]);
    let r = rows(&csv);
    assert_eq!(r.len(), 3 * 11);
    assert!(r.iter().all(|x| x[1].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn train_size_and_noise_sweeps() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("d");
    gen(&d, "10000");
    let data = d.to_str().unwrap();
    let size = rows(&ok(&["train", "--data", data, "--no-banner"]));
    assert_eq!(size.len(), 40);
    for r in &size {
        let fg: f64 = r[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&fg));
    }
    let noise = rows(&ok(&[
        "train", "--data", data, "--noise", "bitflip,dephasing,depolarizing", "--trajectories", "100", "--no-banner",
    ]));
    assert_eq!(noise.len(), 15);
    assert_eq!(noise[0][0], "bitflip");
    assert_eq!(noise[5][0], "phaseflip");
    for r in &noise {
        let fg: f64 = r[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&fg));
    }
}

#[test]
fn reconstruct_row_accounting_and_zero_noise() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("d");
    gen(&d, "2000");
    let out = t.path().join("rec.csv");
    ok(&[
        "reconstruct", "--data", d.to_str().unwrap(), "--test-size", "3", "--train-size", "32", "--samples", "500",
        "--dbeta", "0.1", "--beta", "2", "--noise-kind", "bitflip", "--noise-probs", "0", "--trajectories", "2",
        "--out", out.to_str().unwrap(), "--no-banner",
    ]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "N_c,noise_kind,p,test_index,srmse,mean_srmse");
    let r = rows(&text);
    let per_test: Vec<_> = r.iter().filter(|x| !x[3].is_empty()).collect();
    let means: Vec<_> = r.iter().filter(|x| x[3].is_empty()).collect();
    assert_eq!(per_test.len(), 3 * 2 * 3);
    assert_eq!(means.len(), 3 * 2);
    for pair in means.chunks(2) {
        assert_eq!(pair[0][0], pair[1][0]);
        assert_eq!(pair[0][5], pair[1][5]);
    }
}

#[test]
fn reconstruct_variants_run() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("d");
    gen(&d, "2000");
    let base = [
        "reconstruct", "--data", d.to_str().unwrap(), "--test-size", "2", "--train-size", "16", "--n-c", "3",
        "--dbeta", "0.1", "--beta", "2", "--no-banner",
    ];
    for extra in [["--gaussian", "--samples", "400"], ["--hardware-faithful", "--samples", "40"]] {
        let args: Vec<&str> = base.iter().copied().chain(extra).collect();
        let r = rows(&ok(&args));
        assert_eq!(r.len(), 3, "{extra:?}");
        assert!(r[2][5].parse::<f64>().unwrap().is_finite());
    }
}
