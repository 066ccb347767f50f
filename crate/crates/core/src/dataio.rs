//! Datasets of 5-pixel LIDAR energy-quartile heights: a synthetic generator,
//! preprocessing (zero removal, min-max normalization, train/test split),
//! disjoint subset draws, and CSV plus JSON sidecar storage.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::Signal;
use crate::rng;
use crate::{QcsError, Result};

pub const N_LIDAR_PIXELS: usize = 5;
pub const TRAIN_FRACTION: f64 = 0.7;
pub const DEFAULT_N_SAMPLES: usize = 10_000;

/// Parameters of the synthetic return-energy profiles. Heights are in metres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    /// Fraction of samples replaced by all-zero rows.
    pub zero_fraction: f64,
    /// Canopy lobe count is uniform on `0..=max_canopy_lobes`.
    pub max_canopy_lobes: usize,
    pub canopy_height: (f64, f64),
    pub canopy_width: (f64, f64),
    pub ground_width: (f64, f64),
    pub max_height: f64,
    pub bins: usize,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            zero_fraction: 0.05,
            max_canopy_lobes: 2,
            canopy_height: (3.0, 30.0),
            canopy_width: (0.5, 4.0),
            ground_width: (0.15, 0.6),
            max_height: 45.0,
            bins: 450,
        }
    }
}

impl LidarConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.zero_fraction) {
            return Err(QcsError::OutOfRange {
                name: "zero_fraction",
                value: self.zero_fraction,
                range: "[0, 1]",
            });
        }
        let (h0, h1) = self.canopy_height;
        let (w0, w1) = self.canopy_width;
        if !(0.0 < h0 && h0 < h1 && h1 < self.max_height && 0.0 < w0 && w0 < w1 && 0.0 < self.ground_width.0 && self.ground_width.0 < self.ground_width.1) {
            return Err(QcsError::invalid("inconsistent synthetic LIDAR ranges"));
        }
        if self.bins < 10 {
            return Err(QcsError::invalid("synthetic LIDAR needs at least 10 height bins"));
        }
        Ok(())
    }
}

/// Cumulative-energy levels reported as pixels 0..3; pixel 4 is total height.
const ENERGY_LEVELS: [f64; 4] = [0.25, 0.5, 0.75, 0.98];

fn profile_sample<R: Rng>(cfg: &LidarConfig, r: &mut R) -> Vec<f64> {
    // both draws always happen so the stream layout does not depend on the outcome
    let is_zero = r.random::<f64>() < cfg.zero_fraction;
    let lobes = r.random_range(0..=cfg.max_canopy_lobes);
    let mut parts = vec![(0.0, r.random_range(cfg.ground_width.0..cfg.ground_width.1), r.random_range(0.2..1.0))];
    for _ in 0..lobes {
        parts.push((
            r.random_range(cfg.canopy_height.0..cfg.canopy_height.1),
            r.random_range(cfg.canopy_width.0..cfg.canopy_width.1),
            r.random_range(0.2..1.0),
        ));
    }
    if is_zero {
        return vec![0.0; N_LIDAR_PIXELS];
    }

    let dh = cfg.max_height / cfg.bins as f64;
    let energy: Vec<f64> = (0..cfg.bins)
        .map(|k| {
            let h = (k as f64 + 0.5) * dh;
            parts
                .iter()
                .map(|(c, w, a)| a * (-0.5 * ((h - c) / w).powi(2)).exp() / w)
                .sum()
        })
        .collect();
    let total: f64 = energy.iter().sum();
    let mut out = Vec::with_capacity(N_LIDAR_PIXELS);
    let mut cum = 0.0;
    let mut k = 0;
    for level in ENERGY_LEVELS {
        while k < cfg.bins && cum + energy[k] < level * total {
            cum += energy[k];
            k += 1;
        }
        // linear interpolation inside the crossing bin
        let frac = if k < cfg.bins && energy[k] > 0.0 {
            ((level * total - cum) / energy[k]).clamp(0.0, 1.0)
        } else {
            1.0
        };
        out.push((k.min(cfg.bins - 1) as f64 + frac) * dh);
    }
    let canopy_top = parts[1..]
        .iter()
        .map(|(c, w, _)| c + 2.0 * w)
        .fold(0.0, f64::max)
        .min(cfg.max_height);
    out.push(out[3].max(canopy_top));
    out
}

/// Raw samples from the default generator.
pub fn generate_synthetic_lidar(n_samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    generate_synthetic_lidar_with(n_samples, seed, &LidarConfig::default())
}

/// Raw samples with five non-negative, non-decreasing heights each. Sample
/// `i` depends only on `(seed, i)`.
pub fn generate_synthetic_lidar_with(n_samples: usize, seed: u64, cfg: &LidarConfig) -> Result<Vec<Vec<f64>>> {
    if n_samples == 0 {
        return Err(QcsError::invalid("n_samples must be at least 1"));
    }
    cfg.validate()?;
    Ok((0..n_samples as u64)
        .into_par_iter()
        .map(|i| profile_sample(cfg, &mut rng::stream(seed, i)))
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// One min and max across every pixel.
    #[default]
    Global,
    PerPixel,
}

/// Normalization constants: a scalar for global, one value per pixel otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Global(f64),
    PerPixel(Vec<f64>),
}

impl Bound {
    fn at(&self, i: usize) -> f64 {
        match self {
            Bound::Global(x) => *x,
            Bound::PerPixel(v) => v[i],
        }
    }
}

/// JSON sidecar contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub min: Bound,
    pub max: Bound,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Signal>,
    meta: DatasetMeta,
}

fn is_zero_sample(s: &[f64]) -> bool {
    s.iter().all(|x| *x == 0.0)
}

fn check_rows(raw: &[Vec<f64>]) -> Result<usize> {
    let width = raw.first().map(Vec::len).unwrap_or(0);
    if width == 0 {
        return Err(QcsError::invalid("no samples"));
    }
    for row in raw {
        if row.len() != width {
            return Err(QcsError::DimensionMismatch {
                expected: width,
                found: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(QcsError::invalid("samples must be finite"));
        }
    }
    Ok(width)
}

/// Drops all-zero samples, min-max normalizes globally, and draws a shuffled
/// 70/30 split.
pub fn preprocess(raw: &[Vec<f64>], seed: u64) -> Result<Dataset> {
    preprocess_with(raw, seed, Normalization::Global)
}

pub fn preprocess_with(raw: &[Vec<f64>], seed: u64, norm: Normalization) -> Result<Dataset> {
    let width = check_rows(raw)?;
    let kept: Vec<&Vec<f64>> = raw.iter().filter(|s| !is_zero_sample(s)).collect();
    if kept.is_empty() {
        return Err(QcsError::invalid("every sample is all-zero"));
    }
    if kept.len() < 10 {
        return Err(QcsError::invalid(format!(
            "need at least 10 non-zero samples, found {}",
            kept.len()
        )));
    }
    let fold = |i: Option<usize>, pick: fn(f64, f64) -> f64, init: f64| {
        kept.iter()
            .flat_map(|s| s.iter().enumerate())
            .filter(|(j, _)| i.is_none_or(|i| i == *j))
            .fold(init, |acc, (_, x)| pick(acc, *x))
    };
    let (min, max) = match norm {
        Normalization::Global => (
            Bound::Global(fold(None, f64::min, f64::INFINITY)),
            Bound::Global(fold(None, f64::max, f64::NEG_INFINITY)),
        ),
        Normalization::PerPixel => (
            Bound::PerPixel((0..width).map(|i| fold(Some(i), f64::min, f64::INFINITY)).collect()),
            Bound::PerPixel((0..width).map(|i| fold(Some(i), f64::max, f64::NEG_INFINITY)).collect()),
        ),
    };
    for i in 0..width {
        if max.at(i) <= min.at(i) {
            return Err(QcsError::invalid(format!("pixel {i} is constant; cannot normalize")));
        }
    }
    let samples = kept
        .iter()
        .map(|s| {
            let px = s
                .iter()
                .enumerate()
                .map(|(i, x)| ((x - min.at(i)) / (max.at(i) - min.at(i))).clamp(0.0, 1.0))
                .collect();
            Signal::new(px)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
    let mut train_indices = order[..n_train].to_vec();
    let mut test_indices = order[n_train..].to_vec();
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(Dataset {
        samples,
        meta: DatasetMeta {
            seed,
            min,
            max,
            train_indices,
            test_indices,
        },
    })
}

impl Dataset {
    /// Reassembles a dataset from normalized samples and its sidecar.
    pub fn from_parts(rows: Vec<Vec<f64>>, meta: DatasetMeta) -> Result<Self> {
        let width = check_rows(&rows)?;
        for b in [&meta.min, &meta.max] {
            if let Bound::PerPixel(v) = b {
                if v.len() != width {
                    return Err(QcsError::DimensionMismatch {
                        expected: width,
                        found: v.len(),
                    });
                }
            }
        }
        let mut seen = vec![false; rows.len()];
        for &i in meta.train_indices.iter().chain(&meta.test_indices) {
            if i >= rows.len() || std::mem::replace(&mut seen[i], true) {
                return Err(QcsError::invalid(format!(
                    "split index {i} is out of range or repeated"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(QcsError::invalid("train and test indices must cover every sample"));
        }
        let samples = rows.into_iter().map(Signal::new).collect::<Result<Vec<_>>>()?;
        Ok(Dataset { samples, meta })
    }

    pub fn samples(&self) -> &[Signal] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_pixels(&self) -> usize {
        self.samples[0].len()
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn seed(&self) -> u64 {
        self.meta.seed
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.meta.train_indices
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.meta.test_indices
    }

    pub fn train(&self) -> Vec<&Signal> {
        self.meta.train_indices.iter().map(|&i| &self.samples[i]).collect()
    }

    pub fn test(&self) -> Vec<&Signal> {
        self.meta.test_indices.iter().map(|&i| &self.samples[i]).collect()
    }

    /// Maps a normalized signal back to raw units.
    pub fn denormalize(&self, s: &Signal) -> Vec<f64> {
        s.pixels()
            .iter()
            .enumerate()
            .map(|(i, x)| self.meta.min.at(i) + x * (self.meta.max.at(i) - self.meta.min.at(i)))
            .collect()
    }

    /// Writes the normalized samples as CSV and the metadata as JSON.
    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.samples.iter().map(|s| s.pixels().to_vec()).collect();
        save_csv(&rows, csv_path)?;
        let mut w = BufWriter::new(File::create(json_path)?);
        serde_json::to_writer_pretty(&mut w, &self.meta)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(csv_path: &Path, json_path: &Path) -> Result<Self> {
        let rows = load_csv(csv_path)?;
        let meta: DatasetMeta = serde_json::from_reader(std::io::BufReader::new(File::open(json_path)?))?;
        Self::from_parts(rows, meta)
    }
}

/// Result of [`sample_subsets`]; `repeats` may be smaller than requested.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetDraw {
    /// Each subset lists sample indices into the dataset (all from the train split).
    pub subsets: Vec<Vec<usize>>,
    pub requested: usize,
}

impl SubsetDraw {
    pub fn reduced(&self) -> bool {
        self.subsets.len() < self.requested
    }
}

/// Draws `repeats` disjoint uniform subsets of the train split. When the
/// split cannot hold that many, repeats drop to the largest feasible count
/// and a warning is logged.
pub fn sample_subsets(dataset: &Dataset, size: usize, repeats: usize, seed: u64) -> Result<SubsetDraw> {
    let pool = dataset.train_indices();
    if size == 0 || repeats == 0 {
        return Err(QcsError::invalid("subset size and repeats must be at least 1"));
    }
    if size > pool.len() {
        return Err(QcsError::invalid(format!(
            "subset size {size} exceeds the train split ({})",
            pool.len()
        )));
    }
    let feasible = repeats.min(pool.len() / size);
    if feasible < repeats {
        log::warn!(
            "only {feasible} disjoint subsets of size {size} fit in {} training samples (requested {repeats})",
            pool.len()
        );
    }
    let mut order = pool.to_vec();
    order.shuffle(&mut rng::seeded(seed));
    let subsets = order.chunks_exact(size).take(feasible).map(|c| c.to_vec()).collect();
    Ok(SubsetDraw {
        subsets,
        requested: repeats,
    })
}

fn header(width: usize) -> Vec<String> {
    (0..width).map(|i| format!("pixel_{i}")).collect()
}

/// Writes rows under a `pixel_0..pixel_{k-1}` header using shortest
/// round-trip float formatting.
pub fn save_csv(rows: &[Vec<f64>], path: &Path) -> Result<()> {
    let width = check_rows(rows)?;
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(header(width)).map_err(csv_io)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format!("{x}"))).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> QcsError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => QcsError::Io(io),
        other => QcsError::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Reads a pixel CSV. Lines starting with `#` are ignored. The header must be
/// exactly `pixel_0,...,pixel_{k-1}`.
pub fn load_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_io)?;
    let head = r.headers().map_err(csv_io)?.clone();
    let head_line = head.position().map(|p| p.line()).unwrap_or(1) as usize;
    let width = head.len();
    if width == 0 || head.iter().ne(header(width).iter().map(String::as_str)) {
        return Err(QcsError::Parse {
            line: head_line,
            message: format!("expected header pixel_0..pixel_{}", width.saturating_sub(1)),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_io)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0) as usize;
        if rec.len() != width {
            return Err(QcsError::Parse {
                line,
                message: format!("expected {width} pixels, found {}", rec.len()),
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| QcsError::Parse {
                    line,
                    message: format!("pixel_{j}: {cell:?} is not a finite number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(QcsError::Parse {
            line: head_line,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}
