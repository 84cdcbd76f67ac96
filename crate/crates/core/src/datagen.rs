//! Synthetic benchmark generators, CSV ingestion/export and labeled-subset sampling.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`, which
//! produces the same stream on every platform.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Mean separation `Δ` of two unit-variance Gaussians whose Bayes error is `bayes_error`.
pub fn mean_separation(bayes_error: f64) -> Result<f64> {
    if !(bayes_error > 0.0 && bayes_error < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "bayes_error must lie in (0, 0.5), got {bayes_error}"
        )));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(-2.0 * std.inverse_cdf(bayes_error))
}

/// Class sizes `⌈n/2⌉` and `⌊n/2⌋`, shuffled together.
fn balanced_classes(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut y: Vec<usize> = (0..n).map(|i| usize::from(i >= n.div_ceil(2))).collect();
    y.shuffle(rng);
    y
}

/// Two isotropic unit-variance Gaussians in `dim` dimensions with means `±(Δ/2)·1/√dim`.
pub fn gen_two_gaussians(n: usize, dim: usize, bayes_error: f64, seed: u64) -> Result<Dataset<f64>> {
    let delta = mean_separation(bayes_error)?;
    if n < 2 || dim == 0 {
        return Err(Error::InvalidArgument(format!("need n >= 2 and dim >= 1, got n={n}, dim={dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = balanced_classes(n, &mut rng);
    let offset = delta / 2.0 / (dim as f64).sqrt();
    let mut x = DenseMatrix::zeros(n, dim);
    for (i, &c) in y.iter().enumerate() {
        let sign = if c == 0 { -1.0 } else { 1.0 };
        for v in x.row_mut(i) {
            let z: f64 = rng.sample(StandardNormal);
            *v = sign * offset + z;
        }
    }
    Dataset::new("two-gaussians", x, y.into_iter().map(Some).collect())
}

/// Two interleaved crescents: class 0 on `(cos θ, sin θ)`, class 1 on
/// `(1 − cos θ, 0.5 − sin θ)`, `θ ~ U[0, π]`, plus isotropic Gaussian noise.
pub fn gen_banana(n: usize, noise: f64, seed: u64) -> Result<Dataset<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::InvalidArgument(format!("noise must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = balanced_classes(n, &mut rng);
    let mut x = DenseMatrix::zeros(n, 2);
    for (i, &c) in y.iter().enumerate() {
        let theta = rng.random::<f64>() * std::f64::consts::PI;
        let (px, py) = if c == 0 {
            (theta.cos(), theta.sin())
        } else {
            (1.0 - theta.cos(), 0.5 - theta.sin())
        };
        let (nx, ny): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        x[(i, 0)] = px + noise * nx;
        x[(i, 1)] = py + noise * ny;
    }
    Dataset::new("banana", x, y.into_iter().map(Some).collect())
}

/// Writes `f0..f{d−1}` and, if any point is labeled, a `label` column.
pub fn save_csv(data: &Dataset<f64>, path: &Path) -> Result<()> {
    write_csv(data, File::create(path)?)
}

/// [`save_csv`] to any writer.
pub fn write_csv<W: Write>(data: &Dataset<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_labels = data.labels().iter().any(Option::is_some);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    if with_labels {
        header.push("label".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.point(i).iter().map(|v| format!("{v:?}")).collect();
        if with_labels {
            rec.push(data.labels()[i].map_or(String::new(), |l| l.to_string()));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Csv { line, msg: e.to_string() }
}

/// Reads a CSV with a header row. A column named `label` holds optional integer class
/// ids; every other column is a feature.
pub fn load_csv(path: &Path) -> Result<Dataset<f64>> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.is_empty() {
        return Err(Error::Csv {
            line: 1,
            msg: "missing header row".into(),
        });
    }
    let label_col = header.iter().position(|h| h.trim() == "label");
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != label_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::Csv {
            line: 1,
            msg: "no feature columns".into(),
        });
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::Csv {
                line,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for &c in &feature_cols {
            let cell = rec[c].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                line,
                msg: format!("non-numeric feature {cell:?} in column {:?}", &header[c]),
            })?;
            values.push(v);
        }
        labels.push(match label_col {
            Some(c) if !rec[c].trim().is_empty() => Some(rec[c].trim().parse::<usize>().map_err(|_| Error::Csv {
                line,
                msg: format!("label {:?} is not a nonnegative integer", &rec[c]),
            })?),
            _ => None,
        });
    }
    let name = path.file_stem().map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned());
    let features = DenseMatrix::from_vec(labels.len(), feature_cols.len(), values)?;
    Dataset::new(name, features, labels)
}

/// Sidecar manifest path: `data.csv` → `data.csv.json`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `params` as pretty JSON next to `csv_path`.
pub fn write_manifest<P: Serialize>(csv_path: &Path, params: &P) -> Result<PathBuf> {
    let path = manifest_path(csv_path);
    let mut f = File::create(&path)?;
    serde_json::to_writer_pretty(&mut f, params)?;
    f.write_all(b"\n")?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub n_labeled: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub per_class_balance: bool,
}

/// Labeled mask for trial `trial_index`: exactly `plan.n_labeled` points, stratified by
/// class when `per_class_balance` (remainders go to the lowest class ids).
///
/// Each trial draws from ChaCha8 seeded with `plan.seed` on stream `trial_index`.
pub fn sample_labels(truth: &[usize], plan: &TrialPlan, trial_index: usize) -> Result<Vec<bool>> {
    let n = truth.len();
    if plan.n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    if plan.n_labeled > n {
        return Err(Error::InvalidArgument(format!(
            "cannot label {} of {n} points",
            plan.n_labeled
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(trial_index as u64);
    let mut mask = vec![false; n];
    if !plan.per_class_balance {
        for i in sample(&mut rng, n, plan.n_labeled) {
            mask[i] = true;
        }
        return Ok(mask);
    }
    let k = truth.iter().max().map_or(0, |&m| m + 1);
    if plan.n_labeled < k {
        return Err(Error::InvalidArgument(format!(
            "balanced sampling needs at least one label per class ({k} classes, {} labels)",
            plan.n_labeled
        )));
    }
    for class in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| truth[i] == class).collect();
        let want = plan.n_labeled / k + usize::from(class < plan.n_labeled % k);
        if members.len() < want {
            return Err(Error::InsufficientClass {
                class,
                available: members.len(),
                requested: want,
            });
        }
        for j in sample(&mut rng, members.len(), want) {
            mask[members[j]] = true;
        }
    }
    Ok(mask)
}
