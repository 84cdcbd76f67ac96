//! End-to-end PL-MBO runs: graph, family and eigenbases are built once per dataset and
//! shared by every labeled-subset trial.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{gen_banana, gen_two_gaussians, load_csv, sample_labels, TrialPlan};
use crate::dataset::Dataset;
use crate::ensemble::{accuracy, concatenate_outputs, forest_fit, forest_predict, split_by_mask, ForestParams};
use crate::error::{Error, Result};
use crate::graph::{gaussian_weights, knn_graph, knn_graph_kdtree, median_distance, symmetric_laplacian, Metric};
use crate::linalg::{smallest_eigenpairs, EigenBasis};
use crate::mbo::{gl_energy, initialize_state, is_indicator_row, mbo_iterate, FidelitySpec, InitMode, MboConfig, StateMatrix};
use crate::pl_family::{build_family, LaplacianFamily, OffDiagStats};

/// Where the points come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Csv { path: PathBuf },
    TwoGaussians { n: usize, dim: usize, bayes_error: f64, seed: u64 },
    Banana { n: usize, noise: f64, seed: u64 },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset<f64>> {
        match self {
            Self::Csv { path } => load_csv(path),
            Self::TwoGaussians {
                n,
                dim,
                bayes_error,
                seed,
            } => gen_two_gaussians(*n, *dim, *bayes_error, *seed),
            Self::Banana { n, noise, seed } => gen_banana(*n, *noise, *seed),
        }
    }
}

/// Gaussian kernel width: a fixed value or the median kNN distance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "SigmaRepr", into = "SigmaRepr")]
pub enum Sigma {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaRepr {
    Value(f64),
    Name(String),
}

impl TryFrom<SigmaRepr> for Sigma {
    type Error = String;

    fn try_from(r: SigmaRepr) -> std::result::Result<Self, String> {
        match r {
            SigmaRepr::Value(v) if v > 0.0 && v.is_finite() => Ok(Sigma::Fixed(v)),
            SigmaRepr::Value(v) => Err(format!("sigma must be positive, got {v}")),
            SigmaRepr::Name(s) if s == "auto" => Ok(Sigma::Auto),
            SigmaRepr::Name(s) => Err(format!("sigma must be a number or \"auto\", got {s:?}")),
        }
    }
}

impl From<Sigma> for SigmaRepr {
    fn from(s: Sigma) -> Self {
        match s {
            Sigma::Auto => SigmaRepr::Name("auto".into()),
            Sigma::Fixed(v) => SigmaRepr::Value(v),
        }
    }
}

impl std::str::FromStr for Sigma {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Sigma::Auto);
        }
        let v: f64 = s.parse().map_err(|_| format!("sigma must be a number or \"auto\", got {s:?}"))?;
        Sigma::try_from(SigmaRepr::Value(v))
    }
}

/// Parameter grid for `bench`; an empty list keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub n_labeled: Vec<usize>,
    pub l_n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: Option<DatasetSpec>,
    pub n_n: usize,
    pub metric: Metric,
    pub sigma: Sigma,
    pub l_n: usize,
    pub include_last: bool,
    pub invert_threshold: bool,
    /// `None` means `min(50, N − 1)`.
    pub n_e: Option<usize>,
    pub dt: f64,
    pub mu: f64,
    pub n_t: usize,
    pub epsilon: f64,
    pub init_mode: InitMode,
    pub n_labeled: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub balanced: bool,
    pub forest: ForestParams,
    pub eig_tol: f64,
    pub output: Option<PathBuf>,
    pub sweep: Sweep,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            n_n: 15,
            metric: Metric::Euclidean,
            sigma: Sigma::Auto,
            l_n: 4,
            include_last: false,
            invert_threshold: false,
            n_e: None,
            dt: 0.1,
            mu: 50.0,
            n_t: 30,
            epsilon: 1.0,
            init_mode: InitMode::Voronoi,
            n_labeled: 50,
            n_trials: 10,
            seed: 1,
            balanced: true,
            forest: ForestParams::default(),
            eig_tol: 1e-8,
            output: None,
            sweep: Sweep::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_n == 0 {
            return bad("n_n must be positive".into());
        }
        if self.l_n < 2 {
            return bad(format!("l_n must be at least 2, got {}", self.l_n));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return bad(format!("mu must be >= 0, got {}", self.mu));
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if self.n_e == Some(0) {
            return bad("n_e must be positive".into());
        }
        if self.forest.n_trees == 0 || self.forest.min_leaf == 0 {
            return bad("forest n_trees and min_leaf must be positive".into());
        }
        self.mbo(1).validate()
    }

    pub fn n_e_for(&self, n: usize) -> usize {
        self.n_e.unwrap_or(50).min(n.saturating_sub(1)).max(1)
    }

    fn mbo(&self, n: usize) -> MboConfig {
        MboConfig {
            dt: self.dt,
            n_t: self.n_t,
            n_e: self.n_e_for(n.max(2)),
            epsilon: self.epsilon,
            seed: self.seed,
            init_mode: self.init_mode,
            eig_tol: self.eig_tol,
        }
    }

    fn plan(&self) -> TrialPlan {
        TrialPlan {
            n_labeled: self.n_labeled,
            n_trials: self.n_trials,
            seed: self.seed,
            per_class_balance: self.balanced,
        }
    }
}

/// Label-independent state shared by all trials.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub sigma: f64,
    pub n_edges: usize,
    pub family: LaplacianFamily<f64>,
    pub bases: Vec<EigenBasis<f64>>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub graph_s: f64,
    pub family_s: f64,
    pub eigen_s: f64,
    pub trials_s: f64,
    pub total_s: f64,
}

/// Builds the graph, the family and each member's eigenbasis.
pub fn prepare(data: &Dataset<f64>, cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let n = data.len();
    if cfg.n_n >= n {
        return Err(Error::InvalidArgument(format!("n_n = {} needs more than {n} points", cfg.n_n)));
    }
    let t0 = Instant::now();
    let pairs = if cfg.metric == Metric::Euclidean && data.dim() <= 8 {
        knn_graph_kdtree(data, cfg.n_n)?
    } else {
        knn_graph(data, cfg.n_n, cfg.metric)?
    };
    let sigma = match cfg.sigma {
        Sigma::Auto => median_distance(&pairs),
        Sigma::Fixed(s) => s,
    };
    let graph = gaussian_weights(&pairs, sigma)?;
    let base = symmetric_laplacian(&graph)?;
    let graph_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let family = build_family(&base, cfg.l_n, cfg.include_last, cfg.invert_threshold)?;
    let family_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let n_e = cfg.n_e_for(n);
    let bases = family
        .members
        .par_iter()
        .map(|m| smallest_eigenpairs(m, n_e, cfg.eig_tol))
        .collect::<Result<Vec<_>>>()?;
    let eigen_s = t2.elapsed().as_secs_f64();
    Ok(Prepared {
        sigma,
        n_edges: pairs.pairs.len(),
        family,
        bases,
        timings: Timings {
            graph_s,
            family_s,
            eigen_s,
            ..Timings::default()
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
    /// MBO iterations per family member.
    pub member_iterations: Vec<usize>,
    /// Every final member state row was an exact indicator.
    pub final_rows_indicator: bool,
    /// Initialisation reproduced every labeled row's indicator.
    pub labeled_rows_preserved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub dim: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub l_n: usize,
    pub members: usize,
    pub offdiag_stats: OffDiagStats<f64>,
    /// Undirected edge count of each member.
    pub member_edges: Vec<usize>,
    pub n_e: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub sigma: f64,
    pub graph_edges: usize,
    pub family: FamilySummary,
    pub trials: Vec<TrialRecord>,
    pub mean_accuracy: Option<f64>,
    /// Sample standard deviation (`n − 1` denominator); zero for a single trial.
    pub std_accuracy: Option<f64>,
    pub n_failed: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Timings>,
}

impl RunReport {
    /// JSON without the wall-clock section; identical for identical configurations.
    pub fn canonical_json(&self) -> Result<String> {
        let mut r = self.clone();
        r.timings = None;
        Ok(serde_json::to_string_pretty(&r)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Per-iteration `iteration,energy,changed_rows` CSVs, one per trial and member.
    pub trace_dir: Option<PathBuf>,
}

/// Runs every trial of `cfg` on `data`.
pub fn run(data: &Dataset<f64>, cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let prep = prepare(data, cfg)?;
    let mut report = run_prepared(data, cfg, &prep, opts)?;
    if let Some(t) = report.timings.as_mut() {
        t.total_s = start.elapsed().as_secs_f64();
    }
    Ok(report)
}

/// Runs the trials against an existing [`Prepared`].
pub fn run_prepared(data: &Dataset<f64>, cfg: &RunConfig, prep: &Prepared, opts: &RunOptions) -> Result<RunReport> {
    let truth = data
        .ground_truth()
        .ok_or_else(|| Error::InvalidArgument("every point needs a ground-truth label to score trials".into()))?;
    let k = data.n_classes();
    if let Some(dir) = &opts.trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let t0 = Instant::now();
    let trials: Vec<TrialRecord> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| match run_trial(data, &truth, k, cfg, prep, t, opts) {
            Ok(rec) => rec,
            Err(e) => TrialRecord {
                index: t,
                accuracy: None,
                error: Some(e.to_string()),
                n_train: 0,
                n_test: 0,
                member_iterations: Vec::new(),
                final_rows_indicator: true,
                labeled_rows_preserved: true,
            },
        })
        .collect();
    let trials_s = t0.elapsed().as_secs_f64();

    let accs: Vec<f64> = trials.iter().filter_map(|t| t.accuracy).collect();
    let (mean, std) = mean_std(&accs);
    Ok(RunReport {
        config: cfg.clone(),
        dataset: DatasetSummary {
            name: data.name.clone(),
            n: data.len(),
            dim: data.dim(),
            n_classes: k,
        },
        sigma: prep.sigma,
        graph_edges: prep.n_edges,
        family: FamilySummary {
            l_n: prep.family.l_n,
            members: prep.family.len(),
            offdiag_stats: prep.family.offdiag_stats,
            member_edges: prep.family.members.iter().map(|m| m.edge_set().len()).collect(),
            n_e: prep.bases.first().map_or(0, EigenBasis::len),
        },
        n_failed: trials.len() - accs.len(),
        trials,
        mean_accuracy: mean,
        std_accuracy: std,
        timings: Some(Timings {
            trials_s,
            total_s: prep.timings.graph_s + prep.timings.family_s + prep.timings.eigen_s + trials_s,
            ..prep.timings
        }),
    })
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

fn run_trial(
    data: &Dataset<f64>,
    truth: &[usize],
    k: usize,
    cfg: &RunConfig,
    prep: &Prepared,
    trial: usize,
    opts: &RunOptions,
) -> Result<TrialRecord> {
    let mask = sample_labels(truth, &cfg.plan(), trial)?;
    let n_train = mask.iter().filter(|&&m| m).count();
    if n_train == truth.len() {
        return Err(Error::InvalidArgument("every point is labeled, so the test set is empty".into()));
    }
    let labels: Vec<Option<usize>> = truth.iter().zip(&mask).map(|(&y, &m)| m.then_some(y)).collect();
    let fid = FidelitySpec::new(&labels, k, cfg.mu)?;
    let mbo_cfg = MboConfig {
        seed: cfg.seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        ..cfg.mbo(data.len())
    };
    let init = initialize_state(&fid, data, &mbo_cfg)?;
    let labeled_rows_preserved = (0..data.len()).all(|i| !mask[i] || init.row(i) == fid.u_labeled().row(i));

    let outcomes = prep
        .family
        .members
        .par_iter()
        .zip(&prep.bases)
        .enumerate()
        .map(|(m, (member, basis))| {
            let mut trace = String::from("iteration,energy,changed_rows\n");
            let mut energy_err = None;
            let mut observer = |it: usize, s: &StateMatrix<f64>, changed: usize| match gl_energy(s, member, &fid, cfg.epsilon) {
                Ok(e) => {
                    let _ = writeln!(trace, "{it},{e:?},{changed}");
                }
                Err(err) => energy_err = Some(err),
            };
            let out = if opts.trace_dir.is_some() {
                mbo_iterate(basis, &fid, init.clone(), cfg.dt, cfg.n_t, Some(&mut observer))?
            } else {
                mbo_iterate(basis, &fid, init.clone(), cfg.dt, cfg.n_t, None)?
            };
            if let Some(err) = energy_err {
                return Err(err);
            }
            if let Some(dir) = &opts.trace_dir {
                write_trace(dir, trial, m + 1, &trace)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let final_rows_indicator = outcomes
        .iter()
        .all(|o| (0..o.state.n()).all(|i| is_indicator_row(o.state.row(i))));
    let member_iterations = outcomes.iter().map(|o| o.iterations).collect();
    let states: Vec<StateMatrix<f64>> = outcomes.into_iter().map(|o| o.state).collect();
    let features = concatenate_outputs(&states, k)?;
    let full_labels: Vec<Option<usize>> = truth.iter().copied().map(Some).collect();
    let split = split_by_mask(&features, &full_labels, &mask)?;
    let row_ids: Vec<u64> = split.train_rows.iter().map(|&r| r as u64).collect();
    let model = forest_fit(&split.train_x, &split.train_y, Some(&row_ids), &cfg.forest, cfg.seed.wrapping_add(trial as u64))?;
    let pred = forest_predict(&model, &split.test_x)?;
    let test_truth: Vec<usize> = split.test_y.iter().map(|y| y.expect("ground truth is complete")).collect();
    Ok(TrialRecord {
        index: trial,
        accuracy: Some(accuracy(&pred, &test_truth)?),
        error: None,
        n_train,
        n_test: test_truth.len(),
        member_iterations,
        final_rows_indicator,
        labeled_rows_preserved,
    })
}

fn write_trace(dir: &Path, trial: usize, member: usize, body: &str) -> Result<()> {
    std::fs::write(dir.join(format!("trace_trial{trial}_member{member}.csv")), body)?;
    Ok(())
}

/// One sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub l_n: usize,
    pub n_labeled: usize,
    pub report: RunReport,
}

/// Runs `cfg` for every `(l_n, n_labeled)` combination of `cfg.sweep`.
pub fn bench(data: &Dataset<f64>, cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<BenchCell>> {
    let l_ns = if cfg.sweep.l_n.is_empty() { vec![cfg.l_n] } else { cfg.sweep.l_n.clone() };
    let labels = if cfg.sweep.n_labeled.is_empty() {
        vec![cfg.n_labeled]
    } else {
        cfg.sweep.n_labeled.clone()
    };
    let mut cells = Vec::new();
    for &l_n in &l_ns {
        let base = RunConfig { l_n, ..cfg.clone() };
        let prep = prepare(data, &base)?;
        for &n_labeled in &labels {
            let cell_cfg = RunConfig { n_labeled, ..base.clone() };
            let report = run_prepared(data, &cell_cfg, &prep, opts)?;
            cells.push(BenchCell { l_n, n_labeled, report });
        }
    }
    Ok(cells)
}

/// `l_n,n_labeled,mean_accuracy,std_accuracy,n_trials,n_failed` rows.
pub fn bench_table(cells: &[BenchCell]) -> String {
    let mut s = String::from("l_n,n_labeled,mean_accuracy,std_accuracy,n_trials,n_failed\n");
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            c.l_n,
            c.n_labeled,
            fmt(c.report.mean_accuracy),
            fmt(c.report.std_accuracy),
            c.report.trials.len(),
            c.report.n_failed
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_unknown_keys() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.n_e_for(30), 29);
        assert_eq!(c.n_e_for(550), 50);
        assert!(RunConfig::from_json(r#"{"n_nn": 3}"#).is_err());
        let c = RunConfig::from_json(r#"{"sigma": 0.5, "dataset": {"kind": "banana", "n": 10, "noise": 0.1, "seed": 2}}"#).unwrap();
        assert_eq!(c.sigma, Sigma::Fixed(0.5));
        assert!(RunConfig::from_json(r#"{"sigma": -1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"sigma": "median"}"#).is_err());
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_std(&[0.5, 1.0]);
        assert_eq!(m, Some(0.75));
        assert!((s.unwrap() - 0.125f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[]), (None, None));
    }

    #[test]
    fn small_run_end_to_end() {
        let data = gen_banana(120, 0.05, 3).unwrap();
        let cfg = RunConfig {
            n_n: 8,
            n_labeled: 10,
            n_trials: 3,
            forest: ForestParams {
                n_trees: 20,
                ..ForestParams::default()
            },
            ..RunConfig::default()
        };
        let r = run(&data, &cfg, &RunOptions::default()).unwrap();
        assert_eq!(r.trials.len(), 3);
        assert_eq!(r.n_failed, 0);
        assert!(r.trials.iter().all(|t| t.final_rows_indicator && t.labeled_rows_preserved));
        let again = run(&data, &cfg, &RunOptions::default()).unwrap();
        assert_eq!(r.canonical_json().unwrap(), again.canonical_json().unwrap());
    }

    #[test]
    fn all_labeled_trial_fails() {
        let data = gen_banana(40, 0.05, 3).unwrap();
        let cfg = RunConfig {
            n_n: 5,
            n_labeled: 40,
            n_trials: 1,
            ..RunConfig::default()
        };
        let r = run(&data, &cfg, &RunOptions::default()).unwrap();
        assert_eq!(r.n_failed, 1);
        assert!(r.mean_accuracy.is_none());
        assert!(r.trials[0].error.as_deref().unwrap().contains("test set is empty"));
    }
}
