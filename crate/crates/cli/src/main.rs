#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use plmbo::datagen::{gen_banana, gen_two_gaussians, load_csv, save_csv, write_csv, write_manifest};
use plmbo::mbo::InitMode;
use plmbo::pipeline::{bench, bench_table, prepare, run_prepared, DatasetSpec, RunConfig, RunOptions, Sigma};
use plmbo::simplicial::spectra_curves;
use plmbo::{Dataset, SparseSymMatrix};
use thiserror::Error;

/// Largest point cloud the filtration command accepts.
const MAX_FILTRATION_POINTS: usize = 200;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] plmbo::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "plmbo", version, about = "Persistent-Laplacian MBO classification and filtration spectra")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset as CSV.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Run repeated PL-MBO classification trials and emit a JSON report.
    Classify(ClassifyArgs),
    /// Betti numbers and first nonzero eigenvalues over a Rips filtration.
    Filtration(FiltrationArgs),
    /// Sweep l_n and/or n_labeled and emit a CSV table.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
enum GenKind {
    /// Two isotropic Gaussians with a given Bayes error.
    TwoGaussians {
        #[arg(long, default_value_t = 550)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 0.05)]
        bayes_error: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV; a manifest is written next to it. Stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Two interleaved crescents.
    Banana {
        #[arg(long, default_value_t = 5300)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Voronoi,
}

/// Configuration sources shared by `classify` and `bench`; flags override the file.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Labeled CSV dataset (overrides the config's dataset).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    n_n: Option<usize>,
    /// Kernel width or "auto".
    #[arg(long)]
    sigma: Option<Sigma>,
    #[arg(long)]
    l_n: Option<usize>,
    #[arg(long)]
    include_last: bool,
    #[arg(long)]
    invert_threshold: bool,
    #[arg(long)]
    n_e: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    init_mode: Option<InitArg>,
    #[arg(long)]
    n_labeled: Option<usize>,
    #[arg(long)]
    n_trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample labels uniformly instead of per class.
    #[arg(long)]
    unbalanced: bool,
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    eig_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Report path; falls back to the config's `output`, then stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    no_timings: bool,
    /// Write the base Laplacian and every family member as coordinate lists.
    #[arg(long, value_name = "DIR")]
    export_family: Option<PathBuf>,
    /// Write per-iteration energy traces.
    #[arg(long, value_name = "DIR")]
    trace_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FiltrationArgs {
    /// CSV of 2-D or 3-D points (a `label` column is ignored).
    points: PathBuf,
    /// Radius grid as START:STOP:STEP.
    #[arg(long, conflicts_with = "radii")]
    grid: Option<String>,
    /// Explicit ascending radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Label budgets to sweep.
    #[arg(long, value_delimiter = ',')]
    sweep_n_labeled: Option<Vec<usize>>,
    /// Family sizes to sweep.
    #[arg(long, value_delimiter = ',')]
    sweep_l_n: Option<Vec<usize>>,
    /// CSV table path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write each cell's JSON report here.
    #[arg(long, value_name = "DIR")]
    reports: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PLMBO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| usage(format!("PLMBO_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(usage("PLMBO_THREADS must be a positive integer, got 0"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot configure {n} threads: {e}")))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Classify(a) => cmd_classify(a),
        Command::Filtration(a) => cmd_filtration(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn cmd_gen(kind: GenKind) -> Result<()> {
    let (spec, output) = match kind {
        GenKind::TwoGaussians {
            n,
            dim,
            bayes_error,
            seed,
            output,
        } => (
            DatasetSpec::TwoGaussians {
                n,
                dim,
                bayes_error,
                seed,
            },
            output,
        ),
        GenKind::Banana { n, noise, seed, output } => (DatasetSpec::Banana { n, noise, seed }, output),
    };
    let data = match &spec {
        DatasetSpec::TwoGaussians {
            n,
            dim,
            bayes_error,
            seed,
        } => gen_two_gaussians(*n, *dim, *bayes_error, *seed),
        DatasetSpec::Banana { n, noise, seed } => gen_banana(*n, *noise, *seed),
        DatasetSpec::Csv { .. } => unreachable!("gen only builds synthetic specs"),
    }
    .map_err(|e| match e {
        plmbo::Error::InvalidArgument(m) => usage(m),
        e => e.into(),
    })?;
    match output {
        Some(path) => {
            save_csv(&data, &path)?;
            let manifest = write_manifest(&path, &spec)?;
            info!("wrote {} rows to {} ({})", data.len(), path.display(), manifest.display());
        }
        None => write_csv(&data, io::stdout().lock())?,
    }
    Ok(())
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_at(path))?;
            RunConfig::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &args.data {
        cfg.dataset = Some(DatasetSpec::Csv { path: p.clone() });
    }
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field {
                cfg.$field = v;
            })*
        };
    }
    set!(n_n, sigma, l_n, dt, mu, n_t, epsilon, n_labeled, n_trials, seed, eig_tol);
    if args.n_e.is_some() {
        cfg.n_e = args.n_e;
    }
    if let Some(m) = args.init_mode {
        cfg.init_mode = match m {
            InitArg::Random => InitMode::Random,
            InitArg::Voronoi => InitMode::Voronoi,
        };
    }
    cfg.include_last |= args.include_last;
    cfg.invert_threshold |= args.invert_threshold;
    if args.unbalanced {
        cfg.balanced = false;
    }
    if let Some(v) = args.n_trees {
        cfg.forest.n_trees = v;
    }
    if let Some(v) = args.max_depth {
        cfg.forest.max_depth = v;
    }
    if let Some(v) = args.min_leaf {
        cfg.forest.min_leaf = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset<f64>> {
    let spec = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| usage("no dataset: pass --data or set `dataset` in the config"))?;
    let data = spec.load()?;
    if data.ground_truth().is_none() {
        return Err(usage("every point needs a label to score trials"));
    }
    Ok(data)
}

fn write_output(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).map_err(io_at(p)),
        None => io::stdout().lock().write_all(body.as_bytes()).map_err(io_at(Path::new("<stdout>"))),
    }
}

fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let data = load_dataset(&cfg)?;
    info!("{}: {} points, {} features", data.name, data.len(), data.dim());
    let prep = prepare(&data, &cfg)?;
    info!(
        "sigma {:.4}, {} kNN pairs, {} family members",
        prep.sigma,
        prep.n_edges,
        prep.family.len()
    );
    if let Some(dir) = &a.export_family {
        export_family(dir, &prep.family.base, &prep.family.members)?;
    }
    let opts = RunOptions {
        trace_dir: a.trace_dir.clone(),
    };
    let report = run_prepared(&data, &cfg, &prep, &opts)?;
    for t in &report.trials {
        if let Some(e) = &t.error {
            log::warn!("trial {} failed: {e}", t.index);
        }
    }
    let mut body = if a.no_timings {
        report.canonical_json()?
    } else {
        report.to_json()?
    };
    body.push('\n');
    write_output(a.output.as_deref().or(cfg.output.as_deref()), &body)?;
    if report.mean_accuracy.is_none() {
        return Err(CliError::Core(plmbo::Error::InvalidArgument(format!(
            "all {} trials failed",
            report.n_failed
        ))));
    }
    Ok(())
}

/// `i j value` lines, zero-based, upper triangle including the diagonal.
fn export_family(dir: &Path, base: &SparseSymMatrix<f64>, members: &[SparseSymMatrix<f64>]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let write = |name: String, m: &SparseSymMatrix<f64>| -> Result<()> {
        let mut s = format!("# n={} nnz={}\n", m.n(), m.entries().len());
        for &(i, j, v) in m.entries() {
            s.push_str(&format!("{i} {j} {v:?}\n"));
        }
        let path = dir.join(name);
        fs::write(&path, s).map_err(io_at(&path))
    };
    write("base.txt".into(), base)?;
    for (k, m) in members.iter().enumerate() {
        write(format!("member_{}.txt", k + 1), m)?;
    }
    Ok(())
}

/// Parses `START:STOP:STEP` into the radii `START + i·STEP ≤ STOP`.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(usage(format!("grid must be START:STOP:STEP, got {spec:?}")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage(format!("bad grid value {s:?}")))
    };
    let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
    if !(step > 0.0) || stop < start || start < 0.0 {
        return Err(usage(format!("grid needs 0 <= START <= STOP and STEP > 0, got {spec:?}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // Snap to 12 decimals so 0.05·3 is 0.15 rather than 0.15000000000000002.
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn cmd_filtration(a: FiltrationArgs) -> Result<()> {
    let grid = match (&a.grid, &a.radii) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(r)) => r.clone(),
        (None, None) => return Err(usage("give --grid START:STOP:STEP or --radii")),
    };
    if grid.is_empty() {
        return Err(usage("the radius grid is empty"));
    }
    if grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(usage("radii must be finite, nonnegative and ascending"));
    }
    let pts = load_csv(&a.points)?;
    if pts.is_empty() || pts.len() > MAX_FILTRATION_POINTS {
        return Err(usage(format!(
            "{} points; the filtration command accepts 1 to {MAX_FILTRATION_POINTS}",
            pts.len()
        )));
    }
    if !(2..=3).contains(&pts.dim()) {
        return Err(usage(format!("points must be 2-D or 3-D, got {} columns", pts.dim())));
    }
    let rows = spectra_curves(pts.features(), &grid)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    let mut out = String::from("radius,beta0,beta1,lambda0,lambda1\n");
    for r in rows {
        out.push_str(&format!(
            "{:?},{},{},{},{}\n",
            r.radius,
            r.beta0,
            r.beta1,
            opt(r.lambda0),
            opt(r.lambda1)
        ));
    }
    write_output(a.output.as_deref(), &out)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(v) = a.sweep_n_labeled {
        cfg.sweep.n_labeled = v;
    }
    if let Some(v) = a.sweep_l_n {
        cfg.sweep.l_n = v;
    }
    for &l in &cfg.sweep.l_n {
        RunConfig { l_n: l, ..cfg.clone() }.validate().map_err(|e| usage(e.to_string()))?;
    }
    let data = load_dataset(&cfg)?;
    let cells = bench(&data, &cfg, &RunOptions::default())?;
    if let Some(dir) = &a.reports {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
        for c in &cells {
            let path = dir.join(format!("cell_l{}_n{}.json", c.l_n, c.n_labeled));
            fs::write(&path, c.report.to_json()? + "\n").map_err(io_at(&path))?;
        }
    }
    write_output(a.output.as_deref(), &bench_table(&cells))
}
