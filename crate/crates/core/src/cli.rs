//! The `bdr` command line: `verify`, `experiment` and `stats`.
//!
//! Configuration is a JSON file plus flag overrides (flags win over the file,
//! the file over defaults). Exit codes: 0 success, 1 a check failed,
//! 2 usage or config error, 3 data error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bdr::InnerMode;
use crate::data::{load_mnist_dir, make_binary_task, subsample_with_test, DataError, Dataset, MNIST_FILES};
use crate::numeric::{mean_and_std_err, std_dev};
use crate::rng::SplitMix64;
use crate::stats::{
    bias_experiment, bias_records, clt_experiment, consistency_experiment, find_unbiased_beta, pilot_epsilon,
    write_records, BetaSchedule, StatsError, SyntheticProblem,
};
use crate::svm::{accuracy, predict, Formulation, SvmError, SvmTrainer};
use crate::verify::{run_suite, Suite, VerifyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Environment variable naming the directory with the IDX files.
pub const DATA_DIR_ENV: &str = "BDR_DATA_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("reading config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("svm: {0}")]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigRead { .. } | CliError::ConfigParse { .. } | CliError::Verify(_) => {
                EXIT_USAGE
            }
            CliError::Data(_) | CliError::Stats(StatsError::Data(_)) => EXIT_DATA,
            _ => EXIT_FAILED,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bdr", version, about = "Bayesian distributionally robust optimization")]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Training images per digit.
    #[arg(long, global = true)]
    pub per_class: Option<usize>,
    /// Train on the full pooled split instead of a per-class subsample.
    #[arg(long, global = true)]
    pub full_size: bool,
    #[arg(long, global = true, value_enum)]
    pub formulation: Option<FormulationArg>,
    #[arg(long, global = true, value_enum)]
    pub inner: Option<InnerArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormulationArg {
    Shared,
    Exact,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::Shared => Formulation::Shared,
            FormulationArg::Exact => Formulation::ExactEpigraph,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum InnerArg {
    PrimalLp,
    DualSearch,
    EqualWeight,
}

impl From<InnerArg> for InnerMode {
    fn from(i: InnerArg) -> Self {
        match i {
            InnerArg::PrimalLp => InnerMode::PrimalLp,
            InnerArg::DualSearch => InnerMode::DualSearch,
            InnerArg::EqualWeight => InnerMode::EqualWeight,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a seeded property suite and print a JSON report.
    Verify {
        /// duality, support, equal_weight, ordering, phi or mixture
        suite: String,
        /// Number of random cases (suite default when absent).
        #[arg(long)]
        cases: Option<usize>,
        /// Acceptance tolerance (suite default when absent).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Train SAA, DRO and BDR classifiers over the configured sweep.
    Experiment,
    /// Run a synthetic Monte-Carlo experiment.
    Stats {
        #[arg(value_enum)]
        kind: StatsKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum StatsKind {
    Bias,
    UnbiasedBeta,
    Consistency,
    Clt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsProblem {
    /// `P0 = uniform{0, 1}`.
    TwoAtom,
    /// `P0 = uniform{0, 1/2, 1}`.
    ThreeAtom,
}

impl StatsProblem {
    pub fn build(self) -> SyntheticProblem {
        match self {
            StatsProblem::TwoAtom => SyntheticProblem::two_atom(),
            StatsProblem::ThreeAtom => SyntheticProblem::three_atom(),
        }
    }
}

/// `{a · 10⁻ᵇ : a = 1..9, b = 4, 3, 2}`, ascending.
pub fn epsilon_grid() -> Vec<f64> {
    let mut v = Vec::with_capacity(27);
    for b in [4, 3, 2] {
        for a in 1..=9 {
            v.push(a as f64 * 10f64.powi(-b));
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `(positive digit, negative digit)`.
    pub pair: (u8, u8),
    pub per_class: usize,
    pub test_per_class: usize,
    pub full_size: bool,
    pub train_fraction: f64,
    /// Blend weights for BDR runs.
    pub betas: Vec<f64>,
    /// Radii for DRO runs.
    pub epsilons: Vec<f64>,
    /// Radii for BDR runs; the DRO radii when absent.
    pub bdr_epsilons: Option<Vec<f64>>,
    pub kappas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub formulation: Formulation,
    pub inner_mode: InnerMode,
    pub out: PathBuf,
    pub data_dir: Option<PathBuf>,
    /// Write measured solve times; zeros keep outputs byte-identical.
    pub record_wallclock: bool,
    pub stats: StatsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub problem: StatsProblem,
    pub n: usize,
    pub reps: usize,
    pub beta: f64,
    /// Radius; the pilot rule (twice the 95th percentile of `W_1`) when absent.
    pub epsilon: Option<f64>,
    pub pilot_reps: usize,
    pub n_schedule: Vec<usize>,
    /// Dirichlet schedule `β_n = α/(α + n)`.
    pub alpha: f64,
    pub tol_se_multiple: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            problem: StatsProblem::ThreeAtom,
            n: 10,
            reps: 2000,
            beta: 0.5,
            epsilon: None,
            pilot_reps: 500,
            n_schedule: vec![10, 100, 1000],
            alpha: 1.0,
            tol_se_multiple: 2.0,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pair: (1, 7),
            per_class: 500,
            test_per_class: 200,
            full_size: false,
            train_fraction: 0.8,
            betas: vec![0.3],
            epsilons: epsilon_grid(),
            bdr_epsilons: None,
            kappas: vec![0.25],
            trials: 20,
            seed: 0,
            formulation: Formulation::Shared,
            inner_mode: InnerMode::DualSearch,
            out: PathBuf::from("results"),
            data_dir: None,
            record_wallclock: true,
            stats: StatsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn apply_flags(&mut self, cli: &Cli) {
        if let Some(s) = cli.seed {
            self.seed = s;
        }
        if let Some(o) = &cli.out {
            self.out = o.clone();
        }
        if let Some(p) = cli.per_class {
            self.per_class = p;
        }
        if cli.full_size {
            self.full_size = true;
        }
        if let Some(f) = cli.formulation {
            self.formulation = f.into();
        }
        if let Some(i) = cli.inner {
            self.inner_mode = i.into();
        }
    }

    pub fn bdr_epsilons(&self) -> &[f64] {
        self.bdr_epsilons.as_deref().unwrap_or(&self.epsilons)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.betas.is_empty() || self.epsilons.is_empty() || self.kappas.is_empty() || self.bdr_epsilons().is_empty() {
            return bad("beta, epsilon and kappa lists must be nonempty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.pair.0 == self.pair.1 || self.pair.0 > 9 || self.pair.1 > 9 {
            return bad(format!("pair {:?} must be two distinct digits", self.pair));
        }
        if let Some(b) = self.betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return bad(format!("beta {b} not in [0, 1]"));
        }
        if let Some(e) = self.epsilons.iter().chain(self.bdr_epsilons()).find(|e| !(**e >= 0.0 && e.is_finite())) {
            return bad(format!("epsilon {e} must be finite and nonnegative"));
        }
        if let Some(k) = self.kappas.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return bad(format!("kappa {k} must be positive"));
        }
        if !self.full_size && (self.per_class == 0 || self.test_per_class == 0) {
            return bad("per_class and test_per_class must be positive".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} not in (0, 1)", self.train_fraction));
        }
        let s = &self.stats;
        if s.n == 0 || s.n_schedule.is_empty() || s.n_schedule.contains(&0) {
            return bad("stats sample sizes must be positive".into());
        }
        if !(0.0..=1.0).contains(&s.beta) {
            return bad(format!("stats beta {} not in [0, 1]", s.beta));
        }
        if s.epsilon.is_some_and(|e| !(e >= 0.0 && e.is_finite())) {
            return bad("stats epsilon must be finite and nonnegative".into());
        }
        Ok(())
    }

    /// IDX directory: config value, then `BDR_DATA_DIR`, then `data/mnist`.
    pub fn resolve_data_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data/mnist"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Saa,
    Dro,
    Bdr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub pair: String,
    pub method: Method,
    pub beta: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub trial: usize,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub objective: f64,
    pub wallclock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub beta: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub trials: usize,
    pub mean_test_acc: f64,
    pub std_test_acc: f64,
    pub mean_train_acc: f64,
    pub std_train_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestEpsilon {
    pub method: Method,
    pub beta: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub mean_test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub rows: Vec<SummaryRow>,
    /// Accuracy-maximizing radius per (method, β, κ); ties go to the smaller
    /// radius.
    pub best_epsilon: Vec<BestEpsilon>,
    pub data_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub summary: ExperimentSummary,
}

struct Solve {
    method: Method,
    beta: f64,
    epsilon: f64,
}

/// Solve list of one trial, ordered by decreasing `β·ε` so that each solve
/// warm-starts from a nearby basis.
fn solve_order(cfg: &RunConfig) -> Vec<Solve> {
    let mut v = vec![Solve {
        method: Method::Saa,
        beta: 0.0,
        epsilon: 0.0,
    }];
    v.extend(cfg.epsilons.iter().map(|&e| Solve {
        method: Method::Dro,
        beta: 1.0,
        epsilon: e,
    }));
    for &b in &cfg.betas {
        v.extend(cfg.bdr_epsilons().iter().map(|&e| Solve {
            method: Method::Bdr,
            beta: b,
            epsilon: e,
        }));
    }
    v.sort_by(|a, b| (b.beta * b.epsilon).total_cmp(&(a.beta * a.epsilon)));
    v
}

fn run_trial(ds: &Dataset, cfg: &RunConfig, kappa: f64, trial: usize) -> Result<Vec<ExperimentRow>, CliError> {
    let (pos, neg) = cfg.pair;
    let seed = SplitMix64::at(cfg.seed, trial as u64);
    let task = make_binary_task(ds, pos, neg, cfg.train_fraction, seed)?;
    let task = if cfg.full_size {
        task
    } else {
        subsample_with_test(ds, &task, cfg.per_class, cfg.test_per_class, seed ^ 0x5EED)?
    };
    let (x_train, y_train) = task.matrix(ds, &task.train);
    let (x_test, y_test) = task.matrix(ds, &task.test);
    let mut trainer = SvmTrainer::new(&x_train, &y_train, ds.cols(), kappa, cfg.formulation)?;
    let mut rows = Vec::new();
    for s in solve_order(cfg) {
        let start = Instant::now();
        let model = trainer.train(s.beta, s.epsilon)?;
        let wall = start.elapsed().as_secs_f64();
        rows.push(ExperimentRow {
            pair: format!("{pos}v{neg}"),
            method: s.method,
            beta: s.beta,
            epsilon: s.epsilon,
            kappa,
            trial,
            seed,
            train_acc: accuracy(&predict(&model, &x_train)?, &y_train)?,
            test_acc: accuracy(&predict(&model, &x_test)?, &y_test)?,
            objective: model.objective,
            wallclock: if cfg.record_wallclock { wall } else { 0.0 },
        });
    }
    Ok(rows)
}

fn summarize(rows: &[ExperimentRow], digest: &str) -> ExperimentSummary {
    let mut keys: Vec<(Method, f64, f64, f64)> = Vec::new();
    for r in rows {
        let k = (r.method, r.beta, r.epsilon, r.kappa);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let order = |m: Method| m as u8;
    keys.sort_by(|a, b| {
        order(a.0)
            .cmp(&order(b.0))
            .then(a.1.total_cmp(&b.1))
            .then(a.3.total_cmp(&b.3))
            .then(a.2.total_cmp(&b.2))
    });
    let summary: Vec<SummaryRow> = keys
        .iter()
        .map(|&(method, beta, epsilon, kappa)| {
            let sel: Vec<&ExperimentRow> = rows
                .iter()
                .filter(|r| (r.method, r.beta, r.epsilon, r.kappa) == (method, beta, epsilon, kappa))
                .collect();
            let test: Vec<f64> = sel.iter().map(|r| r.test_acc).collect();
            let train: Vec<f64> = sel.iter().map(|r| r.train_acc).collect();
            SummaryRow {
                method,
                beta,
                epsilon,
                kappa,
                trials: sel.len(),
                mean_test_acc: mean_and_std_err(&test).0,
                std_test_acc: if test.len() > 1 { std_dev(&test) } else { 0.0 },
                mean_train_acc: mean_and_std_err(&train).0,
                std_train_acc: if train.len() > 1 { std_dev(&train) } else { 0.0 },
            }
        })
        .collect();
    let mut best: Vec<BestEpsilon> = Vec::new();
    for s in summary.iter().filter(|s| s.method != Method::Saa) {
        match best
            .iter_mut()
            .find(|b| b.method == s.method && b.beta == s.beta && b.kappa == s.kappa)
        {
            Some(b) => {
                if s.mean_test_acc > b.mean_test_acc {
                    b.epsilon = s.epsilon;
                    b.mean_test_acc = s.mean_test_acc;
                }
            }
            None => best.push(BestEpsilon {
                method: s.method,
                beta: s.beta,
                kappa: s.kappa,
                epsilon: s.epsilon,
                mean_test_acc: s.mean_test_acc,
            }),
        }
    }
    ExperimentSummary {
        rows: summary,
        best_epsilon: best,
        data_digest: digest.to_string(),
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| CliError::Pool(e.to_string()))
}

/// Trains every (κ, trial) on the worker pool; rows come back in
/// (κ, trial, solve) order regardless of scheduling.
pub fn run_experiment(cfg: &RunConfig, ds: &Dataset, jobs: Option<usize>) -> Result<ExperimentOutput, CliError> {
    cfg.validate()?;
    let units: Vec<(f64, usize)> = cfg
        .kappas
        .iter()
        .flat_map(|&k| (0..cfg.trials).map(move |t| (k, t)))
        .collect();
    let pool = thread_pool(jobs)?;
    let per_unit: Vec<Result<Vec<ExperimentRow>, CliError>> =
        pool.install(|| units.par_iter().map(|&(k, t)| run_trial(ds, cfg, k, t)).collect());
    let mut rows = Vec::new();
    for r in per_unit {
        rows.extend(r?);
    }
    let summary = summarize(&rows, &ds.provenance().digest);
    Ok(ExperimentOutput { rows, summary })
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let dir = cfg.resolve_data_dir();
    load_mnist_dir(&dir).map_err(|e| match e {
        DataError::MissingFiles { .. } => DataError::MissingFiles {
            dir: dir.clone(),
            expected: MNIST_FILES
                .iter()
                .flat_map(|(i, l)| [dir.join(i), dir.join(l)])
                .map(|p| p.display().to_string())
                .chain([format!("(directory taken from config data_dir, then {DATA_DIR_ENV}, then ./data/mnist)")])
                .collect(),
        }
        .into(),
        other => other.into(),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Output {
        path: PathBuf::from("<csv buffer>"),
        source: e.into_error(),
    })
}

/// Writes `experiment.csv` and `experiment_summary.json` under `out`.
pub fn write_experiment(out: &Path, result: &ExperimentOutput) -> Result<(), CliError> {
    write_file(&out.join("experiment.csv"), &to_csv(&result.rows)?)?;
    let json = serde_json::to_string_pretty(&result.summary)?;
    write_file(&out.join("experiment_summary.json"), json.as_bytes())
}

/// Runs the configured stats experiment; writes `stats_<kind>.csv` (when the
/// experiment has per-replication rows) and `stats_<kind>.json`.
pub fn run_stats(cfg: &RunConfig, kind: StatsKind, jobs: Option<usize>) -> Result<serde_json::Value, CliError> {
    cfg.validate()?;
    let s = &cfg.stats;
    let mut prob = s.problem.build();
    prob.inner_mode = cfg.inner_mode;
    let pool = thread_pool(jobs)?;
    let name = serde_json::to_value(kind)?.as_str().unwrap_or("stats").to_string();
    let eps = match s.epsilon {
        Some(e) => e,
        None => pilot_epsilon(&prob, s.n, s.pilot_reps, cfg.seed ^ 0x9110)?,
    };
    let (summary, csv) = pool.install(|| -> Result<_, CliError> {
        Ok(match kind {
            StatsKind::Bias => {
                let b = bias_experiment(&prob, s.n, s.beta, eps, s.reps, cfg.seed)?;
                let recs = bias_records(&name, &prob, &b, cfg.seed);
                let json = serde_json::json!({
                    "experiment": name, "n": b.n, "beta": b.beta, "epsilon": b.epsilon,
                    "reps": s.reps, "mean_bias": b.mean_bias, "std_err": b.std_err,
                    "ci95": [b.mean_bias - 1.96 * b.std_err, b.mean_bias + 1.96 * b.std_err],
                    "failures": b.failures, "true_optimum": prob.true_optimum,
                });
                (json, Some(recs))
            }
            StatsKind::UnbiasedBeta => {
                let u = find_unbiased_beta(&prob, s.n, eps, s.reps, s.tol_se_multiple, cfg.seed)?;
                (serde_json::json!({ "experiment": name, "n": s.n, "epsilon": eps, "result": u }), None)
            }
            StatsKind::Consistency => {
                let rows = consistency_experiment(
                    &prob,
                    &s.n_schedule,
                    BetaSchedule::Dirichlet { alpha: s.alpha },
                    eps,
                    s.reps,
                    cfg.seed,
                )?;
                (serde_json::json!({ "experiment": name, "alpha": s.alpha, "rows": rows }), None)
            }
            StatsKind::Clt => {
                let c = clt_experiment(&prob, s.n, BetaSchedule::Dirichlet { alpha: s.alpha }, eps, s.reps, cfg.seed)?;
                let json = serde_json::json!({
                    "experiment": name, "n": c.n, "beta": c.beta, "epsilon": c.epsilon,
                    "reps": s.reps, "ks_statistic": c.ks_statistic, "p_value": c.p_value, "v_v": prob.v_v,
                });
                (json, None)
            }
        })
    })?;
    if let Some(recs) = csv {
        let mut buf = Vec::new();
        write_records(&recs, &mut buf)?;
        write_file(&cfg.out.join(format!("stats_{name}.csv")), &buf)?;
    }
    write_file(
        &cfg.out.join(format!("stats_{name}.json")),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    Ok(summary)
}

/// Parses arguments, runs the subcommand, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_flags(cli);
    match &cli.command {
        Command::Verify { suite, cases, tol } => {
            let suite = Suite::parse(suite)?;
            let report = thread_pool(cli.jobs)?.install(|| run_suite(suite, cfg.seed, *cases, *tol));
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Experiment => {
            cfg.validate()?;
            let ds = load_dataset(&cfg)?;
            let result = run_experiment(&cfg, &ds, cli.jobs)?;
            write_experiment(&cfg.out, &result)?;
            println!("{}", serde_json::to_string_pretty(&result.summary.best_epsilon)?);
            Ok(EXIT_OK)
        }
        Command::Stats { kind } => {
            let summary = run_stats(&cfg, *kind, cli.jobs)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_grid_shape() {
        let g = epsilon_grid();
        assert_eq!(g.len(), 27);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[26] - 0.09).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn solve_order_descends() {
        let cfg = RunConfig::default();
        let order = solve_order(&cfg);
        assert_eq!(order.len(), 1 + 27 + 27);
        assert!(order.windows(2).all(|w| w[0].beta * w[0].epsilon >= w[1].beta * w[1].epsilon));
        assert_eq!(order.last().unwrap().method, Method::Saa);
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let partial: RunConfig = serde_json::from_str(r#"{"trials": 3, "betas": [0.5]}"#).unwrap();
        assert_eq!(partial.trials, 3);
        assert_eq!(partial.kappas, vec![0.25]);
        let bad = RunConfig {
            trials: 0,
            ..RunConfig::default()
        };
        assert!(matches!(bad.validate(), Err(CliError::Config(_))));
        assert!(serde_json::from_str::<RunConfig>(r#"{"trails": 3}"#).is_err());
    }
}
