//! Experiment harness: prepares data and a classifier from a run config,
//! explains rejected test instances with each formulation and reference-set
//! size, and writes per-run records, summaries and plot data.

mod oracle;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use milp::SolverParams;
use serde::{Deserialize, Serialize};

use crate::actionspace::{build_action_space, precompute_constants, ActionConfig, ActionSpace, MilpConstants};
use crate::classifiers::{train, Classifier, TrainConfig};
use crate::data::{encode, load_csv, split, synthetic, DatasetSchema, EncodedDataset};
use crate::error::{Error, Result};
use crate::formulations::{explain, Formulation, Outcome, Problem};
use crate::stats::{build_mahalanobis, DeltaMetric, LofContext, MahalanobisContext};

pub use oracle::{brute_force_oracle, OracleResult, ENUMERATION_CAP};
pub use report::{
    mean_std, median, render_svg, summarize, write_plot_csv, write_results, write_summary, write_svg, BenchRecord,
    SummaryRow, RESULTS_HEADER, SUMMARY_HEADER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv { path: PathBuf, schema: PathBuf },
    /// Seeded German-Credit-like table.
    Synthetic { rows: usize },
}

fn default_lambda() -> f64 {
    0.01
}
fn default_ns() -> Vec<usize> {
    vec![20, 50, 100, 200]
}
fn default_explain() -> usize {
    10
}
fn default_forms() -> Vec<Formulation> {
    vec![Formulation::Original, Formulation::Reduced]
}
fn default_out() -> PathBuf {
    PathBuf::from("bench_out")
}
fn default_ratio() -> f64 {
    0.75
}
fn default_true() -> bool {
    true
}
fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub classifier: TrainConfig,
    /// Pre-trained model to use instead of training one.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_ns")]
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub actions: ActionConfig,
    /// Number of rejected test instances to explain.
    #[serde(default = "default_explain")]
    pub n_explain: usize,
    #[serde(default)]
    pub seed: u64,
    /// Solver time limit in seconds, keyed by N.
    #[serde(default)]
    pub time_limits: BTreeMap<usize, f64>,
    #[serde(default = "default_forms")]
    pub formulations: Vec<Formulation>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_ratio")]
    pub train_ratio: f64,
    /// When false, `time_s` is written as 0 so repeated runs are byte-identical.
    #[serde(default = "default_true")]
    pub record_timing: bool,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub margin: f64,
    /// Covariance ridge; defaults to `1e-6 · trace / D`.
    #[serde(default)]
    pub ridge: Option<f64>,
}

impl RunConfig {
    pub fn new(dataset: DatasetSource) -> Self {
        Self {
            dataset,
            classifier: TrainConfig::default(),
            model: None,
            lambda: default_lambda(),
            n_values: default_ns(),
            actions: ActionConfig::default(),
            n_explain: default_explain(),
            seed: 0,
            time_limits: BTreeMap::new(),
            formulations: default_forms(),
            out_dir: default_out(),
            train_ratio: default_ratio(),
            record_timing: true,
            threads: 1,
            margin: 0.0,
            ridge: None,
        }
    }

    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetSource::Csv { path, schema } = &mut cfg.dataset {
            fix(path);
            fix(schema);
        }
        if let Some(m) = &mut cfg.model {
            fix(m);
        }
        fix(&mut cfg.out_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 2) {
            return Err(Error::Config("n_values must be non-empty and each N at least 2".into()));
        }
        if self.n_explain == 0 {
            return Err(Error::Config("n_explain must be at least 1".into()));
        }
        if self.time_limits.values().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("time limits must be positive".into()));
        }
        if self.formulations.is_empty() {
            return Err(Error::Config("at least one formulation is required".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config("lambda must be finite and non-negative".into()));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config("train_ratio must lie in (0, 1)".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Configured limit for `n`, else 1200 s up to N = 50 and 3600 s beyond.
    pub fn time_limit(&self, n: usize) -> f64 {
        self.time_limits.get(&n).copied().unwrap_or(if n <= 50 { 1200.0 } else { 3600.0 })
    }

    /// Seed of the reference-set sample for size `n`.
    pub fn reference_seed(&self, n: usize) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(n as u64)
    }
}

pub fn load_dataset(source: &DatasetSource, seed: u64) -> Result<EncodedDataset> {
    match source {
        DatasetSource::Csv { path, schema } => {
            let schema = DatasetSchema::from_json_file(schema)?;
            let (raw, report) = load_csv(path, &schema)?;
            log::info!("loaded {} rows ({} dropped for missing values)", report.kept, report.dropped);
            Ok(encode(&raw))
        }
        DatasetSource::Synthetic { rows } => Ok(encode(&synthetic::german_like(*rows, seed))),
    }
}

/// Data, classifier and distance contexts shared by every explanation of a run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    pub classifier: Classifier,
    pub mahalanobis: MahalanobisContext,
    pub metric: DeltaMetric,
}

impl Pipeline {
    pub fn prepare(cfg: &RunConfig) -> Result<Self> {
        let data = load_dataset(&cfg.dataset, cfg.seed)?;
        let (train_set, test) = split(&data, cfg.train_ratio, cfg.seed)?;
        let classifier = match &cfg.model {
            Some(p) => Classifier::load(p)?,
            None => train(&train_set, &TrainConfig { seed: cfg.seed, ..cfg.classifier })?,
        };
        if classifier.width() != train_set.width() {
            return Err(Error::WidthMismatch { expected: train_set.width(), got: classifier.width() });
        }
        Self::from_parts(train_set, test, classifier, cfg.ridge)
    }

    pub fn from_parts(
        train: EncodedDataset,
        test: EncodedDataset,
        classifier: Classifier,
        ridge: Option<f64>,
    ) -> Result<Self> {
        let mahalanobis = build_mahalanobis(&train.rows, ridge)?;
        let metric = DeltaMetric::fit(&train.rows)?;
        Ok(Self { train, test, classifier, mahalanobis, metric })
    }

    /// Test-row indices the classifier rejects, in test order, at most `limit`.
    pub fn rejected(&self, limit: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (i, x) in self.test.rows.iter().enumerate() {
            if out.len() == limit {
                break;
            }
            if self.classifier.predict(x)? == -1 {
                out.push(i);
            }
        }
        Ok(out)
    }

    pub fn reference_set(&self, n: usize, seed: u64) -> Result<LofContext> {
        LofContext::sample(&self.train.rows, &self.train.labels, n, self.metric.clone(), seed)
    }

    pub fn instance(&self, x_bar: &[f64], lof: &LofContext, actions: &ActionConfig) -> Result<(ActionSpace, MilpConstants)> {
        let space = build_action_space(x_bar, &self.train, actions)?;
        let constants = precompute_constants(&space, lof)?;
        Ok((space, constants))
    }

    pub fn problem<'a>(
        &'a self,
        lof: &'a LofContext,
        space: &'a ActionSpace,
        constants: &'a MilpConstants,
        lambda: f64,
        margin: f64,
    ) -> Problem<'a> {
        Problem { classifier: &self.classifier, mahalanobis: &self.mahalanobis, lof, space, constants, lambda, margin }
    }
}

/// Evaluation neighbourhood size: 10, or fewer when the reference set is small.
pub fn eval_k(n: usize) -> usize {
    10.min(n - 1)
}

fn solve_record(
    pipe: &Pipeline,
    cfg: &RunConfig,
    lof: &LofContext,
    instance: usize,
    n: usize,
    form: Formulation,
) -> BenchRecord {
    let mut rec = BenchRecord {
        instance,
        formulation: form,
        n,
        status: String::new(),
        objective: None,
        md: None,
        lof10: None,
        nearest_rows: 0,
        total_rows: 0,
        nodes: 0,
        time_s: 0.0,
    };
    let x_bar = &pipe.test.rows[instance];
    let result = pipe.instance(x_bar, lof, &cfg.actions).and_then(|(space, constants)| {
        let problem = pipe.problem(lof, &space, &constants, cfg.lambda, cfg.margin);
        let params = SolverParams::default().with_time_limit(cfg.time_limit(n));
        explain(&problem, form, &params)
    });
    match result {
        Ok(Outcome::Found(e)) => {
            rec.status = e.status.clone();
            rec.objective = Some(e.objective);
            rec.md = Some(pipe.mahalanobis.distance(x_bar, &e.counterfactual));
            rec.lof10 = lof.lof(&e.counterfactual, eval_k(n)).ok();
            rec.nearest_rows = e.constraint_counts.nearest;
            rec.total_rows = e.total_rows;
            rec.nodes = e.nodes;
            rec.time_s = e.time_s;
        }
        Ok(Outcome::NoRecourse { status, nodes, time_s, counts }) => {
            rec.status = status.as_str().to_string();
            rec.nearest_rows = counts.nearest;
            rec.total_rows = counts.total();
            rec.nodes = nodes;
            rec.time_s = time_s;
        }
        Err(e) => {
            log::warn!("instance {instance}, N = {n}, {form}: {e}");
            rec.status = "error".into();
        }
    }
    if !cfg.record_timing {
        rec.time_s = 0.0;
    }
    rec
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub records: Vec<BenchRecord>,
    pub summary: Vec<SummaryRow>,
    pub explained: usize,
}

/// Runs every (N, instance, formulation) combination without writing files.
pub fn run_pipeline(pipe: &Pipeline, cfg: &RunConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let instances = pipe.rejected(cfg.n_explain)?;
    let mut records = Vec::new();
    for &n in &cfg.n_values {
        let lof = pipe.reference_set(n, cfg.reference_seed(n))?;
        let jobs: Vec<(usize, Formulation)> =
            instances.iter().flat_map(|&i| cfg.formulations.iter().map(move |&f| (i, f))).collect();
        let mut out: Vec<Option<BenchRecord>> = vec![None; jobs.len()];
        let chunk = jobs.len().div_ceil(cfg.threads).max(1);
        std::thread::scope(|s| {
            for (slots, part) in out.chunks_mut(chunk).zip(jobs.chunks(chunk)) {
                let lof = &lof;
                s.spawn(move || {
                    for (slot, &(i, f)) in slots.iter_mut().zip(part) {
                        let rec = solve_record(pipe, cfg, lof, i, n, f);
                        log::info!("N = {n} instance {i} {f}: {} in {:.3}s", rec.status, rec.time_s);
                        *slot = Some(rec);
                    }
                });
            }
        });
        records.extend(out.into_iter().map(|r| r.expect("every job ran")));
    }
    let summary = summarize(&records, instances.len(), &cfg.n_values, &cfg.formulations);
    Ok(BenchOutput { records, summary, explained: instances.len() })
}

/// Full benchmark: prepares the pipeline, runs it and writes `results.csv`,
/// `summary.csv`, `plot.csv` and `plot.svg` into the output directory.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let pipe = Pipeline::prepare(cfg)?;
    let out = run_pipeline(&pipe, cfg)?;
    write_outputs(&cfg.out_dir, &out)?;
    Ok(out)
}

pub fn write_outputs(dir: &Path, out: &BenchOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_results(&dir.join("results.csv"), &out.records)?;
    write_summary(&dir.join("summary.csv"), &out.summary)?;
    write_plot_csv(&dir.join("plot.csv"), &out.records)?;
    write_svg(&dir.join("plot.svg"), &out.summary)
}
