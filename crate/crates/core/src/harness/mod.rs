//! Dataset generation, runtime-matrix collection, CSV and bundle
//! persistence, and cross-validated evaluation.

mod evaluate;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{preprocess, read_dimacs_file, Formula, Lit, ParseError};
use crate::features::{csv_columns, FeatureError, FeatureVector, NUM_FEATURES};
use crate::picker::{measure, BundleError, SatClass, TrainError, TrainedBundle, SCHEMA_VERSION};
use crate::restart::Portfolio;
use crate::solver::{check_full_model, solve, SolveStatus, SolverConfig};

pub use evaluate::{
    evaluate, render_matrix_summary, render_report, summarize_matrix, train_folds, write_report,
    EvalOptions, EvaluationReport, ExecOptions, InstanceEval, MatrixSummary, RatioRow, TableRow,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bundle file is corrupted: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Dimacs { path: PathBuf, source: ParseError },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("strategies disagree on instance {instance}: {detail}")]
    Disagreement { instance: String, detail: String },
    #[error("model returned for {instance} under {strategy} falsifies the formula")]
    BadModel { instance: String, strategy: String },
    #[error("instance coverage mismatch: {0}")]
    Coverage(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("malformed row in {file}: {detail}")]
    Malformed { file: String, detail: String },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOptions {
    pub count: usize,
    pub vars_min: u32,
    pub vars_max: u32,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub seed: u64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            count: 200,
            vars_min: 100,
            vars_max: 200,
            ratio_min: 4.1,
            ratio_max: 5.0,
            seed: 1,
        }
    }
}

impl GenOptions {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidArgument(m));
        if self.vars_min < 3 {
            return bad(format!(
                "vars_min must be at least 3, got {}",
                self.vars_min
            ));
        }
        if self.vars_max < self.vars_min {
            return bad(format!(
                "vars_max {} is below vars_min {}",
                self.vars_max, self.vars_min
            ));
        }
        if !(self.ratio_min > 0.0)
            || !(self.ratio_max >= self.ratio_min)
            || !self.ratio_max.is_finite()
        {
            return bad(format!(
                "invalid ratio range [{}, {}]",
                self.ratio_min, self.ratio_max
            ));
        }
        Ok(())
    }
}

/// Clause count for `n` variables at clause/variable ratio `ratio`.
pub fn clause_count(n: u32, ratio: f64) -> usize {
    (ratio * n as f64).round() as usize
}

/// Uniform random 3-SAT: every clause has three distinct variables with
/// independent random signs.
pub fn random_3sat<R: Rng>(rng: &mut R, n: u32, m: usize) -> Formula {
    let clauses = (0..m)
        .map(|_| {
            sample(rng, n as usize, 3)
                .into_iter()
                .map(|v| Lit::new(v as u32 + 1, rng.gen_bool(0.5)))
                .collect()
        })
        .collect();
    Formula::new(n, clauses)
}

/// Generated instance formulas, named `rand-0000` onwards.
pub fn gen_rand_formulas(opts: &GenOptions) -> Result<Vec<Formula>, HarnessError> {
    opts.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    Ok((0..opts.count)
        .map(|i| {
            let n = rng.gen_range(opts.vars_min..=opts.vars_max);
            let ratio = if opts.ratio_max > opts.ratio_min {
                rng.gen_range(opts.ratio_min..=opts.ratio_max)
            } else {
                opts.ratio_min
            };
            let mut f = random_3sat(&mut rng, n, clause_count(n, ratio));
            f.source_name = format!("rand-{i:04}");
            f
        })
        .collect())
}

/// Writes the generated set as `<dir>/rand-NNNN.cnf`.
pub fn gen_rand(dir: &Path, opts: &GenOptions) -> Result<Vec<PathBuf>, HarnessError> {
    let formulas = gen_rand_formulas(opts)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    formulas
        .iter()
        .map(|f| {
            let path = dir.join(format!("{}.cnf", f.source_name));
            fs::write(&path, f.to_dimacs()).map_err(io_err(&path))?;
            Ok(path)
        })
        .collect()
}

/// Sorted `.cnf` files in a directory.
pub fn list_instances(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "cnf") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_instance(path: &Path) -> Result<Formula, HarnessError> {
    read_dimacs_file(path).map_err(|source| HarnessError::Dimacs {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunLabel {
    Sat,
    Unsat,
    Timeout,
}

impl RunLabel {
    pub fn solved(self) -> bool {
        self != RunLabel::Timeout
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub strategy: String,
    pub status: RunLabel,
    /// The cutoff for timeouts.
    pub cpu_seconds: f64,
    pub conflicts: u64,
    pub seed: u64,
}

/// Outcome of the warm-up measurement run of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRecord {
    pub instance: String,
    /// `observed` when the window closed, otherwise the run's result.
    pub status: String,
    pub cpu_seconds: f64,
    pub conflicts: u64,
    /// Decided before the window closed.
    pub too_easy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SatLabel {
    Sat,
    Unsat,
    Unknown,
}

impl SatLabel {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            SatLabel::Sat => Some(true),
            SatLabel::Unsat => Some(false),
            SatLabel::Unknown => None,
        }
    }

    pub fn class(self) -> Option<SatClass> {
        self.as_bool()
            .map(|b| if b { SatClass::Sat } else { SatClass::Unsat })
    }

    fn parse(s: &str) -> Option<SatLabel> {
        match s {
            "sat" => Some(SatLabel::Sat),
            "unsat" => Some(SatLabel::Unsat),
            "unknown" => Some(SatLabel::Unknown),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SatLabel::Sat => "sat",
            SatLabel::Unsat => "unsat",
            SatLabel::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub instance: String,
    pub features: FeatureVector,
    pub sat_label: SatLabel,
}

#[derive(Debug, Clone)]
pub struct MatrixOptions {
    pub portfolio: Portfolio,
    pub cutoff_seconds: f64,
    pub workers: usize,
    pub seed: u64,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions {
            portfolio: Portfolio::default(),
            cutoff_seconds: 60.0,
            workers: 1,
            seed: 0,
        }
    }
}

impl MatrixOptions {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            cutoff_seconds: self.cutoff_seconds,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatrixRun {
    /// Instance-major, strategies in portfolio order.
    pub records: Vec<RunRecord>,
    pub measures: Vec<MeasureRecord>,
    /// Only instances whose observation window closed.
    pub features: Vec<FeatureRow>,
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Maps a finished run to its record; a run that finished past the cutoff
/// counts as a timeout.
fn run_label(status: &SolveStatus, cpu: f64, cutoff: f64) -> (RunLabel, f64) {
    match status {
        SolveStatus::Timeout => (RunLabel::Timeout, cutoff),
        _ if cpu > cutoff => (RunLabel::Timeout, cutoff),
        SolveStatus::Sat(_) => (RunLabel::Sat, cpu),
        SolveStatus::Unsat => (RunLabel::Unsat, cpu),
    }
}

enum JobResult {
    Run(RunRecord),
    Measure(MeasureRecord, Option<FeatureVector>),
}

/// Runs every strategy from scratch on every instance, plus one warm-up
/// measurement run per instance that yields its features.
pub fn run_matrix_formulas(
    formulas: &[Formula],
    opts: &MatrixOptions,
) -> Result<MatrixRun, HarnessError> {
    if !(opts.cutoff_seconds > 0.0) {
        return Err(HarnessError::InvalidArgument(
            "cutoff must be positive".into(),
        ));
    }
    let k = opts.portfolio.len();
    let jobs: Vec<(usize, Option<usize>)> = (0..formulas.len())
        .flat_map(|i| (0..=k).map(move |s| (i, (s < k).then_some(s))))
        .collect();
    let config = opts.solver_config();
    let pool = thread_pool(opts.workers)?;
    let results: Vec<Result<JobResult, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, s)| {
                let f = &formulas[i];
                match s {
                    Some(s) => {
                        let strategy = &opts.portfolio.strategies[s];
                        let out = solve(&preprocess(f), strategy.schedule(), config.clone());
                        if let SolveStatus::Sat(model) = &out.status {
                            if check_full_model(f, model) != Ok(true) {
                                return Err(HarnessError::BadModel {
                                    instance: f.source_name.clone(),
                                    strategy: strategy.name.clone(),
                                });
                            }
                        }
                        let (status, cpu_seconds) =
                            run_label(&out.status, out.cpu_seconds, opts.cutoff_seconds);
                        log::debug!(
                            "{} {} {:?} {:.3}s",
                            f.source_name,
                            strategy.name,
                            status,
                            cpu_seconds
                        );
                        Ok(JobResult::Run(RunRecord {
                            instance: f.source_name.clone(),
                            strategy: strategy.name.clone(),
                            status,
                            cpu_seconds,
                            conflicts: out.conflicts,
                            seed: opts.seed,
                        }))
                    }
                    None => {
                        let m = measure(f, &config)?;
                        let status = match &m.solved {
                            None => "observed".to_string(),
                            Some(s) => s.label().to_string(),
                        };
                        let too_easy =
                            matches!(m.solved, Some(SolveStatus::Sat(_) | SolveStatus::Unsat));
                        Ok(JobResult::Measure(
                            MeasureRecord {
                                instance: f.source_name.clone(),
                                status,
                                cpu_seconds: m.cpu_seconds,
                                conflicts: m.conflicts,
                                too_easy,
                            },
                            m.features,
                        ))
                    }
                }
            })
            .collect()
    });

    let mut run = MatrixRun::default();
    let mut feats: Vec<(String, FeatureVector)> = Vec::new();
    let mut measured_labels: BTreeMap<String, RunLabel> = BTreeMap::new();
    for r in results {
        match r? {
            JobResult::Run(rec) => run.records.push(rec),
            JobResult::Measure(m, x) => {
                match m.status.as_str() {
                    "sat" => {
                        measured_labels.insert(m.instance.clone(), RunLabel::Sat);
                    }
                    "unsat" => {
                        measured_labels.insert(m.instance.clone(), RunLabel::Unsat);
                    }
                    _ => {}
                }
                if let Some(x) = x {
                    feats.push((m.instance.clone(), x));
                }
                run.measures.push(m);
            }
        }
    }
    let labels = consensus_labels(&run.records, &measured_labels)?;
    run.features = feats
        .into_iter()
        .map(|(instance, features)| {
            let sat_label = labels.get(&instance).copied().unwrap_or(SatLabel::Unknown);
            FeatureRow {
                instance,
                features,
                sat_label,
            }
        })
        .collect();
    Ok(run)
}

/// Sat/unsat ground truth from every solved run; conflicting answers abort.
pub fn consensus_labels(
    records: &[RunRecord],
    extra: &BTreeMap<String, RunLabel>,
) -> Result<BTreeMap<String, SatLabel>, HarnessError> {
    let mut labels: BTreeMap<String, (SatLabel, String)> = BTreeMap::new();
    let solved = records
        .iter()
        .map(|r| (r.instance.as_str(), r.status, r.strategy.as_str()))
        .chain(extra.iter().map(|(i, s)| (i.as_str(), *s, "measurement")));
    for (instance, status, source) in solved {
        let label = match status {
            RunLabel::Sat => SatLabel::Sat,
            RunLabel::Unsat => SatLabel::Unsat,
            RunLabel::Timeout => {
                labels
                    .entry(instance.to_string())
                    .or_insert((SatLabel::Unknown, String::new()));
                continue;
            }
        };
        let entry = labels
            .entry(instance.to_string())
            .or_insert((SatLabel::Unknown, String::new()));
        match entry.0 {
            SatLabel::Unknown => *entry = (label, source.to_string()),
            prev if prev != label => {
                return Err(HarnessError::Disagreement {
                    instance: instance.to_string(),
                    detail: format!(
                        "{} says {}, {} says {}",
                        entry.1,
                        prev.as_str(),
                        source,
                        label.as_str()
                    ),
                })
            }
            _ => {}
        }
    }
    Ok(labels.into_iter().map(|(k, (l, _))| (k, l)).collect())
}

pub fn run_matrix(instances: &[PathBuf], opts: &MatrixOptions) -> Result<MatrixRun, HarnessError> {
    let formulas = instances
        .iter()
        .map(|p| load_instance(p))
        .collect::<Result<Vec<_>, _>>()?;
    run_matrix_formulas(&formulas, opts)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, HarnessError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_matrix_csv(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<RunRecord>, _>>()?)
}

pub fn write_measure_csv(path: &Path, records: &[MeasureRecord]) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_measure_csv(path: &Path) -> Result<Vec<MeasureRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<MeasureRecord>, _>>()?)
}

/// `instance,f1..f60,sat_label`.
pub fn write_features_csv(path: &Path, rows: &[FeatureRow]) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["instance".to_string()];
    header.extend(csv_columns());
    header.push("sat_label".into());
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.instance.clone()];
        rec.extend(row.features.values().iter().map(|v| v.to_string()));
        rec.push(row.sat_label.as_str().into());
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let malformed = |detail: String| HarnessError::Malformed {
        file: path.display().to_string(),
        detail,
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != NUM_FEATURES + 2 {
            return Err(malformed(format!(
                "expected {} columns, found {}",
                NUM_FEATURES + 2,
                rec.len()
            )));
        }
        let values = (1..=NUM_FEATURES)
            .map(|i| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("column f{i}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sat_label = SatLabel::parse(&rec[NUM_FEATURES + 1])
            .ok_or_else(|| malformed(format!("bad sat_label `{}`", &rec[NUM_FEATURES + 1])))?;
        out.push(FeatureRow {
            instance: rec[0].to_string(),
            features: FeatureVector::from_vec(values)?,
            sat_label,
        });
    }
    Ok(out)
}

/// Writes `matrix.csv`, `measure.csv` and `features.csv` into `dir`.
pub fn write_matrix_run(dir: &Path, run: &MatrixRun) -> Result<(), HarnessError> {
    write_matrix_csv(&dir.join("matrix.csv"), &run.records)?;
    write_measure_csv(&dir.join("measure.csv"), &run.measures)?;
    write_features_csv(&dir.join("features.csv"), &run.features)
}

pub fn read_matrix_run(dir: &Path) -> Result<MatrixRun, HarnessError> {
    Ok(MatrixRun {
        records: read_matrix_csv(&dir.join("matrix.csv"))?,
        measures: read_measure_csv(&dir.join("measure.csv"))?,
        features: read_features_csv(&dir.join("features.csv"))?,
    })
}

/// Runtime rows per instance in portfolio order.
pub fn runtime_table(
    records: &[RunRecord],
    portfolio: &Portfolio,
) -> Result<BTreeMap<String, Vec<(RunLabel, f64)>>, HarnessError> {
    let mut table: BTreeMap<String, Vec<Option<(RunLabel, f64)>>> = BTreeMap::new();
    for r in records {
        let s = portfolio.index_of(&r.strategy).ok_or_else(|| {
            HarnessError::Coverage(format!("strategy `{}` is not in the portfolio", r.strategy))
        })?;
        let row = table
            .entry(r.instance.clone())
            .or_insert_with(|| vec![None; portfolio.len()]);
        if row[s].replace((r.status, r.cpu_seconds)).is_some() {
            return Err(HarnessError::Coverage(format!(
                "duplicate row for {} / {}",
                r.instance, r.strategy
            )));
        }
    }
    table
        .into_iter()
        .map(|(inst, row)| {
            let full = row.iter().copied().collect::<Option<Vec<_>>>();
            full.map(|r| (inst.clone(), r)).ok_or_else(|| {
                HarnessError::Coverage(format!("instance {inst} lacks some strategy rows"))
            })
        })
        .collect()
}

pub fn save_bundle(b: &TrainedBundle<f64>, path: &Path) -> Result<(), HarnessError> {
    b.validate()?;
    let text = serde_json::to_string_pretty(b)?;
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_bundle(path: &Path) -> Result<TrainedBundle<f64>, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_bundle(&text)
}

pub fn parse_bundle(text: &str) -> Result<TrainedBundle<f64>, HarnessError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    // check the version before the layout so old files get a clear error
    let version = value.get("schema_version").and_then(|v| v.as_u64());
    match version {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(BundleError::Version {
                found: v as u32,
                expected: SCHEMA_VERSION,
            }
            .into())
        }
        None => {
            return Err(HarnessError::Malformed {
                file: "bundle".into(),
                detail: "missing schema_version".into(),
            })
        }
    }
    let b: TrainedBundle<f64> = serde_json::from_value(value)?;
    b.validate()?;
    Ok(b)
}
