//! Training of the satisfiability classifier and the per-strategy runtime
//! models, strategy selection, and the online solve that observes a fixed
//! warm-up window before committing to one restart strategy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{preprocess, Formula, PreprocessStatus};
use crate::features::{
    assemble, original_features, post_window_features, structural_features, window_features,
    FeatureError, FeatureVector,
};
use crate::ml::{
    fit_logistic_with, fit_ridge_with, select_features_with, DesignMatrix, FitError, LogisticModel,
    LogisticOptions, ModelKind, RidgeModel, RidgeOptions, SelectionOptions,
};
use crate::restart::{Portfolio, Schedule};
use crate::scalar::Scalar;
use crate::solver::{RunStatus, SolveOutcome, SolveStatus, Solver, SolverConfig, WindowSpec};

/// Bumped whenever the bundle layout or the feature definitions change.
pub const SCHEMA_VERSION: u32 = 1;
/// Length of the short first restart.
pub const WARMUP_FIRST: u64 = 100;
/// Length of the second restart, which is the observation window.
pub const WARMUP_WINDOW: u64 = 2000;
/// Conflict count at which features are gathered and the switch happens.
pub const SELECTION_CONFLICT: u64 = WARMUP_FIRST + WARMUP_WINDOW;
/// Below this many instances per class a warning is logged.
pub const MIN_CLASS_SIZE: usize = 10;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no {0} instances in the training data")]
    EmptyClass(SatClass),
    #[error("instance {index} has {got} runtimes, portfolio has {expected} strategies")]
    RuntimeCount {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("instance {0} has non-finite features")]
    NonFinite(usize),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("expected {expected} runtime models, found {found}")]
    ModelCount { expected: usize, found: usize },
    #[error("no runtime model for strategy `{strategy}` ({class})")]
    MissingModel { strategy: String, class: SatClass },
    #[error("bundle schema version {found} is incompatible with this build (version {expected})")]
    Version { found: u32, expected: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SatClass {
    Sat,
    Unsat,
}

impl std::fmt::Display for SatClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SatClass::Sat => "sat",
            SatClass::Unsat => "unsat",
        })
    }
}

/// What the runtime models regress on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuntimeTarget {
    /// Raw CPU seconds.
    #[default]
    Seconds,
    /// log10(1 + seconds); predictions are mapped back to seconds.
    Log10,
}

impl RuntimeTarget {
    pub fn encode(self, seconds: f64) -> f64 {
        match self {
            RuntimeTarget::Seconds => seconds,
            RuntimeTarget::Log10 => seconds.ln_1p() / std::f64::consts::LN_10,
        }
    }

    pub fn decode(self, y: f64) -> f64 {
        match self {
            RuntimeTarget::Seconds => y,
            RuntimeTarget::Log10 => 10f64.powf(y.max(0.0)) - 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance {
    pub name: String,
    pub features: FeatureVector,
    pub sat_label: bool,
    /// CPU seconds per portfolio strategy, in portfolio order; timeouts
    /// carry the cutoff.
    pub runtimes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RuntimeModelEntry<F> {
    pub strategy: String,
    pub class: SatClass,
    pub model: RidgeModel<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TrainedBundle<F> {
    pub schema_version: u32,
    pub portfolio: Portfolio,
    pub target: RuntimeTarget,
    pub classifier: LogisticModel<F>,
    /// One model per (strategy, class), strategies in portfolio order with
    /// the sat model first.
    pub models: Vec<RuntimeModelEntry<F>>,
}

impl<F: Scalar> TrainedBundle<F> {
    /// Checks the schema version and that every (strategy, class) pair has
    /// exactly one model.
    pub fn validate(&self) -> Result<(), BundleError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(BundleError::Version {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let expected = 2 * self.portfolio.len();
        if self.models.len() != expected {
            return Err(BundleError::ModelCount {
                expected,
                found: self.models.len(),
            });
        }
        for s in &self.portfolio.strategies {
            for class in [SatClass::Sat, SatClass::Unsat] {
                let n = self
                    .models
                    .iter()
                    .filter(|m| m.strategy == s.name && m.class == class)
                    .count();
                if n != 1 {
                    return Err(BundleError::MissingModel {
                        strategy: s.name.clone(),
                        class,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn model(&self, strategy: &str, class: SatClass) -> Option<&RidgeModel<F>> {
        self.models
            .iter()
            .find(|m| m.strategy == strategy && m.class == class)
            .map(|m| &m.model)
    }

    /// Predicted runtime in seconds, never negative.
    pub fn predict_runtime(&self, strategy: &str, class: SatClass, x: &[F]) -> Option<f64> {
        self.model(strategy, class)
            .map(|m| self.target.decode(m.predict(x).as_f64()).max(0.0))
    }

    pub fn p_sat(&self, x: &[F]) -> f64 {
        self.classifier.predict_proba(x).as_f64()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub target: RuntimeTarget,
    pub selection: SelectionOptions<f64>,
    /// Fit the models on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            target: RuntimeTarget::Seconds,
            selection: SelectionOptions::default(),
            parallel: true,
        }
    }
}

enum Job {
    Classifier,
    Runtime(usize, SatClass),
}

enum Fitted<F> {
    Classifier(LogisticModel<F>),
    Runtime(RuntimeModelEntry<F>),
}

fn convert<F: Scalar>(x: &[f64]) -> Vec<F> {
    x.iter().map(|&v| F::of(v)).collect()
}

fn selection_options<F: Scalar>(o: &SelectionOptions<f64>) -> SelectionOptions<F> {
    use crate::ml::LambdaChoice;
    let lambda = match &o.ridge.lambda {
        LambdaChoice::Fixed(l) => LambdaChoice::Fixed(F::of(*l)),
        LambdaChoice::Gcv(g) => LambdaChoice::Gcv(convert(g)),
    };
    SelectionOptions {
        ridge: RidgeOptions {
            lambda,
            standardize: o.ridge.standardize,
            intercept: o.ridge.intercept,
            clamp_nonnegative: o.ridge.clamp_nonnegative,
        },
        logistic: LogisticOptions {
            penalty: F::of(o.logistic.penalty),
            max_iter: o.logistic.max_iter,
            tol: F::of(o.logistic.tol),
            standardize: o.logistic.standardize,
        },
        correlation_threshold: F::of(o.correlation_threshold),
    }
}

fn fit_job<F: Scalar>(
    job: &Job,
    data: &[TrainingInstance],
    portfolio: &Portfolio,
    options: &TrainOptions,
) -> Result<Fitted<F>, TrainError> {
    let sel = selection_options::<F>(&options.selection);
    match *job {
        Job::Classifier => {
            let rows = data.iter().map(|t| convert(t.features.values())).collect();
            let y = data
                .iter()
                .map(|t| if t.sat_label { F::one() } else { F::zero() })
                .collect();
            let d = DesignMatrix::new(rows, y, vec![])?;
            let mask = select_features_with(&d, ModelKind::Logistic, &sel)?.mask;
            Ok(Fitted::Classifier(fit_logistic_with(
                &d,
                &mask,
                sel.logistic,
            )?))
        }
        Job::Runtime(s, class) => {
            let want = class == SatClass::Sat;
            let subset: Vec<&TrainingInstance> =
                data.iter().filter(|t| t.sat_label == want).collect();
            let rows = subset
                .iter()
                .map(|t| convert(t.features.values()))
                .collect();
            let y = subset
                .iter()
                .map(|t| F::of(options.target.encode(t.runtimes[s])))
                .collect();
            let d = DesignMatrix::new(rows, y, vec![])?;
            let selection = select_features_with(&d, ModelKind::Ridge, &sel)?;
            // refit on the selected features with a freshly chosen penalty
            let model = fit_ridge_with(&d, &selection.mask, &sel.ridge)?;
            Ok(Fitted::Runtime(RuntimeModelEntry {
                strategy: portfolio.strategies[s].name.clone(),
                class,
                model,
            }))
        }
    }
}

/// Fits the classifier on every instance and, per strategy, one runtime
/// model on the sat instances and one on the unsat instances.
pub fn train_with<F: Scalar>(
    data: &[TrainingInstance],
    portfolio: &Portfolio,
    options: &TrainOptions,
) -> Result<TrainedBundle<F>, TrainError> {
    for (i, t) in data.iter().enumerate() {
        if t.runtimes.len() != portfolio.len() {
            return Err(TrainError::RuntimeCount {
                index: i,
                got: t.runtimes.len(),
                expected: portfolio.len(),
            });
        }
        if !t.features.is_finite() || t.runtimes.iter().any(|r| !r.is_finite()) {
            return Err(TrainError::NonFinite(i));
        }
    }
    for class in [SatClass::Sat, SatClass::Unsat] {
        let n = data
            .iter()
            .filter(|t| t.sat_label == (class == SatClass::Sat))
            .count();
        if n == 0 {
            return Err(TrainError::EmptyClass(class));
        }
        if n < MIN_CLASS_SIZE {
            log::warn!("only {n} {class} training instances; runtime models will be weak");
        }
    }

    let mut jobs = vec![Job::Classifier];
    for s in 0..portfolio.len() {
        jobs.push(Job::Runtime(s, SatClass::Sat));
        jobs.push(Job::Runtime(s, SatClass::Unsat));
    }
    let fitted: Vec<Fitted<F>> = if options.parallel {
        jobs.par_iter()
            .map(|j| fit_job(j, data, portfolio, options))
            .collect::<Result<_, _>>()?
    } else {
        jobs.iter()
            .map(|j| fit_job(j, data, portfolio, options))
            .collect::<Result<_, _>>()?
    };

    let mut classifier = None;
    let mut models = Vec::with_capacity(2 * portfolio.len());
    for f in fitted {
        match f {
            Fitted::Classifier(c) => classifier = Some(c),
            Fitted::Runtime(m) => models.push(m),
        }
    }
    Ok(TrainedBundle {
        schema_version: SCHEMA_VERSION,
        portfolio: portfolio.clone(),
        target: options.target,
        classifier: classifier.expect("classifier job always runs"),
        models,
    })
}

pub fn train(
    data: &[TrainingInstance],
    portfolio: &Portfolio,
) -> Result<TrainedBundle<f64>, TrainError> {
    train_with(data, portfolio, &TrainOptions::default())
}

/// Ground truth that replaces learned predictions for ablation runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Classifier oracle: p_sat becomes 1 or 0.
    pub sat_label: Option<bool>,
    /// Model oracle: recorded runtimes in portfolio order replace both
    /// runtime models of every strategy.
    pub runtimes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub name: String,
    pub p_sat: f64,
    /// Expected cost per strategy, in portfolio order.
    pub costs: Vec<f64>,
}

/// Index of the smallest cost; the earliest wins ties.
pub fn argmin_cost(costs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate() {
        if c < costs[best] {
            best = i;
        }
    }
    best
}

/// p·M_sat + (1 - p)·M_unsat for each strategy.
pub fn mixture_costs(p_sat: f64, m_sat: &[f64], m_unsat: &[f64]) -> Vec<f64> {
    m_sat
        .iter()
        .zip(m_unsat)
        .map(|(&a, &b)| p_sat * a + (1.0 - p_sat) * b)
        .collect()
}

pub fn select_strategy_with<F: Scalar>(
    b: &TrainedBundle<F>,
    x: &FeatureVector,
    o: &Overrides,
) -> Selection {
    let xf: Vec<F> = convert(x.values());
    let p_sat = match o.sat_label {
        Some(true) => 1.0,
        Some(false) => 0.0,
        None => b.p_sat(&xf),
    };
    let names = b.portfolio.names();
    let (m_sat, m_unsat): (Vec<f64>, Vec<f64>) = match &o.runtimes {
        Some(rt) => (rt.clone(), rt.clone()),
        None => names
            .iter()
            .map(|s| {
                (
                    b.predict_runtime(s, SatClass::Sat, &xf)
                        .expect("validated bundle"),
                    b.predict_runtime(s, SatClass::Unsat, &xf)
                        .expect("validated bundle"),
                )
            })
            .unzip(),
    };
    let costs = mixture_costs(p_sat, &m_sat, &m_unsat);
    let index = argmin_cost(&costs);
    Selection {
        index,
        name: names[index].to_string(),
        p_sat,
        costs,
    }
}

pub fn select_strategy<F: Scalar>(b: &TrainedBundle<F>, x: &FeatureVector) -> Selection {
    select_strategy_with(b, x, &Overrides::default())
}

/// Restart lengths before the switch: 100, then the 2000-conflict window.
/// Runs that are never switched keep restarting every 2000 conflicts.
pub fn warmup_schedule() -> Schedule {
    Box::new(
        [WARMUP_FIRST]
            .into_iter()
            .chain(std::iter::repeat(WARMUP_WINDOW)),
    )
}

pub fn window_spec() -> WindowSpec {
    WindowSpec {
        first_conflict: WARMUP_FIRST + 1,
        last_conflict: SELECTION_CONFLICT,
    }
}

/// A solver that has run its warm-up.
pub enum WarmUp {
    /// Decided (or timed out) before the window closed.
    Finished(Solver),
    /// Paused at the selection conflict with its 60 features.
    Observed(Solver, FeatureVector),
}

/// Preprocesses, runs the 100 + 2000 conflict warm-up and gathers the
/// features. `None` when preprocessing alone refutes the formula.
pub fn warm_up(original: &Formula, config: &SolverConfig) -> Result<Option<WarmUp>, FeatureError> {
    let pre = preprocess(original);
    if pre.status == PreprocessStatus::ProvenUnsat {
        return Ok(None);
    }
    let config = SolverConfig {
        window: Some(window_spec()),
        ..config.clone()
    };
    let mut solver = Solver::from_preprocessed(&pre, warmup_schedule(), config);
    solver.set_pause_at(SELECTION_CONFLICT);
    match solver.run() {
        RunStatus::Paused => {
            let x = assemble(
                &original_features(original),
                &structural_features(&pre)?,
                &window_features(solver.window())?,
                &post_window_features(&solver),
            )?;
            Ok(Some(WarmUp::Observed(solver, x)))
        }
        _ => Ok(Some(WarmUp::Finished(solver))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportKind {
    Selected,
    SolvedInWindow,
    SolvedByPreprocessing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub kind: ReportKind,
    pub selection: Option<Selection>,
    pub features: Option<FeatureVector>,
    /// Conflict count when the switch happened.
    pub switch_conflict: Option<u64>,
    /// CPU seconds spent up to and including feature extraction.
    pub warmup_seconds: f64,
}

fn unsat_outcome() -> SolveOutcome {
    SolveOutcome {
        status: SolveStatus::Unsat,
        cpu_seconds: 0.0,
        conflicts: 0,
        restarts: 0,
        window: None,
        restart_log: Vec::new(),
    }
}

/// Solves with the learned selector: warm-up, one selection at conflict
/// 2100, then the chosen strategy's schedule from its first length on,
/// keeping everything learnt so far.
pub fn lmpick_solve_with<F: Scalar>(
    original: &Formula,
    b: &TrainedBundle<F>,
    config: &SolverConfig,
    overrides: &Overrides,
) -> Result<(SolveOutcome, SelectionReport), FeatureError> {
    match warm_up(original, config)? {
        None => Ok((
            unsat_outcome(),
            SelectionReport {
                kind: ReportKind::SolvedByPreprocessing,
                selection: None,
                features: None,
                switch_conflict: None,
                warmup_seconds: 0.0,
            },
        )),
        Some(WarmUp::Finished(solver)) => {
            let warmup_seconds = solver.cpu_seconds();
            Ok((
                solver.into_outcome(),
                SelectionReport {
                    kind: ReportKind::SolvedInWindow,
                    selection: None,
                    features: None,
                    switch_conflict: None,
                    warmup_seconds,
                },
            ))
        }
        Some(WarmUp::Observed(mut solver, x)) => {
            let selection = select_strategy_with(b, &x, overrides);
            let strategy = &b.portfolio.strategies[selection.index];
            log::debug!(
                "selected {} at conflict {} (p_sat {:.3})",
                strategy.name,
                solver.conflicts(),
                selection.p_sat
            );
            let switch_conflict = solver.conflicts();
            let warmup_seconds = solver.cpu_seconds();
            solver
                .switch_schedule(strategy.schedule())
                .expect("first switch of a paused solver");
            solver.run();
            Ok((
                solver.into_outcome(),
                SelectionReport {
                    kind: ReportKind::Selected,
                    selection: Some(selection),
                    features: Some(x),
                    switch_conflict: Some(switch_conflict),
                    warmup_seconds,
                },
            ))
        }
    }
}

pub fn lmpick_solve<F: Scalar>(
    original: &Formula,
    b: &TrainedBundle<F>,
    config: &SolverConfig,
) -> Result<(SolveOutcome, SelectionReport), FeatureError> {
    lmpick_solve_with(original, b, config, &Overrides::default())
}

/// Result of the feature-measurement run used to build training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// `Some` when the warm-up already decided the instance.
    pub solved: Option<SolveStatus>,
    pub features: Option<FeatureVector>,
    pub cpu_seconds: f64,
    pub conflicts: u64,
}

impl Measurement {
    /// Solved before the window closed; excluded from training.
    pub fn too_easy(&self) -> bool {
        self.features.is_none()
    }
}

/// Runs the same warm-up as [`lmpick_solve`] and stops at the selection
/// point.
pub fn measure(original: &Formula, config: &SolverConfig) -> Result<Measurement, FeatureError> {
    Ok(match warm_up(original, config)? {
        None => Measurement {
            solved: Some(SolveStatus::Unsat),
            features: None,
            cpu_seconds: 0.0,
            conflicts: 0,
        },
        Some(WarmUp::Finished(solver)) => {
            let out = solver.into_outcome();
            Measurement {
                solved: Some(out.status),
                features: None,
                cpu_seconds: out.cpu_seconds,
                conflicts: out.conflicts,
            }
        }
        Some(WarmUp::Observed(solver, x)) => Measurement {
            solved: None,
            features: Some(x),
            cpu_seconds: solver.cpu_seconds(),
            conflicts: solver.conflicts(),
        },
    })
}
