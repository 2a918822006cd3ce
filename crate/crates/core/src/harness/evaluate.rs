use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{
    consensus_labels, csv_writer, io_err, runtime_table, thread_pool, FeatureRow, HarnessError,
    MatrixRun, RunLabel, RunRecord, SatLabel,
};
use crate::cnf::Formula;
use crate::ml::{kfold, Fold};
use crate::picker::{
    argmin_cost, lmpick_solve, select_strategy, select_strategy_with, train_with, Overrides,
    ReportKind, Selection, TrainOptions, TrainedBundle, TrainingInstance,
};
use crate::restart::Portfolio;
use crate::solver::{SolveStatus, SolverConfig};

/// Actually run the learned selector on each test instance.
#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub formulas: Vec<Formula>,
    pub workers: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub portfolio: Portfolio,
    pub folds: usize,
    pub seed: u64,
    pub cutoff_seconds: f64,
    pub train: TrainOptions,
    pub executed: Option<ExecOptions>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            portfolio: Portfolio::default(),
            folds: 10,
            seed: 0,
            cutoff_seconds: 60.0,
            train: TrainOptions::default(),
            executed: None,
        }
    }
}

/// Solved counts and CPU totals split by ground-truth class. Counts are
/// reals so averaged rows fit the same shape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableRow {
    pub name: String,
    pub solved_sat: f64,
    pub solved_unsat: f64,
    pub solved: f64,
    pub time_sat: f64,
    pub time_unsat: f64,
    pub time: f64,
}

impl TableRow {
    fn named(name: impl Into<String>) -> TableRow {
        TableRow {
            name: name.into(),
            ..TableRow::default()
        }
    }

    fn add(&mut self, label: SatLabel, solved: bool, seconds: f64) {
        let s = if solved { 1.0 } else { 0.0 };
        match label {
            SatLabel::Sat => {
                self.solved_sat += s;
                self.time_sat += seconds;
            }
            SatLabel::Unsat => {
                self.solved_unsat += s;
                self.time_unsat += seconds;
            }
            SatLabel::Unknown => {}
        }
        self.solved += s;
        self.time += seconds;
    }

    fn mean_of(name: &str, rows: &[TableRow]) -> TableRow {
        let n = rows.len().max(1) as f64;
        let sum = |f: fn(&TableRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        TableRow {
            name: name.into(),
            solved_sat: sum(|r| r.solved_sat),
            solved_unsat: sum(|r| r.solved_unsat),
            solved: sum(|r| r.solved),
            time_sat: sum(|r| r.time_sat),
            time_unsat: sum(|r| r.time_unsat),
            time: sum(|r| r.time),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub name: String,
    pub count: usize,
    /// Percent correct (accuracy) or mean percent of strategies strictly
    /// faster than the chosen one (rank).
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEval {
    pub instance: String,
    pub fold: usize,
    pub label: SatLabel,
    pub runtimes: Vec<(RunLabel, f64)>,
    pub warmup_seconds: f64,
    pub selection: Selection,
    /// Strategies strictly faster than the chosen one.
    pub rank: usize,
    pub classifier_oracle_choice: usize,
    pub adversarial_choice: usize,
    pub oracle_choice: usize,
    /// Executed run: status, CPU seconds and chosen strategy.
    pub executed: Option<(RunLabel, f64, Option<usize>)>,
}

/// Per-strategy totals, the random-pick average and the virtual best
/// solver over one runtime matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSummary {
    pub cutoff_seconds: f64,
    pub strategies: Vec<TableRow>,
    pub random: TableRow,
    pub virtual_best: TableRow,
    /// `solved_by[k]`: instances solved by exactly `k` strategies.
    pub solved_by: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub summary: MatrixSummary,
    pub folds: usize,
    /// Executed run when available, otherwise the simulated charge.
    pub lmpick: TableRow,
    pub lmpick_simulated: TableRow,
    pub lmpick_executed: Option<TableRow>,
    pub classifier_oracle: TableRow,
    pub adversarial_classifier: TableRow,
    /// Classifier and model oracles together, charged without warm-up.
    pub oracle: TableRow,
    pub accuracy: Vec<RatioRow>,
    pub rank: Vec<RatioRow>,
    /// Share of executed runs that chose the simulated strategy.
    pub execution_agreement: Option<f64>,
    pub instances: Vec<InstanceEval>,
    pub portfolio: Portfolio,
}

fn summarize(
    table: &BTreeMap<String, Vec<(RunLabel, f64)>>,
    labels: &BTreeMap<String, SatLabel>,
    portfolio: &Portfolio,
    cutoff: f64,
) -> MatrixSummary {
    let mut strategies: Vec<TableRow> =
        portfolio.names().into_iter().map(TableRow::named).collect();
    let mut virtual_best = TableRow::named("Oracle (VBS)");
    let mut solved_by = vec![0; portfolio.len() + 1];
    for (inst, row) in table {
        let label = labels.get(inst).copied().unwrap_or(SatLabel::Unknown);
        for (s, &(status, t)) in row.iter().enumerate() {
            strategies[s].add(label, status.solved(), t);
        }
        let best = argmin_cost(&row.iter().map(|r| r.1).collect::<Vec<_>>());
        virtual_best.add(label, row[best].0.solved(), row[best].1);
        solved_by[row.iter().filter(|r| r.0.solved()).count()] += 1;
    }
    let random = TableRow::mean_of("Rand.", &strategies);
    MatrixSummary {
        cutoff_seconds: cutoff,
        strategies,
        random,
        virtual_best,
        solved_by,
    }
}

/// Table totals straight from matrix rows.
pub fn summarize_matrix(
    records: &[RunRecord],
    portfolio: &Portfolio,
    cutoff: f64,
) -> Result<MatrixSummary, HarnessError> {
    let table = runtime_table(records, portfolio)?;
    let labels = consensus_labels(records, &BTreeMap::new())?;
    Ok(summarize(&table, &labels, portfolio, cutoff))
}

fn training_set(
    rows: &[FeatureRow],
    idx: &[usize],
    table: &BTreeMap<String, Vec<(RunLabel, f64)>>,
) -> Vec<TrainingInstance> {
    idx.iter()
        .filter_map(|&i| {
            let r = &rows[i];
            r.sat_label.as_bool().map(|sat_label| TrainingInstance {
                name: r.instance.clone(),
                features: r.features.clone(),
                sat_label,
                runtimes: table[&r.instance].iter().map(|x| x.1).collect(),
            })
        })
        .collect()
}

/// Trains one bundle per fold on that fold's training split only.
pub fn train_folds(
    rows: &[FeatureRow],
    records: &[RunRecord],
    opts: &EvalOptions,
) -> Result<Vec<(Fold, TrainedBundle<f64>)>, HarnessError> {
    let table = runtime_table(records, &opts.portfolio)?;
    for r in rows {
        if !table.contains_key(&r.instance) {
            return Err(HarnessError::Coverage(format!(
                "no matrix rows for featured instance {}",
                r.instance
            )));
        }
    }
    let folds = kfold(rows.len(), opts.folds, opts.seed)
        .map_err(|e| HarnessError::InvalidArgument(e.to_string()))?;
    folds
        .into_par_iter()
        .map(|fold| {
            let data = training_set(rows, &fold.train, &table);
            let bundle = train_with(&data, &opts.portfolio, &opts.train)?;
            Ok((fold, bundle))
        })
        .collect()
}

fn rank_of(runtimes: &[(RunLabel, f64)], chosen: usize) -> usize {
    runtimes.iter().filter(|r| r.1 < runtimes[chosen].1).count()
}

/// k-fold cross-validated evaluation of the learned selector against every
/// single strategy, a random pick, and oracle ablations.
pub fn evaluate(run: &MatrixRun, opts: &EvalOptions) -> Result<EvaluationReport, HarnessError> {
    let table = runtime_table(&run.records, &opts.portfolio)?;
    let measures: BTreeMap<&str, f64> = run
        .measures
        .iter()
        .map(|m| (m.instance.as_str(), m.cpu_seconds))
        .collect();
    for r in &run.features {
        if !measures.contains_key(r.instance.as_str()) {
            return Err(HarnessError::Coverage(format!(
                "no measurement row for {}",
                r.instance
            )));
        }
    }
    let rows = &run.features;
    let bundles = train_folds(rows, &run.records, opts)?;
    let cutoff = opts.cutoff_seconds;
    let k = opts.portfolio.len();

    let mut instances = Vec::with_capacity(rows.len());
    for (f, (fold, bundle)) in bundles.iter().enumerate() {
        for &i in &fold.test {
            let r = &rows[i];
            let runtimes = table[&r.instance].clone();
            let truth: Vec<f64> = runtimes.iter().map(|x| x.1).collect();
            let selection = select_strategy(bundle, &r.features);
            let label = r.sat_label.as_bool();
            let cls = select_strategy_with(
                bundle,
                &r.features,
                &Overrides {
                    sat_label: label,
                    runtimes: None,
                },
            );
            let adv = select_strategy_with(
                bundle,
                &r.features,
                &Overrides {
                    sat_label: label.map(|b| !b),
                    runtimes: None,
                },
            );
            let oracle = select_strategy_with(
                bundle,
                &r.features,
                &Overrides {
                    sat_label: label.or(Some(true)),
                    runtimes: Some(truth),
                },
            );
            instances.push(InstanceEval {
                instance: r.instance.clone(),
                fold: f,
                label: r.sat_label,
                rank: rank_of(&runtimes, selection.index),
                runtimes,
                warmup_seconds: measures[r.instance.as_str()],
                selection,
                classifier_oracle_choice: cls.index,
                adversarial_choice: adv.index,
                oracle_choice: oracle.index,
                executed: None,
            });
        }
    }
    instances.sort_by(|a, b| a.instance.cmp(&b.instance));

    if let Some(exec) = &opts.executed {
        let formulas: BTreeMap<&str, &Formula> = exec
            .formulas
            .iter()
            .map(|f| (f.source_name.as_str(), f))
            .collect();
        for e in &instances {
            if !formulas.contains_key(e.instance.as_str()) {
                return Err(HarnessError::Coverage(format!(
                    "no instance file for {}",
                    e.instance
                )));
            }
        }
        let config = SolverConfig {
            cutoff_seconds: cutoff,
            seed: exec.seed,
            ..SolverConfig::default()
        };
        let pool = thread_pool(exec.workers)?;
        let results: Vec<Result<(RunLabel, f64, Option<usize>), HarnessError>> =
            pool.install(|| {
                instances
                    .par_iter()
                    .map(|e| {
                        let bundle = &bundles[e.fold].1;
                        let (out, report) =
                            lmpick_solve(formulas[e.instance.as_str()], bundle, &config)?;
                        let (status, t) = match out.status {
                            SolveStatus::Timeout => (RunLabel::Timeout, cutoff),
                            _ if out.cpu_seconds > cutoff => (RunLabel::Timeout, cutoff),
                            SolveStatus::Sat(_) => (RunLabel::Sat, out.cpu_seconds),
                            SolveStatus::Unsat => (RunLabel::Unsat, out.cpu_seconds),
                        };
                        let chosen = match report.kind {
                            ReportKind::Selected => report.selection.map(|s| s.index),
                            _ => None,
                        };
                        Ok((status, t, chosen))
                    })
                    .collect()
            });
        for (e, r) in instances.iter_mut().zip(results) {
            e.executed = Some(r?);
        }
    }

    let labels: BTreeMap<String, SatLabel> = rows
        .iter()
        .map(|r| (r.instance.clone(), r.sat_label))
        .collect();
    let eval_table: BTreeMap<String, Vec<(RunLabel, f64)>> = rows
        .iter()
        .map(|r| (r.instance.clone(), table[&r.instance].clone()))
        .collect();
    let summary = summarize(&eval_table, &labels, &opts.portfolio, cutoff);

    let simulated = |name: &str, pick: &dyn Fn(&InstanceEval) -> usize, warm: bool| {
        let mut row = TableRow::named(name);
        for e in &instances {
            let (status, rt) = e.runtimes[pick(e)];
            let t = if warm { e.warmup_seconds + rt } else { rt };
            let solved = status.solved() && t <= cutoff;
            row.add(e.label, solved, if solved { t } else { cutoff });
        }
        row
    };
    let lmpick_simulated = simulated("LMPick (simulated)", &|e| e.selection.index, true);
    let classifier_oracle = simulated(
        "LMPick + classifier oracle",
        &|e| e.classifier_oracle_choice,
        true,
    );
    let adversarial_classifier = simulated(
        "LMPick + inverted classifier",
        &|e| e.adversarial_choice,
        true,
    );
    let oracle = simulated("LMPick + both oracles", &|e| e.oracle_choice, false);

    let (lmpick_executed, execution_agreement) = if opts.executed.is_some() {
        let mut row = TableRow::named("LMPick");
        let mut agree = 0;
        let mut selected = 0;
        for e in &instances {
            let (status, t, chosen) = e.executed.expect("executed above");
            // a run the consensus could not label takes its own answer
            let label = match (e.label, status) {
                (SatLabel::Unknown, RunLabel::Sat) => SatLabel::Sat,
                (SatLabel::Unknown, RunLabel::Unsat) => SatLabel::Unsat,
                (l, _) => l,
            };
            row.add(label, status.solved(), t);
            if let Some(c) = chosen {
                selected += 1;
                agree += usize::from(c == e.selection.index);
            }
        }
        (
            Some(row),
            Some(if selected == 0 {
                1.0
            } else {
                agree as f64 / selected as f64
            }),
        )
    } else {
        (None, None)
    };
    let lmpick = lmpick_executed.clone().unwrap_or_else(|| TableRow {
        name: "LMPick".into(),
        ..lmpick_simulated.clone()
    });

    let ratio =
        |name: &str, keep: &dyn Fn(&InstanceEval) -> bool, value: &dyn Fn(&InstanceEval) -> f64| {
            let sel: Vec<&InstanceEval> = instances.iter().filter(|e| keep(e)).collect();
            let percent = if sel.is_empty() {
                0.0
            } else {
                100.0 * sel.iter().map(|e| value(e)).sum::<f64>() / sel.len() as f64
            };
            RatioRow {
                name: name.into(),
                count: sel.len(),
                percent,
            }
        };
    let correct = |e: &InstanceEval| {
        let predicted = e.selection.p_sat >= 0.5;
        f64::from(u8::from(Some(predicted) == e.label.as_bool()))
    };
    let accuracy = vec![
        ratio("SAT", &|e| e.label == SatLabel::Sat, &correct),
        ratio("UNSAT", &|e| e.label == SatLabel::Unsat, &correct),
        ratio("ALL", &|e| e.label != SatLabel::Unknown, &correct),
    ];
    let denom = (k.max(2) - 1) as f64;
    let rank_value = |e: &InstanceEval| e.rank as f64 / denom;
    let rank = vec![
        ratio("SAT", &|e| e.label == SatLabel::Sat, &rank_value),
        ratio("UNSAT", &|e| e.label == SatLabel::Unsat, &rank_value),
        ratio("ALL", &|e| e.label != SatLabel::Unknown, &rank_value),
    ];

    Ok(EvaluationReport {
        summary,
        folds: opts.folds,
        lmpick,
        lmpick_simulated,
        lmpick_executed,
        classifier_oracle,
        adversarial_classifier,
        oracle,
        accuracy,
        rank,
        execution_agreement,
        instances,
        portfolio: opts.portfolio.clone(),
    })
}

fn table_header(out: &mut String) {
    let _ = writeln!(
        out,
        "{:<30} {:>8} {:>8} {:>8} {:>12} {:>12} {:>12}",
        "", "S sat", "S unsat", "S all", "T sat", "T unsat", "T all"
    );
}

fn table_line(out: &mut String, r: &TableRow) {
    let _ = writeln!(
        out,
        "{:<30} {:>8.2} {:>8.2} {:>8.2} {:>12.3} {:>12.3} {:>12.3}",
        r.name, r.solved_sat, r.solved_unsat, r.solved, r.time_sat, r.time_unsat, r.time
    );
}

pub fn render_matrix_summary(s: &MatrixSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Solved instances (S) and total CPU seconds (T); unsolved runs count {} s.",
        s.cutoff_seconds
    );
    table_header(&mut out);
    for r in &s.strategies {
        table_line(&mut out, r);
    }
    table_line(&mut out, &s.random);
    table_line(&mut out, &s.virtual_best);
    let _ = writeln!(out, "\nInstances solved by k strategies:");
    let total: usize = s.solved_by.iter().sum();
    for (k, n) in s.solved_by.iter().enumerate() {
        let pct = if total == 0 {
            0.0
        } else {
            100.0 * *n as f64 / total as f64
        };
        let _ = writeln!(out, "  k={k:<2} {n:>6} ({pct:.1}%)");
    }
    out
}

pub fn render_report(r: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}-fold cross-validation over {} instances. Simulated rows charge the warm-up \
         measurement run plus the recorded runtime of the chosen strategy; the two-oracle \
         row charges the recorded runtime only.",
        r.folds,
        r.instances.len()
    );
    let _ = writeln!(out, "Unsolved runs count {} s.\n", r.summary.cutoff_seconds);
    table_header(&mut out);
    for row in &r.summary.strategies {
        table_line(&mut out, row);
    }
    table_line(&mut out, &r.summary.random);
    table_line(&mut out, &r.lmpick);
    if r.lmpick_executed.is_some() {
        table_line(&mut out, &r.lmpick_simulated);
    }
    table_line(&mut out, &r.classifier_oracle);
    table_line(&mut out, &r.adversarial_classifier);
    table_line(&mut out, &r.oracle);
    table_line(&mut out, &r.summary.virtual_best);
    if let Some(a) = r.execution_agreement {
        let _ = writeln!(
            out,
            "\nExecuted runs choosing the simulated strategy: {:.1}%",
            100.0 * a
        );
    }
    let _ = writeln!(out, "\nClassifier accuracy:");
    for a in &r.accuracy {
        let _ = writeln!(out, "  {:<6} {:>6.2}% of {}", a.name, a.percent, a.count);
    }
    let _ = writeln!(
        out,
        "\nPercent of strategies strictly faster than the chosen one:"
    );
    for a in &r.rank {
        let _ = writeln!(out, "  {:<6} {:>6.2}% over {}", a.name, a.percent, a.count);
    }
    let _ = writeln!(out, "\nInstances solved by k strategies:");
    for (k, n) in r.summary.solved_by.iter().enumerate() {
        let _ = writeln!(out, "  k={k:<2} {n:>6}");
    }
    out
}

fn write_rows(path: &Path, rows: &[&TableRow]) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "row",
        "solved_sat",
        "solved_unsat",
        "solved",
        "time_sat",
        "time_unsat",
        "time",
    ])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.solved_sat.to_string(),
            r.solved_unsat.to_string(),
            r.solved.to_string(),
            r.time_sat.to_string(),
            r.time_unsat.to_string(),
            r.time.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_ratio(path: &Path, rows: &[RatioRow]) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    w.write_record(["row", "count", "percent"])?;
    for r in rows {
        w.write_record([r.name.clone(), r.count.to_string(), r.percent.to_string()])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes `report.txt`, `table2.csv`, `accuracy.csv`, `rank.csv`,
/// `solved_by.csv` and `selections.csv` into `dir`.
pub fn write_report(dir: &Path, r: &EvaluationReport) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let txt = dir.join("report.txt");
    fs::write(&txt, render_report(r)).map_err(io_err(&txt))?;

    let mut rows: Vec<&TableRow> = r.summary.strategies.iter().collect();
    rows.push(&r.summary.random);
    rows.push(&r.lmpick);
    if r.lmpick_executed.is_some() {
        rows.push(&r.lmpick_simulated);
    }
    rows.extend([
        &r.classifier_oracle,
        &r.adversarial_classifier,
        &r.oracle,
        &r.summary.virtual_best,
    ]);
    write_rows(&dir.join("table2.csv"), &rows)?;
    write_ratio(&dir.join("accuracy.csv"), &r.accuracy)?;
    write_ratio(&dir.join("rank.csv"), &r.rank)?;

    let path = dir.join("solved_by.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["strategies", "instances"])?;
    for (k, n) in r.summary.solved_by.iter().enumerate() {
        w.write_record([k.to_string(), n.to_string()])?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("selections.csv");
    let mut w = csv_writer(&path)?;
    let mut header: Vec<String> = ["instance", "fold", "p_sat", "chosen", "rank"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=r.portfolio.len()).map(|i| format!("cost_{i}")));
    w.write_record(&header)?;
    for e in &r.instances {
        let mut rec = vec![
            e.instance.clone(),
            e.fold.to_string(),
            e.selection.p_sat.to_string(),
            e.selection.name.clone(),
            e.rank.to_string(),
        ];
        rec.extend(e.selection.costs.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(())
}
