use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lmpick::harness::{
    evaluate, gen_rand, list_instances, load_bundle, load_instance, read_matrix_csv,
    read_matrix_run, render_matrix_summary, render_report, run_matrix, runtime_table, save_bundle,
    summarize_matrix, write_matrix_run, write_report, EvalOptions, ExecOptions, GenOptions,
    MatrixOptions,
};
use lmpick::picker::{
    lmpick_solve, train_with, ReportKind, RuntimeTarget, TrainOptions, TrainingInstance,
};
use lmpick::solver::RestartEvent;
use lmpick::{preprocess, solve, Portfolio, SolveStatus, SolverConfig};

#[derive(Parser)]
#[command(
    name = "lmpick",
    version,
    about = "CDCL solving with a learned restart-strategy picker"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// CPU-time limit per solver run.
    #[arg(long, global = true, default_value_t = 60.0)]
    cutoff_seconds: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Comma-separated strategy names; defaults to all nine.
    #[arg(long, global = true, value_delimiter = ',')]
    portfolio: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate uniform random 3-SAT instances.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 100)]
        vars_min: u32,
        #[arg(long, default_value_t = 200)]
        vars_max: u32,
        #[arg(long, default_value_t = 4.1)]
        ratio_min: f64,
        #[arg(long, default_value_t = 5.0)]
        ratio_max: f64,
    },
    /// Run every strategy on every instance; writes matrix.csv,
    /// measure.csv and features.csv.
    RunMatrix {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a bundle from a run-matrix output directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Regress on log10(1 + seconds) instead of seconds.
        #[arg(long)]
        log_target: bool,
    },
    /// Solve one instance with a trained bundle or a fixed strategy.
    Solve {
        instance: PathBuf,
        #[arg(long, required_unless_present = "strategy")]
        bundle: Option<PathBuf>,
        /// Run this portfolio strategy alone instead of the picker.
        #[arg(long, conflicts_with = "bundle")]
        strategy: Option<String>,
        /// Write one line per restart (and the switch) to this file.
        #[arg(long)]
        event_log: Option<PathBuf>,
        /// Print the model line for satisfiable instances.
        #[arg(long)]
        model: bool,
    },
    /// Cross-validated evaluation; writes report.txt and CSV tables.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Instance directory; when given, the picker is also executed on
        /// every test instance.
        #[arg(long)]
        instances: Option<PathBuf>,
        #[arg(long)]
        log_target: bool,
    },
    /// Per-strategy totals from a matrix CSV.
    Report {
        #[arg(long)]
        matrix: PathBuf,
    },
}

impl Global {
    fn portfolio(&self) -> Result<Portfolio> {
        if self.portfolio.is_empty() {
            Ok(Portfolio::default())
        } else {
            Ok(Portfolio::from_names(&self.portfolio)?)
        }
    }

    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            })
            .max(1)
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            cutoff_seconds: self.cutoff_seconds,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

fn train_options(log_target: bool, workers: usize) -> TrainOptions {
    TrainOptions {
        target: if log_target {
            RuntimeTarget::Log10
        } else {
            RuntimeTarget::Seconds
        },
        parallel: workers > 1,
        ..TrainOptions::default()
    }
}

fn write_event_log(
    path: &Path,
    events: &[RestartEvent],
    switch: Option<(u64, &str)>,
) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut pending = switch;
    for e in events {
        if let Some((at, name)) = pending {
            if e.total_conflicts >= at {
                writeln!(f, "switch {at} {name}")?;
                pending = None;
            }
        }
        writeln!(f, "{e}")?;
    }
    if let Some((at, name)) = pending {
        writeln!(f, "switch {at} {name}")?;
    }
    Ok(())
}

fn print_status(status: &SolveStatus, model: bool) {
    match status {
        SolveStatus::Sat(m) => {
            println!("s SATISFIABLE");
            if model {
                let lits: Vec<String> = m
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| format!("{}", if b { i as i64 + 1 } else { -(i as i64 + 1) }))
                    .collect();
                println!("v {} 0", lits.join(" "));
            }
        }
        SolveStatus::Unsat => println!("s UNSATISFIABLE"),
        SolveStatus::Timeout => println!("s UNKNOWN"),
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if !(g.cutoff_seconds > 0.0) {
        bail!("--cutoff-seconds must be positive");
    }
    match cli.command {
        Command::Gen {
            out,
            count,
            vars_min,
            vars_max,
            ratio_min,
            ratio_max,
        } => {
            let opts = GenOptions {
                count,
                vars_min,
                vars_max,
                ratio_min,
                ratio_max,
                seed: g.seed,
            };
            let files = gen_rand(&out, &opts)?;
            println!("wrote {} instances to {}", files.len(), out.display());
        }
        Command::RunMatrix { instances, out } => {
            let files = list_instances(&instances)?;
            if files.is_empty() {
                bail!("no .cnf files in {}", instances.display());
            }
            let opts = MatrixOptions {
                portfolio: g.portfolio()?,
                cutoff_seconds: g.cutoff_seconds,
                workers: g.workers(),
                seed: g.seed,
            };
            let run = run_matrix(&files, &opts)?;
            write_matrix_run(&out, &run)?;
            let easy = run.measures.iter().filter(|m| m.too_easy).count();
            println!(
                "{} runs over {} instances ({} solved inside the observation window) written to {}",
                run.records.len(),
                files.len(),
                easy,
                out.display()
            );
        }
        Command::Train {
            data,
            out,
            log_target,
        } => {
            let portfolio = g.portfolio()?;
            let run = read_matrix_run(&data)?;
            let table = runtime_table(&run.records, &portfolio)?;
            let mut instances = Vec::new();
            for r in &run.features {
                let Some(sat_label) = r.sat_label.as_bool() else {
                    continue;
                };
                let row = table
                    .get(&r.instance)
                    .with_context(|| format!("no matrix rows for {}", r.instance))?;
                instances.push(TrainingInstance {
                    name: r.instance.clone(),
                    features: r.features.clone(),
                    sat_label,
                    runtimes: row.iter().map(|x| x.1).collect(),
                });
            }
            let bundle = train_with::<f64>(
                &instances,
                &portfolio,
                &train_options(log_target, g.workers()),
            )?;
            save_bundle(&bundle, &out)?;
            println!(
                "trained on {} instances; bundle written to {}",
                instances.len(),
                out.display()
            );
        }
        Command::Solve {
            instance,
            bundle,
            strategy,
            event_log,
            model,
        } => {
            let f = load_instance(&instance)?;
            let config = SolverConfig {
                log_restarts: event_log.is_some(),
                ..g.solver_config()
            };
            if let Some(name) = strategy {
                let portfolio = g.portfolio()?;
                let s = portfolio
                    .get(&name)
                    .with_context(|| format!("unknown strategy `{name}`"))?;
                let out = solve(&preprocess(&f), s.schedule(), config);
                println!("c strategy {name}");
                println!(
                    "c conflicts {} restarts {} cpu {:.3}s",
                    out.conflicts, out.restarts, out.cpu_seconds
                );
                if let Some(p) = &event_log {
                    write_event_log(p, &out.restart_log, None)?;
                }
                print_status(&out.status, model);
            } else {
                let path = bundle.expect("required by clap");
                let b = load_bundle(&path)?;
                let (out, report) = lmpick_solve(&f, &b, &config)?;
                match (&report.kind, &report.selection) {
                    (ReportKind::Selected, Some(sel)) => {
                        println!(
                            "c selected {} at conflict {} (p_sat {:.3})",
                            sel.name,
                            report.switch_conflict.unwrap_or(0),
                            sel.p_sat
                        );
                        for (name, c) in b.portfolio.names().iter().zip(&sel.costs) {
                            println!("c cost {name} {c:.4}");
                        }
                    }
                    (ReportKind::SolvedInWindow, _) => println!("c solved-in-window"),
                    _ => println!("c solved-by-preprocessing"),
                }
                println!(
                    "c conflicts {} restarts {} cpu {:.3}s",
                    out.conflicts, out.restarts, out.cpu_seconds
                );
                if let Some(p) = &event_log {
                    let switch = report
                        .switch_conflict
                        .zip(report.selection.as_ref().map(|s| s.name.as_str()));
                    write_event_log(p, &out.restart_log, switch)?;
                }
                print_status(&out.status, model);
            }
        }
        Command::Evaluate {
            data,
            out,
            folds,
            instances,
            log_target,
        } => {
            let run = read_matrix_run(&data)?;
            let executed = match instances {
                Some(dir) => {
                    let formulas = list_instances(&dir)?
                        .iter()
                        .map(|p| load_instance(p))
                        .collect::<Result<Vec<_>, _>>()?;
                    Some(ExecOptions {
                        formulas,
                        workers: g.workers(),
                        seed: g.seed,
                    })
                }
                None => None,
            };
            let opts = EvalOptions {
                portfolio: g.portfolio()?,
                folds,
                seed: g.seed,
                cutoff_seconds: g.cutoff_seconds,
                train: train_options(log_target, g.workers()),
                executed,
            };
            let report = evaluate(&run, &opts)?;
            write_report(&out, &report)?;
            print!("{}", render_report(&report));
        }
        Command::Report { matrix } => {
            let records = read_matrix_csv(&matrix)?;
            let summary = summarize_matrix(&records, &g.portfolio()?, g.cutoff_seconds)?;
            print!("{}", render_matrix_summary(&summary));
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
