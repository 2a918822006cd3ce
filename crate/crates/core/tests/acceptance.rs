//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines come out in order and unbuffered.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use lmpick::harness::{
    evaluate, gen_rand_formulas, render_report, run_matrix_formulas, write_matrix_run,
    write_report, EvalOptions, EvaluationReport, ExecOptions, GenOptions, MatrixOptions,
};
use lmpick::ml::{
    aic_linear, aic_logistic, fit_ridge_with, DesignMatrix, LogisticOptions, LogisticProblem,
    RidgeOptions,
};
use lmpick::picker::{argmin_cost, mixture_costs, select_strategy_with, Overrides};
use lmpick::restart::StrategyKind;
use lmpick::solver::check_model;
use lmpick::{default_portfolio, luby_core, preprocess, solve, SolveStatus, SolverConfig};
use rand::Rng;

const GEN_SEED: u64 = 1;
const SOLVER_SEED: u64 = 0;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn luby_sequence() -> Outcome {
    let start = Instant::now();
    let prefix: Vec<u64> = (1..=17).map(luby_core).collect();
    ensure(
        prefix == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8, 1, 1],
        format!("prefix {prefix:?}"),
    )?;
    // t_i = 2^(k-1) at i = 2^k - 1, otherwise t_(i - 2^(k-1) + 1)
    for i in 1..=(1u64 << 15) {
        let mut k = 1;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        let expected = if i == (1 << k) - 1 {
            1 << (k - 1)
        } else {
            luby_core(i - (1 << (k - 1)) + 1)
        };
        ensure(
            luby_core(i) == expected,
            format!("self-similarity fails at i = {i}"),
        )?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 1.0, format!("took {secs:.3} s"))?;
    Ok(format!("prefix ok, 2^15 terms self-similar, {secs:.3} s"))
}

fn portfolio_fidelity() -> Outcome {
    let p = default_portfolio();
    let expected = [
        ("luby-32", StrategyKind::Luby { unit: 32 }),
        ("luby-512", StrategyKind::Luby { unit: 512 }),
        ("Fixed-512", StrategyKind::Fixed { size: 512 }),
        ("Fixed-4096", StrategyKind::Fixed { size: 4096 }),
        ("Fixed-16384", StrategyKind::Fixed { size: 16384 }),
        (
            "Geometric-1.1",
            StrategyKind::Geometric {
                init: 32,
                factor: 1.1,
            },
        ),
        (
            "Geometric-1.5",
            StrategyKind::Geometric {
                init: 100,
                factor: 1.5,
            },
        ),
        (
            "Nested-1.1",
            StrategyKind::Nested {
                inner: 100,
                outer: 1000,
                factor: 1.1,
            },
        ),
        (
            "Nested-1.5",
            StrategyKind::Nested {
                inner: 100,
                outer: 1000,
                factor: 1.5,
            },
        ),
    ];
    ensure(p.len() == 9, format!("{} strategies", p.len()))?;
    for (s, (name, kind)) in p.strategies.iter().zip(expected) {
        ensure(
            s.name == name && s.kind == kind,
            format!("{} / {:?} differs from {name} / {kind:?}", s.name, s.kind),
        )?;
    }
    Ok("nine strategies match".into())
}

fn solver_soundness() -> Outcome {
    let start = Instant::now();
    let mut r = common::rng(500);
    let (mut sat, mut unsat) = (0, 0);
    for i in 0..500 {
        let n = r.gen_range(20..=50u32);
        let ratio = r.gen_range(3.0..=6.0);
        let f = common::random_ksat(&mut r, n, (ratio * n as f64).round() as usize, 3);
        let oracle = if n <= 20 {
            common::brute_force_sat(n, &f.clauses)
        } else {
            common::dpll(n, &f.clauses).is_some()
        };
        match solve(
            &preprocess(&f),
            default_portfolio().strategies[i % 9].schedule(),
            SolverConfig::default(),
        )
        .status
        {
            SolveStatus::Sat(m) => {
                ensure(oracle, format!("instance {i}: solver sat, oracle unsat"))?;
                let partial: Vec<Option<bool>> = m.iter().map(|&b| Some(b)).collect();
                ensure(
                    check_model(&f, &partial) == Ok(true),
                    format!("instance {i}: model fails"),
                )?;
                sat += 1;
            }
            SolveStatus::Unsat => {
                ensure(!oracle, format!("instance {i}: solver unsat, oracle sat"))?;
                unsat += 1;
            }
            SolveStatus::Timeout => return Err(format!("instance {i}: timeout")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, format!("took {secs:.1} s"))?;
    Ok(format!(
        "500/500 agree ({sat} sat, {unsat} unsat), {secs:.1} s"
    ))
}

fn restart_fidelity() -> Outcome {
    let instances: Vec<_> = (0..10).map(|s| common::hard_instance(900 + s)).collect();
    let mut events = 0;
    for s in default_portfolio().strategies {
        let mut seen = 0;
        for (i, f) in instances.iter().enumerate() {
            let config = SolverConfig {
                log_restarts: true,
                ..SolverConfig::default()
            };
            let out = solve(&preprocess(f), s.schedule(), config);
            let mut total = 0;
            for (k, e) in out.restart_log.iter().enumerate() {
                total += s.restart_length(k as u64 + 1);
                ensure(
                    e.index == k as u64 + 1 && e.total_conflicts == total,
                    format!(
                        "{} on instance {i}: restart {} at conflict {}, expected {total}",
                        s.name, e.index, e.total_conflicts
                    ),
                )?;
            }
            ensure(
                out.conflicts >= total,
                format!("{} on instance {i}: log past the run", s.name),
            )?;
            seen += out.restart_log.len();
        }
        events += seen;
    }
    Ok(format!(
        "9 strategies x 10 instances, {events} restarts at scheduled counts"
    ))
}

fn ml_oracle_equivalence() -> Outcome {
    let mut r = common::rng(77);
    // ridge at zero penalty against QR least squares
    let rows = common::uniform_rows(&mut r, 100, 8);
    let y: Vec<f64> = rows
        .iter()
        .map(|x| x[0] - 2.0 * x[5] + r.gen_range(-1.0..1.0))
        .collect();
    let d = DesignMatrix::new(rows.clone(), y.clone(), vec![]).map_err(|e| e.to_string())?;
    let opts = RidgeOptions {
        clamp_nonnegative: false,
        ..RidgeOptions::fixed(0.0)
    };
    let m = fit_ridge_with(&d, &d.all_features(), &opts).map_err(|e| e.to_string())?;
    let with_ones: Vec<Vec<f64>> = rows
        .iter()
        .map(|x| std::iter::once(1.0).chain(x.iter().copied()).collect())
        .collect();
    let ols = common::householder_lstsq(&with_ones, &y);
    let ols_err = m
        .raw_coefficients()
        .iter()
        .zip(&ols)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(
        ols_err <= 1e-8,
        format!("ridge vs least squares {ols_err:e}"),
    )?;

    // noiseless recovery
    let rows = common::uniform_rows(&mut r, 500, 60);
    let y: Vec<f64> = rows.iter().map(|x| 3.0 * x[0] - 2.0 * x[6] + 0.5).collect();
    let d = DesignMatrix::new(rows, y, vec![]).map_err(|e| e.to_string())?;
    let opts = RidgeOptions {
        clamp_nonnegative: false,
        ..RidgeOptions::fixed(1e-8)
    };
    let raw = fit_ridge_with(&d, &d.all_features(), &opts)
        .map_err(|e| e.to_string())?
        .raw_coefficients();
    let mut truth = vec![0.0; 61];
    (truth[0], truth[1], truth[7]) = (0.5, 3.0, -2.0);
    let rec_err = raw
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(rec_err <= 1e-6, format!("noiseless recovery {rec_err:e}"))?;

    // logistic gradient against central differences
    let rows = common::uniform_rows(&mut r, 200, 4);
    let labels: Vec<f64> = rows
        .iter()
        .map(|x| f64::from(x[0] + x[1] + r.gen_range(-1.0..1.0) > 0.0))
        .collect();
    let d = DesignMatrix::new(rows, labels, vec![]).map_err(|e| e.to_string())?;
    let p = LogisticProblem::new(&d, LogisticOptions::default()).map_err(|e| e.to_string())?;
    let mask = d.all_features();
    let mut grad_err: f64 = 0.0;
    for _ in 0..20 {
        let w: Vec<f64> = (0..5).map(|_| r.gen_range(-2.0..2.0)).collect();
        let g = p.gradient(&mask, &w);
        for k in 0..5 {
            let h = 1e-5;
            let (mut up, mut down) = (w.clone(), w.clone());
            up[k] += h;
            down[k] -= h;
            let fd = (p.objective(&mask, &up) - p.objective(&mask, &down)) / (2.0 * h);
            grad_err = grad_err.max((g[k] - fd).abs() / g[k].abs().max(1.0));
        }
    }
    ensure(
        grad_err <= 1e-5,
        format!("gradient relative error {grad_err:e}"),
    )?;

    // AIC closed forms
    let n = 50;
    for (rss, k) in [(3.0f64, 2usize), (0.5, 0), (1e3, 9)] {
        ensure(
            aic_linear(rss, n, k) == n as f64 * (rss / n as f64).ln() + 2.0 * (k + 1) as f64,
            "linear AIC closed form",
        )?;
        ensure(
            aic_linear(rss, n, k + 1) - aic_linear(rss, n, k) == 2.0,
            "extra feature adds 2",
        )?;
        let lifted = aic_linear(2.0 * rss, n, k) - aic_linear(rss, n, k);
        let ulps = 4.0 * f64::EPSILON * aic_linear(2.0 * rss, n, k).abs().max(1.0);
        ensure(
            (lifted - n as f64 * 2f64.ln()).abs() <= ulps,
            "doubling RSS adds n ln 2",
        )?;
    }
    ensure(
        aic_linear(0.0, n, 3) == f64::NEG_INFINITY,
        "perfect fit is -inf",
    )?;
    ensure(
        aic_logistic(n as f64 * 0.5f64.ln(), 0) == -2.0 * n as f64 * 0.5f64.ln() + 2.0,
        "logistic closed form",
    )?;
    Ok(format!(
        "ols {ols_err:.1e}, recovery {rec_err:.1e}, gradient {grad_err:.1e}, AIC identities hold"
    ))
}

fn selection_formula() -> Outcome {
    let costs = mixture_costs(0.8, &[10.0, 20.0], &[100.0, 50.0]);
    ensure(
        (costs[0] - 28.0).abs() < 1e-12 && (costs[1] - 26.0).abs() < 1e-12,
        format!("costs {costs:?}"),
    )?;
    ensure(
        argmin_cost(&costs) == 1,
        "28 vs 26 picks the second strategy",
    )?;

    let b = common::synthetic_bundle(31);
    let mut r = common::rng(32);
    for t in common::synthetic_data(33, 50, 0) {
        let x = t.features.values();
        for (label, class) in [
            (true, lmpick::picker::SatClass::Sat),
            (false, lmpick::picker::SatClass::Unsat),
        ] {
            let sel = select_strategy_with(
                &b,
                &t.features,
                &Overrides {
                    sat_label: Some(label),
                    runtimes: None,
                },
            );
            let only: Vec<f64> = b
                .portfolio
                .names()
                .iter()
                .map(|s| b.predict_runtime(s, class, x).unwrap())
                .collect();
            ensure(
                sel.index == argmin_cost(&only),
                format!("p_sat = {} ignores the other class", u8::from(label)),
            )?;
        }
    }
    for _ in 0..1000 {
        let m_sat: Vec<f64> = (0..9).map(|_| r.gen_range(0.0..100.0)).collect();
        let m_unsat: Vec<f64> = (0..9).map(|_| r.gen_range(0.0..100.0)).collect();
        let p = r.gen_range(0.0..=1.0);
        let c = r.gen_range(1e-3..1e3);
        let scale = |v: &[f64]| v.iter().map(|x| x * c).collect::<Vec<_>>();
        let a = mixture_costs(p, &m_sat, &m_unsat);
        let s = mixture_costs(p, &scale(&m_sat), &scale(&m_unsat));
        ensure(
            argmin_cost(&a) == argmin_cost(&s),
            "scaling changed the arg-min",
        )?;
    }
    Ok("worked example, degenerate p_sat, 1000 scaled matrices".into())
}

struct DeskScale {
    report: EvaluationReport,
    seconds: f64,
}

fn desk_scale(out: &PathBuf) -> Result<DeskScale, String> {
    let start = Instant::now();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let gen = GenOptions {
        seed: GEN_SEED,
        ..GenOptions::default()
    };
    let formulas = gen_rand_formulas(&gen).map_err(|e| e.to_string())?;
    let mopts = MatrixOptions {
        cutoff_seconds: 60.0,
        workers,
        seed: SOLVER_SEED,
        ..MatrixOptions::default()
    };
    let run = run_matrix_formulas(&formulas, &mopts).map_err(|e| e.to_string())?;
    write_matrix_run(out, &run).map_err(|e| e.to_string())?;
    let eopts = EvalOptions {
        folds: 10,
        seed: GEN_SEED,
        cutoff_seconds: 60.0,
        executed: Some(ExecOptions {
            formulas,
            workers,
            seed: SOLVER_SEED,
        }),
        ..EvalOptions::default()
    };
    let report = evaluate(&run, &eopts).map_err(|e| e.to_string())?;
    write_report(out, &report).map_err(|e| e.to_string())?;
    Ok(DeskScale {
        report,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn oracle_upper_bound(r: &EvaluationReport) -> Outcome {
    let vbs = &r.summary.virtual_best;
    ensure(
        r.oracle.solved == vbs.solved,
        format!("oracle solved {} vs VBS {}", r.oracle.solved, vbs.solved),
    )?;
    for s in &r.summary.strategies {
        ensure(
            r.oracle.time <= s.time,
            format!(
                "oracle time {:.3} > {} {:.3}",
                r.oracle.time, s.name, s.time
            ),
        )?;
    }
    let best = r
        .summary
        .strategies
        .iter()
        .map(|s| s.time)
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "solved {} = VBS, time {:.3} <= best single {:.3}",
        r.oracle.solved, r.oracle.time, best
    ))
}

fn end_to_end(r: &EvaluationReport) -> Outcome {
    let l = &r.lmpick;
    let rand = &r.summary.random;
    let detail = format!(
        "LMPick {:.0} solved / {:.3} s vs Rand. {:.2} / {:.3} s",
        l.solved, l.time, rand.solved, rand.time
    );
    ensure(r.lmpick_executed.is_some(), "LMPick row was not executed")?;
    ensure(
        l.time <= rand.time && l.solved >= rand.solved,
        detail.clone(),
    )?;
    Ok(detail)
}

fn classifier_sanity(r: &EvaluationReport) -> Outcome {
    let all = r
        .accuracy
        .iter()
        .find(|a| a.name == "ALL")
        .ok_or("no ALL row")?;
    let detail = format!(
        "ALL {:.2}% over {} labelled instances",
        all.percent, all.count
    );
    ensure(all.percent >= 75.0, detail.clone())?;
    Ok(detail)
}

fn rank_quality(r: &EvaluationReport) -> Outcome {
    let all = r
        .rank
        .iter()
        .find(|a| a.name == "ALL")
        .ok_or("no ALL row")?;
    let detail = format!("ALL {:.2}% of strategies faster than s_b", all.percent);
    ensure(all.percent < 50.0, detail.clone())?;
    Ok(detail)
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| match o {
        Ok(d) => println!("PASS  {name}: {d}"),
        Err(d) => {
            failed += 1;
            println!("FAIL  {name}: {d}");
        }
    };
    report("Luby sequence", luby_sequence());
    report("Portfolio fidelity", portfolio_fidelity());
    report("Solver soundness", solver_soundness());
    report("Restart fidelity", restart_fidelity());
    report("ML oracle equivalence", ml_oracle_equivalence());
    report("Selection formula", selection_formula());

    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    match desk_scale(&out) {
        Ok(d) => {
            report("Oracle upper bound", oracle_upper_bound(&d.report));
            report("End-to-end vs random pick", end_to_end(&d.report));
            report("Classifier accuracy", classifier_sanity(&d.report));
            report("Selection rank", rank_quality(&d.report));
            println!(
                "\ndesk-scale run: {:.0} s, artifacts in {}\n",
                d.seconds,
                out.display()
            );
            println!("{}", render_report(&d.report));
        }
        Err(e) => {
            for name in [
                "Oracle upper bound",
                "End-to-end vs random pick",
                "Classifier accuracy",
                "Selection rank",
            ] {
                report(name, Err(format!("desk-scale run failed: {e}")));
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
