mod common;

use lmpick::cnf::Formula;
use lmpick::picker::{
    argmin_cost, lmpick_solve, lmpick_solve_with, mixture_costs, select_strategy,
    select_strategy_with, train, Overrides, ReportKind, SatClass, TrainError, TrainingInstance,
    SELECTION_CONFLICT,
};
use lmpick::restart::Portfolio;
use lmpick::{default_portfolio, FeatureVector, RestartStrategy, SolveStatus, SolverConfig};
use proptest::prelude::*;
use rand::Rng;

fn two_strategies() -> Portfolio {
    Portfolio {
        strategies: vec![RestartStrategy::luby(32), RestartStrategy::fixed(512)],
    }
}

#[test]
fn sat_only_data_rejected() {
    let data: Vec<TrainingInstance> = (0..20)
        .map(|i| TrainingInstance {
            name: format!("i{i}"),
            features: FeatureVector::from_vec((0..60).map(|j| (i * j) as f64).collect()).unwrap(),
            sat_label: true,
            runtimes: vec![1.0, 2.0],
        })
        .collect();
    assert!(matches!(
        train(&data, &two_strategies()),
        Err(TrainError::EmptyClass(SatClass::Unsat))
    ));
}

#[test]
fn runtime_row_length_checked() {
    let mut data = common::synthetic_data(1, 40, 0);
    data[3].runtimes.pop();
    assert!(matches!(
        train(&data, &default_portfolio()),
        Err(TrainError::RuntimeCount { index: 3, .. })
    ));
}

#[test]
fn bundle_has_two_models_per_strategy() {
    let b = common::synthetic_bundle(2);
    assert_eq!(b.models.len(), 18);
    b.validate().unwrap();
    for name in default_portfolio().names() {
        assert!(b.model(name, SatClass::Sat).is_some());
        assert!(b.model(name, SatClass::Unsat).is_some());
    }
}

#[test]
fn planted_ordering_recovered() {
    let fast = 4;
    let data = common::synthetic_data(3, 120, fast);
    let b = train(&data, &default_portfolio()).unwrap();
    let names = default_portfolio()
        .names()
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    let sat_rows: Vec<&TrainingInstance> = data.iter().filter(|t| t.sat_label).collect();
    let mean = |s: &str| {
        sat_rows
            .iter()
            .map(|t| {
                b.predict_runtime(s, SatClass::Sat, t.features.values())
                    .unwrap()
            })
            .sum::<f64>()
            / sat_rows.len() as f64
    };
    let fast_mean = mean(&names[fast]);
    for (i, n) in names.iter().enumerate() {
        if i != fast {
            assert!(fast_mean < mean(n), "{} not faster than {n}", names[fast]);
        }
    }
}

#[test]
fn mixture_example() {
    let costs = mixture_costs(0.8, &[10.0, 20.0], &[100.0, 50.0]);
    assert!((costs[0] - 28.0).abs() < 1e-12 && (costs[1] - 26.0).abs() < 1e-12);
    assert_eq!(argmin_cost(&costs), 1);
}

#[test]
fn tie_goes_to_first_strategy() {
    let mut b = common::synthetic_bundle(4);
    let same = b.models[0].model.clone();
    for m in &mut b.models {
        m.model = same.clone();
    }
    let x = common::synthetic_data(5, 1, 0).remove(0).features;
    assert_eq!(select_strategy(&b, &x).index, 0);
    assert_eq!(argmin_cost(&[3.0, 3.0, 3.0]), 0);
}

#[test]
fn oracle_overrides() {
    let b = common::synthetic_bundle(6);
    let x = common::synthetic_data(7, 1, 0).remove(0).features;
    let sel = select_strategy_with(
        &b,
        &x,
        &Overrides {
            sat_label: Some(true),
            runtimes: None,
        },
    );
    assert_eq!(sel.p_sat, 1.0);
    for (i, name) in default_portfolio().names().iter().enumerate() {
        assert_eq!(
            sel.costs[i],
            b.predict_runtime(name, SatClass::Sat, x.values()).unwrap()
        );
    }
    let sel = select_strategy_with(
        &b,
        &x,
        &Overrides {
            sat_label: Some(false),
            runtimes: None,
        },
    );
    assert_eq!(sel.p_sat, 0.0);

    let truth = vec![9.0, 4.0, 7.0, 3.5, 8.0, 3.5, 6.0, 5.0, 9.0];
    let sel = select_strategy_with(
        &b,
        &x,
        &Overrides {
            sat_label: Some(true),
            runtimes: Some(truth.clone()),
        },
    );
    assert_eq!(sel.index, 3);
    assert_eq!(sel.costs, truth);
}

#[test]
fn classifier_probability_in_unit_interval() {
    let b = common::synthetic_bundle(8);
    for t in common::synthetic_data(9, 50, 0) {
        let p = select_strategy(&b, &t.features).p_sat;
        assert!(p > 0.0 && p < 1.0);
    }
}

#[test]
fn scaled_models_keep_selection() {
    let mut r = common::rng(10);
    let b = common::synthetic_bundle(11);
    let xs = common::synthetic_data(12, 30, 0);
    for _ in 0..5 {
        let c: f64 = r.gen_range(0.01..100.0);
        let mut scaled = b.clone();
        for m in &mut scaled.models {
            for w in &mut m.model.weights {
                *w *= c;
            }
        }
        for t in &xs {
            assert_eq!(
                select_strategy(&b, &t.features).index,
                select_strategy(&scaled, &t.features).index
            );
        }
    }
}

fn ranking(costs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..costs.len()).collect();
    idx.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    idx
}

#[test]
fn scale_invariance_over_random_matrices() {
    let mut r = common::rng(13);
    for _ in 0..1000 {
        let m_sat: Vec<f64> = (0..9).map(|_| r.gen_range(0.0..100.0)).collect();
        let m_unsat: Vec<f64> = (0..9).map(|_| r.gen_range(0.0..100.0)).collect();
        let p: f64 = r.gen_range(0.0..=1.0);
        let c: f64 = r.gen_range(1e-3..1e3);
        let base = mixture_costs(p, &m_sat, &m_unsat);
        let scaled = mixture_costs(
            p,
            &m_sat.iter().map(|x| x * c).collect::<Vec<_>>(),
            &m_unsat.iter().map(|x| x * c).collect::<Vec<_>>(),
        );
        assert_eq!(argmin_cost(&base), argmin_cost(&scaled));
        assert_eq!(ranking(&base), ranking(&scaled));
    }
}

proptest! {
    #[test]
    fn mixture_bounds(p in 0.0f64..=1.0, pairs in prop::collection::vec((0.0f64..1e4, 0.0f64..1e4), 1..12)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        for (i, c) in mixture_costs(p, &a, &b).into_iter().enumerate() {
            let lo = a[i].min(b[i]);
            let hi = a[i].max(b[i]);
            prop_assert!(c >= lo * (1.0 - 1e-12) && c <= hi * (1.0 + 1e-12));
        }
    }
}

#[test]
fn easy_instance_solved_in_window() {
    let b = common::synthetic_bundle(14);
    let f = Formula::from_ints(3, &[&[1, 2], &[-1, 3], &[2, -3]]);
    let (out, report) = lmpick_solve(&f, &b, &SolverConfig::default()).unwrap();
    assert!(matches!(out.status, SolveStatus::Sat(_)));
    assert_eq!(report.kind, ReportKind::SolvedInWindow);
    assert!(report.selection.is_none() && report.switch_conflict.is_none());

    let f = Formula::from_ints(1, &[&[1], &[-1]]);
    let (out, report) = lmpick_solve(&f, &b, &SolverConfig::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Unsat);
    assert_eq!(report.kind, ReportKind::SolvedByPreprocessing);
}

/// Forces the choice through the model oracle.
fn forcing(index: usize) -> Overrides {
    let mut runtimes = vec![10.0; 9];
    runtimes[index] = 1.0;
    Overrides {
        sat_label: Some(false),
        runtimes: Some(runtimes),
    }
}

#[test]
fn executed_sequence_is_warmup_then_chosen_strategy() {
    let b = common::synthetic_bundle(15);
    let f = common::hard_instance(16);
    let config = SolverConfig {
        log_restarts: true,
        ..SolverConfig::default()
    };
    let portfolio = default_portfolio();
    // luby-32, Fixed-512, Geometric-1.5, Nested-1.1
    for index in [0, 2, 6, 7] {
        let (out, report) = lmpick_solve_with(&f, &b, &config, &forcing(index)).unwrap();
        assert_eq!(report.kind, ReportKind::Selected);
        assert_eq!(report.switch_conflict, Some(SELECTION_CONFLICT));
        let chosen = &portfolio.strategies[index];
        assert_eq!(report.selection.as_ref().unwrap().name, chosen.name);
        let log = &out.restart_log;
        assert!(log.len() >= 2);
        assert_eq!((log[0].length, log[0].total_conflicts), (100, 100));
        assert_eq!((log[1].length, log[1].total_conflicts), (2000, 2100));
        let mut total = 2100;
        for (k, e) in log.iter().enumerate().skip(2) {
            let expected = chosen.restart_length(k as u64 - 1);
            total += expected;
            assert_eq!(e.length, expected, "{} restart {}", chosen.name, e.index);
            assert_eq!(e.total_conflicts, total);
        }
        if index == 0 {
            assert!(log.len() > 2, "luby-32 should restart after the switch");
        }
    }
}

#[test]
fn lmpick_is_deterministic() {
    let b = common::synthetic_bundle(17);
    let f = common::hard_instance(18);
    let config = SolverConfig {
        seed: 3,
        ..SolverConfig::default()
    };
    let (o1, r1) = lmpick_solve(&f, &b, &config).unwrap();
    let (o2, r2) = lmpick_solve(&f, &b, &config).unwrap();
    assert_eq!(r1.selection, r2.selection);
    assert_eq!(r1.features, r2.features);
    assert_eq!(o1.status, o2.status);
    assert_eq!(o1.conflicts, o2.conflicts);
}
