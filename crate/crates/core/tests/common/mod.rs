//! Oracles and fixtures shared by the integration tests. Nothing here calls
//! into the solver under test.
#![allow(dead_code)]

use lmpick::cnf::{Clause, Formula, Lit};
use lmpick::features::FeatureVector;
use lmpick::picker::{train, TrainingInstance};
use lmpick::{default_portfolio, TrainedBundle};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random k-SAT with distinct variables per clause.
pub fn random_ksat(rng: &mut ChaCha8Rng, n: u32, m: usize, k: usize) -> Formula {
    let clauses = (0..m)
        .map(|_| {
            sample(rng, n as usize, k)
                .into_iter()
                .map(|v| Lit::new(v as u32 + 1, rng.gen_bool(0.5)))
                .collect()
        })
        .collect();
    Formula::new(n, clauses)
}

/// Clause bit masks for brute force: bit v set for variable v+1.
fn masks(clauses: &[Clause]) -> Vec<(u32, u32)> {
    clauses
        .iter()
        .map(|c| {
            let mut pos = 0u32;
            let mut neg = 0u32;
            for l in c {
                if l.is_positive() {
                    pos |= 1 << (l.var() - 1);
                } else {
                    neg |= 1 << (l.var() - 1);
                }
            }
            (pos, neg)
        })
        .collect()
}

pub fn satisfies_bits(m: &[(u32, u32)], a: u32) -> bool {
    m.iter().all(|&(p, n)| (p & a) != 0 || (n & !a) != 0)
}

/// Every satisfying assignment of a formula over at most 20 variables, as
/// bit masks.
pub fn brute_force_models(n: u32, clauses: &[Clause]) -> Vec<u32> {
    assert!(n <= 20);
    let m = masks(clauses);
    (0..(1u32 << n))
        .filter(|&a| satisfies_bits(&m, a))
        .collect()
}

pub fn brute_force_sat(n: u32, clauses: &[Clause]) -> bool {
    assert!(n <= 20);
    let m = masks(clauses);
    (0..(1u32 << n)).any(|a| satisfies_bits(&m, a))
}

/// Plain recursive DPLL with unit propagation; returns a model if one
/// exists.
pub fn dpll(n: u32, clauses: &[Clause]) -> Option<Vec<bool>> {
    let cls: Vec<Vec<i64>> = clauses
        .iter()
        .map(|c| c.iter().map(|l| l.to_dimacs()).collect())
        .collect();
    let mut assign = vec![0i8; n as usize + 1];
    if dpll_rec(&cls, &mut assign) {
        Some((1..=n as usize).map(|v| assign[v] == 1).collect())
    } else {
        None
    }
}

fn lit_val(assign: &[i8], l: i64) -> i8 {
    let v = assign[l.unsigned_abs() as usize];
    if l > 0 {
        v
    } else {
        -v
    }
}

fn dpll_rec(cls: &[Vec<i64>], assign: &mut Vec<i8>) -> bool {
    let mut trail = Vec::new();
    // unit propagation to fixpoint
    loop {
        let mut changed = false;
        for c in cls {
            let mut unassigned = None;
            let mut count = 0;
            let mut sat = false;
            for &l in c {
                match lit_val(assign, l) {
                    1 => {
                        sat = true;
                        break;
                    }
                    0 => {
                        count += 1;
                        unassigned = Some(l);
                    }
                    _ => {}
                }
            }
            if sat {
                continue;
            }
            if count == 0 {
                for v in trail {
                    assign[v] = 0;
                }
                return false;
            }
            if count == 1 {
                let l = unassigned.unwrap();
                let v = l.unsigned_abs() as usize;
                assign[v] = if l > 0 { 1 } else { -1 };
                trail.push(v);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // branch on a variable from the shortest open clause
    let mut best: Option<(usize, i64)> = None;
    for c in cls {
        if c.iter().any(|&l| lit_val(assign, l) == 1) {
            continue;
        }
        let open: Vec<i64> = c
            .iter()
            .copied()
            .filter(|&l| lit_val(assign, l) == 0)
            .collect();
        if best.map_or(true, |(len, _)| open.len() < len) {
            best = Some((open.len(), open[0]));
        }
    }
    let Some((_, l)) = best else { return true };
    let v = l.unsigned_abs() as usize;
    for value in [if l > 0 { 1 } else { -1 }, if l > 0 { -1 } else { 1 }] {
        assign[v] = value;
        if dpll_rec(cls, assign) {
            return true;
        }
    }
    assign[v] = 0;
    for v in trail {
        assign[v] = 0;
    }
    false
}

/// A random instance that survives the 2100-conflict warm-up.
pub fn hard_instance(seed: u64) -> Formula {
    let mut r = rng(seed);
    loop {
        let n = 200;
        let f = random_ksat(&mut r, n, (4.26 * n as f64).round() as usize, 3);
        let m = lmpick::picker::measure(&f, &lmpick::SolverConfig::default()).unwrap();
        if !m.too_easy() {
            return f;
        }
    }
}

/// Synthetic training data over the default portfolio: feature 1 drives
/// satisfiability, strategy `fast` is uniformly twice as fast on sat rows.
pub fn synthetic_data(seed: u64, count: usize, fast: usize) -> Vec<TrainingInstance> {
    let mut r = rng(seed);
    let k = default_portfolio().len();
    (0..count)
        .map(|i| {
            let values: Vec<f64> = (0..60).map(|_| r.gen_range(-1.0..1.0)).collect();
            let sat = values[0] + 0.2 * r.gen_range(-1.0..1.0) > 0.0;
            let base = 5.0 + 3.0 * values[1] + r.gen_range(0.0..0.5);
            let runtimes = (0..k)
                .map(|s| {
                    let t = base * (1.0 + 0.1 * s as f64);
                    if sat && s == fast {
                        t / 2.0 / (1.0 + 0.1 * s as f64)
                    } else {
                        t
                    }
                })
                .collect();
            TrainingInstance {
                name: format!("syn-{i}"),
                features: FeatureVector::from_vec(values).unwrap(),
                sat_label: sat,
                runtimes,
            }
        })
        .collect()
}

pub fn synthetic_bundle(seed: u64) -> TrainedBundle {
    train(&synthetic_data(seed, 80, 3), &default_portfolio()).unwrap()
}

/// Least squares by Householder QR on a row-major n×p matrix (n ≥ p, full
/// column rank).
pub fn householder_lstsq(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = a.len();
    let p = a[0].len();
    let mut r: Vec<Vec<f64>> = a.to_vec();
    let mut b = y.to_vec();
    for k in 0..p {
        let norm = (k..n).map(|i| r[i][k] * r[i][k]).sum::<f64>().sqrt();
        let alpha = if r[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| r[i][k]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..p {
            let s: f64 = (k..n).map(|i| v[i - k] * r[i][j]).sum::<f64>() * 2.0 / vv;
            for i in k..n {
                r[i][j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..n).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vv;
        for i in k..n {
            b[i] -= s * v[i - k];
        }
    }
    let mut x = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| r[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / r[k][k];
    }
    x
}

/// Rows of unit-variance uniform noise.
pub fn uniform_rows(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    let h = 3f64.sqrt();
    (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(-h..h)).collect())
        .collect()
}
