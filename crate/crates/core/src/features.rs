//! The 60-entry instance feature vector.
//!
//! Layout (1-based, as in the exported CSV header `f1..f60`):
//!
//! * 1–2: variables and clauses of the original formula, unnormalized.
//! * 3–25: structural statistics of the preprocessed clause database.
//! * 26–37: observation-window statistics (backjump size, search depth,
//!   log2 of the weighted backtrack estimate), each as mean / variation
//!   coefficient / min / max.
//! * 38–60: the 3–25 block recomputed on the level-0 clause database,
//!   learnt clauses included, when the window closes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{preprocess, Clause, Formula, PreprocessResult, PreprocessStatus};
use crate::scalar::Scalar;
use crate::solver::{Solver, WindowStats};

pub const NUM_FEATURES: usize = 60;
pub const SET_I_LEN: usize = 2;
pub const SET_II_LEN: usize = 23;
pub const SET_III_LEN: usize = 12;
pub const SET_IV_LEN: usize = 23;

/// Frozen feature-name table, index `i` holds feature `i + 1`.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "orig_num_vars",
    "orig_num_clauses",
    "pre_num_vars",
    "pre_num_clauses",
    "pre_vars_clauses_ratio",
    "pre_binary_clauses",
    "pre_ternary_clauses",
    "pre_horn_clauses",
    "pre_vcg_var_degree_mean",
    "pre_vcg_var_degree_cv",
    "pre_vcg_var_degree_min",
    "pre_vcg_var_degree_max",
    "pre_vcg_clause_degree_mean",
    "pre_vcg_clause_degree_cv",
    "pre_vcg_clause_degree_min",
    "pre_vcg_clause_degree_max",
    "pre_horn_occurrences_mean",
    "pre_horn_occurrences_cv",
    "pre_horn_occurrences_min",
    "pre_horn_occurrences_max",
    "pre_pos_neg_ratio_mean",
    "pre_pos_neg_ratio_cv",
    "pre_pos_neg_ratio_min",
    "pre_pos_neg_ratio_max",
    "pre_assigned_vars",
    "win_backjump_mean",
    "win_backjump_cv",
    "win_backjump_min",
    "win_backjump_max",
    "win_depth_mean",
    "win_depth_cv",
    "win_depth_min",
    "win_depth_max",
    "win_log_wbe_mean",
    "win_log_wbe_cv",
    "win_log_wbe_min",
    "win_log_wbe_max",
    "post_num_vars",
    "post_num_clauses",
    "post_vars_clauses_ratio",
    "post_binary_clauses",
    "post_ternary_clauses",
    "post_horn_clauses",
    "post_vcg_var_degree_mean",
    "post_vcg_var_degree_cv",
    "post_vcg_var_degree_min",
    "post_vcg_var_degree_max",
    "post_vcg_clause_degree_mean",
    "post_vcg_clause_degree_cv",
    "post_vcg_clause_degree_min",
    "post_vcg_clause_degree_max",
    "post_horn_occurrences_mean",
    "post_horn_occurrences_cv",
    "post_horn_occurrences_min",
    "post_horn_occurrences_max",
    "post_pos_neg_ratio_mean",
    "post_pos_neg_ratio_cv",
    "post_pos_neg_ratio_min",
    "post_pos_neg_ratio_max",
    "post_assigned_vars",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("observation window is empty")]
    EmptyWindow,
    #[error("feature block {block} has length {got}, expected {expected}")]
    Length {
        block: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("formula was proven unsatisfiable by preprocessing")]
    ProvenUnsat,
}

/// Mean, variation coefficient (population standard deviation over
/// |mean|), min and max of a sample. Empty samples give all zeros.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StatQuad<F = f64> {
    pub mean: F,
    pub variation_coefficient: F,
    pub min: F,
    pub max: F,
}

impl<F: Scalar> StatQuad<F> {
    pub fn from_samples(samples: &[F]) -> StatQuad<F> {
        if samples.is_empty() {
            return StatQuad {
                mean: F::zero(),
                variation_coefficient: F::zero(),
                min: F::zero(),
                max: F::zero(),
            };
        }
        let n = F::of_usize(samples.len());
        let mean = samples.iter().copied().sum::<F>() / n;
        let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / n;
        let sd = var.sqrt();
        let variation_coefficient = if mean == F::zero() || sd == F::zero() {
            F::zero()
        } else {
            sd / mean.abs()
        };
        let min = samples.iter().copied().fold(F::infinity(), F::min);
        let max = samples.iter().copied().fold(F::neg_infinity(), F::max);
        // the computed mean can drift outside [min, max] by an ulp
        let mean = mean.max(min).min(max);
        StatQuad {
            mean,
            variation_coefficient,
            min,
            max,
        }
    }

    pub fn to_array(self) -> [F; 4] {
        [self.mean, self.variation_coefficient, self.min, self.max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn zeros() -> FeatureVector {
        FeatureVector {
            values: vec![0.0; NUM_FEATURES],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Result<FeatureVector, FeatureError> {
        if values.len() != NUM_FEATURES {
            return Err(FeatureError::Length {
                block: "all",
                got: values.len(),
                expected: NUM_FEATURES,
            });
        }
        Ok(FeatureVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Feature by 1-based index.
    pub fn get(&self, index: usize) -> f64 {
        self.values[index - 1]
    }

    pub fn set_i(&self) -> &[f64] {
        &self.values[..SET_I_LEN]
    }

    pub fn set_ii(&self) -> &[f64] {
        &self.values[SET_I_LEN..SET_I_LEN + SET_II_LEN]
    }

    pub fn set_iii(&self) -> &[f64] {
        &self.values[SET_I_LEN + SET_II_LEN..SET_I_LEN + SET_II_LEN + SET_III_LEN]
    }

    pub fn set_iv(&self) -> &[f64] {
        &self.values[NUM_FEATURES - SET_IV_LEN..]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Raw (unnormalized) structural statistics of a clause database.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructuralCounts {
    pub num_vars: usize,
    pub num_clauses: usize,
    pub binary: usize,
    pub ternary: usize,
    pub horn: usize,
    /// Occurrence count of every variable that occurs at least once.
    pub var_degrees: Vec<f64>,
    pub clause_degrees: Vec<f64>,
    /// Horn-clause occurrence count of every occurring variable.
    pub horn_occurrences: Vec<f64>,
    /// pos / (pos + neg) of every occurring variable.
    pub positive_ratios: Vec<f64>,
}

impl StructuralCounts {
    pub fn of(num_vars: u32, clauses: &[Clause]) -> StructuralCounts {
        let n = num_vars as usize;
        let mut pos = vec![0usize; n];
        let mut neg = vec![0usize; n];
        let mut horn_occ = vec![0usize; n];
        let mut counts = StructuralCounts {
            num_clauses: clauses.len(),
            ..Default::default()
        };
        for clause in clauses {
            match clause.len() {
                2 => counts.binary += 1,
                3 => counts.ternary += 1,
                _ => {}
            }
            let positives = clause.iter().filter(|l| l.is_positive()).count();
            let is_horn = positives <= 1;
            if is_horn {
                counts.horn += 1;
            }
            for l in clause {
                let v = l.var_index();
                if l.is_positive() {
                    pos[v] += 1;
                } else {
                    neg[v] += 1;
                }
                if is_horn {
                    horn_occ[v] += 1;
                }
            }
            counts.clause_degrees.push(clause.len() as f64);
        }
        for v in 0..n {
            let degree = pos[v] + neg[v];
            if degree == 0 {
                continue;
            }
            counts.num_vars += 1;
            counts.var_degrees.push(degree as f64);
            counts.horn_occurrences.push(horn_occ[v] as f64);
            counts.positive_ratios.push(pos[v] as f64 / degree as f64);
        }
        counts
    }
}

/// The 23-entry structural block (features 3–25 / 38–60) of a clause
/// database. `total_vars` is the variable count of the original formula
/// and `assigned` the number of variables fixed at the top level.
///
/// Normalization: binary/ternary/Horn counts are fractions of the clause
/// count; variable degrees and Horn occurrences are divided by the clause
/// count; clause degrees by the number of occurring variables; the
/// assigned count by `total_vars`. Variable and clause counts stay raw.
pub fn structural_features_of(
    total_vars: u32,
    clauses: &[Clause],
    assigned: usize,
) -> [f64; SET_II_LEN] {
    let c = StructuralCounts::of(total_vars, clauses);
    let m = c.num_clauses as f64;
    let nv = c.num_vars as f64;
    let frac = |x: usize| {
        if c.num_clauses == 0 {
            0.0
        } else {
            x as f64 / m
        }
    };
    let scaled = |xs: &[f64], by: f64| -> StatQuad<f64> {
        if by == 0.0 {
            StatQuad::from_samples(&[])
        } else {
            StatQuad::from_samples(&xs.iter().map(|x| x / by).collect::<Vec<_>>())
        }
    };

    let mut out = [0.0; SET_II_LEN];
    out[0] = nv;
    out[1] = m;
    out[2] = if c.num_clauses == 0 { 0.0 } else { nv / m };
    out[3] = frac(c.binary);
    out[4] = frac(c.ternary);
    out[5] = frac(c.horn);
    out[6..10].copy_from_slice(&scaled(&c.var_degrees, m).to_array());
    out[10..14].copy_from_slice(&scaled(&c.clause_degrees, nv).to_array());
    out[14..18].copy_from_slice(&scaled(&c.horn_occurrences, m).to_array());
    out[18..22].copy_from_slice(&StatQuad::from_samples(&c.positive_ratios).to_array());
    out[22] = if total_vars == 0 {
        0.0
    } else {
        assigned as f64 / total_vars as f64
    };
    out
}

/// Features 3–25 of a preprocessed formula.
pub fn structural_features(p: &PreprocessResult) -> Result<[f64; SET_II_LEN], FeatureError> {
    if p.status == PreprocessStatus::ProvenUnsat {
        return Err(FeatureError::ProvenUnsat);
    }
    Ok(structural_features_of(
        p.formula.num_vars,
        &p.formula.clauses,
        p.fixed.len(),
    ))
}

/// Features 1–2.
pub fn original_features(f: &Formula) -> [f64; SET_I_LEN] {
    [f.num_vars as f64, f.clauses.len() as f64]
}

/// Features 26–37.
pub fn window_features(w: &WindowStats) -> Result<[f64; SET_III_LEN], FeatureError> {
    if w.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    let mut out = [0.0; SET_III_LEN];
    out[0..4].copy_from_slice(&StatQuad::from_samples(&w.backjump_sizes).to_array());
    out[4..8].copy_from_slice(&StatQuad::from_samples(&w.depths).to_array());
    out[8..12].copy_from_slice(&StatQuad::from_samples(&w.log_wbe).to_array());
    Ok(out)
}

/// Features 38–60 from a paused solver: the problem and learnt clauses,
/// reduced under the level-0 assignment.
pub fn post_window_features(solver: &Solver) -> [f64; SET_IV_LEN] {
    let snapshot = solver.level0_snapshot();
    let reduced = preprocess(&snapshot);
    let total_vars = solver.num_vars() as u32;
    match reduced.status {
        PreprocessStatus::Reduced => {
            let assigned = solver.fixed().len() + reduced.fixed.len();
            structural_features_of(total_vars, &reduced.formula.clauses, assigned)
        }
        // level-0 refutation pending propagation; the whole space is decided
        PreprocessStatus::ProvenUnsat => {
            structural_features_of(total_vars, &[], total_vars as usize)
        }
    }
}

pub fn assemble(
    set_i: &[f64],
    set_ii: &[f64],
    set_iii: &[f64],
    set_iv: &[f64],
) -> Result<FeatureVector, FeatureError> {
    let check = |block: &'static str, got: usize, expected: usize| {
        if got == expected {
            Ok(())
        } else {
            Err(FeatureError::Length {
                block,
                got,
                expected,
            })
        }
    };
    check("set I", set_i.len(), SET_I_LEN)?;
    check("set II", set_ii.len(), SET_II_LEN)?;
    check("set III", set_iii.len(), SET_III_LEN)?;
    check("set IV", set_iv.len(), SET_IV_LEN)?;
    let mut values = Vec::with_capacity(NUM_FEATURES);
    values.extend_from_slice(set_i);
    values.extend_from_slice(set_ii);
    values.extend_from_slice(set_iii);
    values.extend_from_slice(set_iv);
    Ok(FeatureVector { values })
}

/// CSV column names `f1..f60`.
pub fn csv_columns() -> Vec<String> {
    (1..=NUM_FEATURES).map(|i| format!("f{i}")).collect()
}
