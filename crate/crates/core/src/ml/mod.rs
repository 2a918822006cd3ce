//! Ridge and logistic regression, AIC-driven backward feature selection
//! with a collinearity pass, and k-fold splitting.

pub mod linalg;
mod logistic;
mod ridge;
mod selection;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use logistic::{
    fit_logistic, fit_logistic_with, predict_proba, sigmoid, LogisticModel, LogisticOptions,
    LogisticProblem,
};
pub use ridge::{
    default_lambda_grid, fit_ridge, fit_ridge_with, predict_ridge, LambdaChoice, RidgeModel,
    RidgeOptions, RidgeProblem,
};
pub use selection::{
    pearson, select_features, select_features_with, ModelKind, SelectionOptions, SelectionResult,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("design matrix has no rows")]
    Empty,
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("{targets} targets for {rows} rows")]
    TargetCount { rows: usize, targets: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("feature name count {names} does not match {features} features")]
    NameCount { names: usize, features: usize },
    #[error("normal equations are singular; use a ridge penalty lambda > 0")]
    Singular,
    #[error("labels must be 0 or 1")]
    NonBinaryLabels,
    #[error("need at least {k} instances for {k}-fold splitting, got {n}")]
    TooFewInstances { n: usize, k: usize },
}

/// Row-major design matrix with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<F> {
    n: usize,
    p: usize,
    data: Vec<F>,
    pub targets: Vec<F>,
    pub feature_names: Vec<String>,
}

impl<F: Scalar> DesignMatrix<F> {
    pub fn new(
        rows: Vec<Vec<F>>,
        targets: Vec<F>,
        feature_names: Vec<String>,
    ) -> Result<DesignMatrix<F>, FitError> {
        if rows.is_empty() {
            return Err(FitError::Empty);
        }
        let p = rows[0].len();
        if targets.len() != rows.len() {
            return Err(FitError::TargetCount {
                rows: rows.len(),
                targets: targets.len(),
            });
        }
        let feature_names = if feature_names.is_empty() {
            (1..=p).map(|i| format!("x{i}")).collect()
        } else {
            feature_names
        };
        if feature_names.len() != p {
            return Err(FitError::NameCount {
                names: feature_names.len(),
                features: p,
            });
        }
        let mut data = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(FitError::RaggedRow {
                    row: i,
                    got: row.len(),
                    expected: p,
                });
            }
            if let Some(col) = row.iter().position(|x| !x.is_finite()) {
                return Err(FitError::NonFinite { row: i, col });
            }
            data.extend_from_slice(row);
        }
        if let Some(row) = targets.iter().position(|x| !x.is_finite()) {
            return Err(FitError::NonFinite { row, col: p });
        }
        Ok(DesignMatrix {
            n: rows.len(),
            p,
            data,
            targets,
            feature_names,
        })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn features(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.p + j]
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn with_targets(&self, targets: Vec<F>) -> Result<DesignMatrix<F>, FitError> {
        if targets.len() != self.n {
            return Err(FitError::TargetCount {
                rows: self.n,
                targets: targets.len(),
            });
        }
        Ok(DesignMatrix {
            targets,
            ..self.clone()
        })
    }

    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix<F> {
        let mut data = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DesignMatrix {
            n: idx.len(),
            p: self.p,
            data,
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn all_features(&self) -> Vec<usize> {
        (0..self.p).collect()
    }
}

/// Per-feature centering and scaling plus target moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams<F> {
    pub mean: Vec<F>,
    pub sd: Vec<F>,
    pub target_mean: F,
    pub target_sd: F,
}

impl<F: Scalar> ScalingParams<F> {
    /// Population moments of every column and of the targets.
    pub fn fit(d: &DesignMatrix<F>) -> ScalingParams<F> {
        let n = F::of_usize(d.rows());
        let mut mean = vec![F::zero(); d.features()];
        let mut sd = vec![F::zero(); d.features()];
        for j in 0..d.features() {
            let m = (0..d.rows()).map(|i| d.get(i, j)).sum::<F>() / n;
            let v = (0..d.rows())
                .map(|i| (d.get(i, j) - m) * (d.get(i, j) - m))
                .sum::<F>()
                / n;
            mean[j] = m;
            sd[j] = v.sqrt();
        }
        let (target_mean, target_sd) = moments(&d.targets);
        ScalingParams {
            mean,
            sd,
            target_mean,
            target_sd,
        }
    }

    /// No centering, unit scale.
    pub fn identity(p: usize) -> ScalingParams<F> {
        ScalingParams {
            mean: vec![F::zero(); p],
            sd: vec![F::one(); p],
            target_mean: F::zero(),
            target_sd: F::one(),
        }
    }

    /// A feature whose spread is negligible relative to its magnitude.
    pub fn is_constant(&self, j: usize) -> bool {
        let scale = self.mean[j].abs().max(F::one());
        !(self.sd[j] > scale * F::of(1e-12))
    }

    pub fn non_constant(&self) -> Vec<usize> {
        (0..self.mean.len())
            .filter(|&j| !self.is_constant(j))
            .collect()
    }

    #[inline]
    pub fn transform(&self, j: usize, x: F) -> F {
        (x - self.mean[j]) / self.sd[j]
    }
}

pub(crate) fn moments<F: Scalar>(xs: &[F]) -> (F, F) {
    if xs.is_empty() {
        return (F::zero(), F::zero());
    }
    let n = F::of_usize(xs.len());
    let m = xs.iter().copied().sum::<F>() / n;
    let v = xs.iter().map(|&x| (x - m) * (x - m)).sum::<F>() / n;
    (m, v.sqrt())
}

/// Akaike information criterion of a least-squares fit with `k` active
/// features plus an intercept. A perfect fit gives negative infinity.
pub fn aic_linear<F: Scalar>(rss: F, n: usize, k: usize) -> F {
    let n_f = F::of_usize(n);
    let penalty = F::of(2.0) * F::of_usize(k + 1);
    if rss <= F::zero() {
        return F::neg_infinity();
    }
    n_f * (rss / n_f).ln() + penalty
}

/// Akaike information criterion from a log-likelihood with `k` active
/// features plus an intercept.
pub fn aic_logistic<F: Scalar>(log_likelihood: F, k: usize) -> F {
    F::of(-2.0) * log_likelihood + F::of(2.0) * F::of_usize(k + 1)
}

/// Models that can score themselves with AIC on a design matrix.
pub trait Aic<F> {
    fn aic(&self, d: &DesignMatrix<F>) -> F;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and cuts it into `k` contiguous folds whose
/// sizes differ by at most one; the larger folds come last.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>, FitError> {
    if k == 0 || n < k {
        return Err(FitError::TooFewInstances { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f >= k - extra);
        let test: Vec<usize> = order[start..start + size].to_vec();
        let train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_matrix_validation() {
        assert_eq!(
            DesignMatrix::<f64>::new(vec![], vec![], vec![]),
            Err(FitError::Empty)
        );
        assert_eq!(
            DesignMatrix::new(vec![vec![1.0, 2.0], vec![1.0]], vec![0.0, 0.0], vec![]),
            Err(FitError::RaggedRow {
                row: 1,
                got: 1,
                expected: 2
            })
        );
        assert_eq!(
            DesignMatrix::new(vec![vec![f64::NAN]], vec![0.0], vec![]),
            Err(FitError::NonFinite { row: 0, col: 0 })
        );
        let d = DesignMatrix::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![1.0, 2.0], vec![])
            .unwrap();
        assert_eq!(d.column(1), vec![2.0, 4.0]);
        assert_eq!(d.select_rows(&[1]).row(0), &[3.0, 4.0]);
    }

    #[test]
    fn aic_identities() {
        let n = 50;
        let a = aic_linear(10.0, n, 3);
        let b = aic_linear(20.0, n, 3);
        assert!(((b - a) - n as f64 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(aic_linear(10.0, n, 4) - a, 2.0);
        assert_eq!(aic_linear(0.0, n, 4), f64::NEG_INFINITY);
        let n = 40;
        let ll = n as f64 * 0.5f64.ln();
        assert_eq!(aic_logistic(ll, 0), -2.0 * n as f64 * 0.5f64.ln() + 2.0);
    }

    #[test]
    fn kfold_partitions() {
        let folds = kfold(100, 10, 7).unwrap();
        assert_eq!(folds.len(), 10);
        let mut seen = vec![0; 100];
        for f in &folds {
            assert_eq!(f.test.len(), 10);
            assert_eq!(f.train.len(), 90);
            for &i in &f.test {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(folds, kfold(100, 10, 7).unwrap());
        assert_ne!(folds, kfold(100, 10, 8).unwrap());
    }

    #[test]
    fn kfold_remainder() {
        let sizes: Vec<usize> = kfold(103, 10, 1)
            .unwrap()
            .iter()
            .map(|f| f.test.len())
            .collect();
        assert_eq!(sizes, vec![10, 10, 10, 10, 10, 10, 10, 11, 11, 11]);
        assert_eq!(
            kfold(9, 10, 1),
            Err(FitError::TooFewInstances { n: 9, k: 10 })
        );
    }

    #[test]
    fn constant_detection() {
        let d = DesignMatrix::new(vec![vec![1.0, 5.0], vec![2.0, 5.0]], vec![0.0, 1.0], vec![])
            .unwrap();
        let s = ScalingParams::fit(&d);
        assert_eq!(s.non_constant(), vec![0]);
    }
}
