use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, cholesky_solve};
use super::{aic_linear, moments, Aic, DesignMatrix, FitError, ScalingParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaChoice<F> {
    Fixed(F),
    /// Pick the grid value minimizing generalized cross-validation error.
    Gcv(Vec<F>),
}

/// 1e-6, 1e-5, ..., 1e2.
pub fn default_lambda_grid<F: Scalar>() -> Vec<F> {
    (-6..=2).map(|e| F::of(10f64.powi(e))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeOptions<F> {
    pub lambda: LambdaChoice<F>,
    /// Scale every feature to unit variance before fitting.
    pub standardize: bool,
    /// Fit an unpenalized intercept (features and target are centered).
    pub intercept: bool,
    /// Clamp predictions below at zero.
    pub clamp_nonnegative: bool,
}

impl<F: Scalar> Default for RidgeOptions<F> {
    fn default() -> Self {
        RidgeOptions {
            lambda: LambdaChoice::Gcv(default_lambda_grid()),
            standardize: true,
            intercept: true,
            clamp_nonnegative: true,
        }
    }
}

impl<F: Scalar> RidgeOptions<F> {
    pub fn fixed(lambda: F) -> RidgeOptions<F> {
        RidgeOptions {
            lambda: LambdaChoice::Fixed(lambda),
            ..RidgeOptions::default()
        }
    }

    /// No standardization, no intercept, no clamping.
    pub fn raw(lambda: F) -> RidgeOptions<F> {
        RidgeOptions {
            lambda: LambdaChoice::Fixed(lambda),
            standardize: false,
            intercept: false,
            clamp_nonnegative: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RidgeModel<F> {
    /// Intercept first, then one weight per entry of `selected`, in the
    /// transformed feature space.
    pub weights: Vec<F>,
    pub lambda: F,
    /// The centering and scaling applied to inputs.
    pub scaling: ScalingParams<F>,
    /// Indices into the full feature vector.
    pub selected: Vec<usize>,
    pub clamp_nonnegative: bool,
}

impl<F: Scalar> RidgeModel<F> {
    pub fn predict_unclamped(&self, x: &[F]) -> F {
        let mut y = self.weights[0];
        for (w, &j) in self.weights[1..].iter().zip(&self.selected) {
            y = y + *w * self.scaling.transform(j, x[j]);
        }
        y
    }

    pub fn predict(&self, x: &[F]) -> F {
        let y = self.predict_unclamped(x);
        if self.clamp_nonnegative {
            y.max(F::zero())
        } else {
            y
        }
    }

    pub fn rss(&self, d: &DesignMatrix<F>) -> F {
        (0..d.rows())
            .map(|i| {
                let r = d.targets[i] - self.predict_unclamped(d.row(i));
                r * r
            })
            .sum()
    }

    /// Coefficients expressed on the raw input scale (intercept first).
    pub fn raw_coefficients(&self) -> Vec<F> {
        let mut out = vec![self.weights[0]];
        let mut intercept = self.weights[0];
        for (w, &j) in self.weights[1..].iter().zip(&self.selected) {
            let c = *w / self.scaling.sd[j];
            intercept = intercept - c * self.scaling.mean[j];
            out.push(c);
        }
        out[0] = intercept;
        out
    }
}

impl<F: Scalar> Aic<F> for RidgeModel<F> {
    fn aic(&self, d: &DesignMatrix<F>) -> F {
        aic_linear(self.rss(d), d.rows(), self.selected.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit<F> {
    pub mask: Vec<usize>,
    pub beta: Vec<F>,
    pub lambda: F,
    pub rss: F,
}

/// Transformed design data shared by every fit over subsets of the
/// features; the Gram matrix is computed once.
pub struct RidgeProblem<F> {
    n: usize,
    p: usize,
    scaling: ScalingParams<F>,
    /// Transformed columns.
    cols: Vec<Vec<F>>,
    /// Centered targets when fitting an intercept.
    y: Vec<F>,
    y_offset: F,
    target_sd: F,
    col_sd: Vec<F>,
    gram: Vec<F>,
    zty: Vec<F>,
    intercept: bool,
    clamp_nonnegative: bool,
}

impl<F: Scalar> RidgeProblem<F> {
    pub fn new(d: &DesignMatrix<F>, options: &RidgeOptions<F>) -> RidgeProblem<F> {
        let p = d.features();
        let n = d.rows();
        let fitted = ScalingParams::fit(d);
        let mut scaling = ScalingParams::identity(p);
        for j in 0..p {
            if options.intercept {
                scaling.mean[j] = fitted.mean[j];
            }
            if options.standardize && !fitted.is_constant(j) {
                scaling.sd[j] = fitted.sd[j];
            }
        }
        scaling.target_mean = fitted.target_mean;
        scaling.target_sd = fitted.target_sd;

        let cols: Vec<Vec<F>> = (0..p)
            .map(|j| (0..n).map(|i| scaling.transform(j, d.get(i, j))).collect())
            .collect();
        let y_offset = if options.intercept {
            fitted.target_mean
        } else {
            F::zero()
        };
        let y: Vec<F> = d.targets.iter().map(|&t| t - y_offset).collect();
        let col_sd = cols.iter().map(|c| moments(c).1).collect();
        let mut gram = vec![F::zero(); p * p];
        for a in 0..p {
            for b in a..p {
                let s: F = cols[a].iter().zip(&cols[b]).map(|(&u, &v)| u * v).sum();
                gram[a * p + b] = s;
                gram[b * p + a] = s;
            }
        }
        let zty = cols
            .iter()
            .map(|c| c.iter().zip(&y).map(|(&u, &v)| u * v).sum())
            .collect();
        RidgeProblem {
            n,
            p,
            scaling,
            cols,
            y,
            y_offset,
            target_sd: fitted.target_sd,
            col_sd,
            gram,
            zty,
            intercept: options.intercept,
            clamp_nonnegative: options.clamp_nonnegative,
        }
    }

    pub fn num_features(&self) -> usize {
        self.p
    }

    pub fn scaling(&self) -> &ScalingParams<F> {
        &self.scaling
    }

    fn penalized_gram(&self, mask: &[usize], lambda: F) -> Vec<F> {
        let k = mask.len();
        let mut a = vec![F::zero(); k * k];
        for (r, &i) in mask.iter().enumerate() {
            for (c, &j) in mask.iter().enumerate() {
                a[r * k + c] = self.gram[i * self.p + j];
            }
            a[r * k + r] = a[r * k + r] + lambda;
        }
        a
    }

    fn residual_ss(&self, mask: &[usize], beta: &[F]) -> F {
        (0..self.n)
            .map(|i| {
                let mut r = self.y[i];
                for (b, &j) in beta.iter().zip(mask) {
                    r = r - *b * self.cols[j][i];
                }
                r * r
            })
            .sum()
    }

    pub fn fit(&self, mask: &[usize], lambda: F) -> Result<RidgeFit<F>, FitError> {
        let k = mask.len();
        let beta = if k == 0 {
            Vec::new()
        } else {
            let mut a = self.penalized_gram(mask, lambda);
            if !cholesky(&mut a, k) {
                return Err(FitError::Singular);
            }
            let b: Vec<F> = mask.iter().map(|&j| self.zty[j]).collect();
            cholesky_solve(&a, k, &b)
        };
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(FitError::Singular);
        }
        let rss = self.residual_ss(mask, &beta);
        Ok(RidgeFit {
            mask: mask.to_vec(),
            beta,
            lambda,
            rss,
        })
    }

    /// Generalized cross-validation score n·RSS / (n - df)², where df is
    /// the trace of the hat matrix plus one for a fitted intercept.
    pub fn gcv(&self, mask: &[usize], lambda: F) -> Option<(F, RidgeFit<F>)> {
        let fit = self.fit(mask, lambda).ok()?;
        let k = mask.len();
        let mut df = F::zero();
        if k > 0 {
            let mut l = self.penalized_gram(mask, lambda);
            if !cholesky(&mut l, k) {
                return None;
            }
            // trace((G + λI)^-1 G)
            for (c, &j) in mask.iter().enumerate() {
                let col: Vec<F> = mask.iter().map(|&i| self.gram[i * self.p + j]).collect();
                df = df + cholesky_solve(&l, k, &col)[c];
            }
        }
        if self.intercept {
            df = df + F::one();
        }
        let n = F::of_usize(self.n);
        let denom = n - df;
        if !(denom > F::zero()) {
            return None;
        }
        Some((n * fit.rss / (denom * denom), fit))
    }

    pub fn fit_choice(
        &self,
        mask: &[usize],
        choice: &LambdaChoice<F>,
    ) -> Result<RidgeFit<F>, FitError> {
        match choice {
            LambdaChoice::Fixed(l) => self.fit(mask, *l),
            LambdaChoice::Gcv(grid) => {
                let mut best: Option<(F, RidgeFit<F>)> = None;
                for &l in grid {
                    if let Some((score, fit)) = self.gcv(mask, l) {
                        if best.as_ref().map_or(true, |(s, _)| score < *s) {
                            best = Some((score, fit));
                        }
                    }
                }
                match best {
                    Some((_, fit)) => Ok(fit),
                    // too few rows for GCV; fall back to the largest penalty
                    None => self.fit(mask, grid.iter().copied().fold(F::zero(), F::max)),
                }
            }
        }
    }

    /// |β_j| · sd(z_j) / sd(y) for every masked feature.
    pub fn standardized_coefficients(&self, fit: &RidgeFit<F>) -> Vec<F> {
        let sy = if self.target_sd > F::zero() {
            self.target_sd
        } else {
            F::one()
        };
        fit.beta
            .iter()
            .zip(&fit.mask)
            .map(|(b, &j)| b.abs() * self.col_sd[j] / sy)
            .collect()
    }

    pub fn aic(&self, fit: &RidgeFit<F>) -> F {
        aic_linear(fit.rss, self.n, fit.mask.len())
    }

    pub fn to_model(&self, fit: &RidgeFit<F>) -> RidgeModel<F> {
        let mut weights = Vec::with_capacity(fit.beta.len() + 1);
        weights.push(self.y_offset);
        weights.extend_from_slice(&fit.beta);
        RidgeModel {
            weights,
            lambda: fit.lambda,
            scaling: self.scaling.clone(),
            selected: fit.mask.clone(),
            clamp_nonnegative: self.clamp_nonnegative,
        }
    }
}

/// Standardized ridge fit with an unpenalized intercept over every
/// non-constant feature, at a fixed penalty.
pub fn fit_ridge<F: Scalar>(d: &DesignMatrix<F>, lambda: F) -> Result<RidgeModel<F>, FitError> {
    let mask = ScalingParams::fit(d).non_constant();
    fit_ridge_with(d, &mask, &RidgeOptions::fixed(lambda))
}

pub fn fit_ridge_with<F: Scalar>(
    d: &DesignMatrix<F>,
    mask: &[usize],
    options: &RidgeOptions<F>,
) -> Result<RidgeModel<F>, FitError> {
    let problem = RidgeProblem::new(d, options);
    let fit = problem.fit_choice(mask, &options.lambda)?;
    Ok(problem.to_model(&fit))
}

pub fn predict_ridge<F: Scalar>(m: &RidgeModel<F>, x: &[F]) -> F {
    m.predict(x)
}
