use serde::{Deserialize, Serialize};

use super::linalg::solve_spd;
use super::{aic_logistic, moments, Aic, DesignMatrix, FitError, ScalingParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticOptions<F> {
    /// L2 penalty on the non-intercept weights.
    pub penalty: F,
    pub max_iter: usize,
    /// Stop once the ∞-norm of the penalized gradient drops below this.
    pub tol: F,
    pub standardize: bool,
}

impl<F: Scalar> Default for LogisticOptions<F> {
    fn default() -> Self {
        LogisticOptions {
            penalty: F::of(1e-4),
            max_iter: 100,
            tol: F::of(1e-8),
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LogisticModel<F> {
    /// Intercept first, then one weight per entry of `selected`.
    pub weights: Vec<F>,
    pub scaling: ScalingParams<F>,
    pub selected: Vec<usize>,
    pub penalty: F,
    /// False when IRLS hit its iteration cap; the best iterate is kept.
    pub converged: bool,
    pub iterations: usize,
}

/// Logistic function, kept strictly inside (0, 1).
pub fn sigmoid<F: Scalar>(s: F) -> F {
    let p = if s >= F::zero() {
        F::one() / (F::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (F::one() + e)
    };
    p.max(F::epsilon()).min(F::one() - F::epsilon())
}

/// ln(1 + e^x) without overflow.
fn softplus<F: Scalar>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

impl<F: Scalar> LogisticModel<F> {
    pub fn score(&self, x: &[F]) -> F {
        let mut s = self.weights[0];
        for (w, &j) in self.weights[1..].iter().zip(&self.selected) {
            s = s + *w * self.scaling.transform(j, x[j]);
        }
        s
    }

    pub fn predict_proba(&self, x: &[F]) -> F {
        sigmoid(self.score(x))
    }

    pub fn log_likelihood(&self, d: &DesignMatrix<F>) -> F {
        (0..d.rows())
            .map(|i| {
                let s = self.score(d.row(i));
                -(d.targets[i] * softplus(-s) + (F::one() - d.targets[i]) * softplus(s))
            })
            .sum()
    }
}

impl<F: Scalar> Aic<F> for LogisticModel<F> {
    fn aic(&self, d: &DesignMatrix<F>) -> F {
        aic_logistic(self.log_likelihood(d), self.selected.len())
    }
}

pub fn predict_proba<F: Scalar>(m: &LogisticModel<F>, x: &[F]) -> F {
    m.predict_proba(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit<F> {
    pub mask: Vec<usize>,
    pub weights: Vec<F>,
    pub log_likelihood: F,
    pub converged: bool,
    pub iterations: usize,
}

/// Transformed classification data shared by fits over feature subsets.
pub struct LogisticProblem<F> {
    n: usize,
    scaling: ScalingParams<F>,
    cols: Vec<Vec<F>>,
    col_sd: Vec<F>,
    y: Vec<F>,
    options: LogisticOptions<F>,
}

impl<F: Scalar> LogisticProblem<F> {
    pub fn new(
        d: &DesignMatrix<F>,
        options: LogisticOptions<F>,
    ) -> Result<LogisticProblem<F>, FitError> {
        if d.targets.iter().any(|&t| t != F::zero() && t != F::one()) {
            return Err(FitError::NonBinaryLabels);
        }
        let p = d.features();
        let scaling = if options.standardize {
            let mut s = ScalingParams::fit(d);
            for j in 0..p {
                if s.is_constant(j) {
                    s.sd[j] = F::one();
                }
            }
            s
        } else {
            ScalingParams::identity(p)
        };
        let cols: Vec<Vec<F>> = (0..p)
            .map(|j| {
                (0..d.rows())
                    .map(|i| scaling.transform(j, d.get(i, j)))
                    .collect()
            })
            .collect();
        let col_sd = cols.iter().map(|c| moments(c).1).collect();
        Ok(LogisticProblem {
            n: d.rows(),
            scaling,
            cols,
            col_sd,
            y: d.targets.clone(),
            options,
        })
    }

    fn scores(&self, mask: &[usize], w: &[F]) -> Vec<F> {
        let mut s = vec![w[0]; self.n];
        for (wj, &j) in w[1..].iter().zip(mask) {
            for (si, &z) in s.iter_mut().zip(&self.cols[j]) {
                *si = *si + *wj * z;
            }
        }
        s
    }

    /// Unpenalized log-likelihood.
    pub fn log_likelihood(&self, mask: &[usize], w: &[F]) -> F {
        self.scores(mask, w)
            .iter()
            .zip(&self.y)
            .map(|(&s, &y)| -(y * softplus(-s) + (F::one() - y) * softplus(s)))
            .sum()
    }

    /// Penalized log-likelihood, the quantity IRLS maximizes.
    pub fn objective(&self, mask: &[usize], w: &[F]) -> F {
        let half = F::of(0.5);
        self.log_likelihood(mask, w)
            - half * self.options.penalty * w[1..].iter().map(|&x| x * x).sum::<F>()
    }

    /// Gradient of [`objective`](Self::objective).
    pub fn gradient(&self, mask: &[usize], w: &[F]) -> Vec<F> {
        let s = self.scores(mask, w);
        let resid: Vec<F> = s
            .iter()
            .zip(&self.y)
            .map(|(&si, &y)| y - sigmoid_exact(si))
            .collect();
        let mut g = Vec::with_capacity(w.len());
        g.push(resid.iter().copied().sum());
        for (wj, &j) in w[1..].iter().zip(mask) {
            let gj: F = resid.iter().zip(&self.cols[j]).map(|(&r, &z)| r * z).sum();
            g.push(gj - self.options.penalty * *wj);
        }
        g
    }

    /// Newton/IRLS with step halving, optionally warm-started.
    pub fn fit(&self, mask: &[usize], warm: Option<&[F]>) -> LogisticFit<F> {
        let k = mask.len() + 1;
        let mut w: Vec<F> = match warm {
            Some(w0) if w0.len() == k => w0.to_vec(),
            _ => vec![F::zero(); k],
        };
        let mut obj = self.objective(mask, &w);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.options.max_iter {
            let g = self.gradient(mask, &w);
            if g.iter().fold(F::zero(), |m, x| m.max(x.abs())) < self.options.tol {
                converged = true;
                break;
            }
            iterations += 1;
            let s = self.scores(mask, &w);
            let weight: Vec<F> = s
                .iter()
                .map(|&si| {
                    let p = sigmoid_exact(si);
                    p * (F::one() - p)
                })
                .collect();
            let col = |c: usize| -> Option<&Vec<F>> {
                if c == 0 {
                    None
                } else {
                    Some(&self.cols[mask[c - 1]])
                }
            };
            let mut h = vec![F::zero(); k * k];
            for a in 0..k {
                for b in a..k {
                    let v: F = match (col(a), col(b)) {
                        (None, None) => weight.iter().copied().sum(),
                        (None, Some(zb)) | (Some(zb), None) => {
                            weight.iter().zip(zb).map(|(&q, &z)| q * z).sum()
                        }
                        (Some(za), Some(zb)) => weight
                            .iter()
                            .zip(za)
                            .zip(zb)
                            .map(|((&q, &x), &y)| q * x * y)
                            .sum(),
                    };
                    h[a * k + b] = v;
                    h[b * k + a] = v;
                }
            }
            for a in 1..k {
                h[a * k + a] = h[a * k + a] + self.options.penalty;
            }
            let step = match solve_spd(&h, k, &g) {
                Some(step) => step,
                None => {
                    // saturated probabilities: regularize the Newton system
                    for a in 0..k {
                        h[a * k + a] = h[a * k + a] + F::of(1e-8);
                    }
                    match solve_spd(&h, k, &g) {
                        Some(step) => step,
                        None => break,
                    }
                }
            };
            // near the optimum the objective changes by less than its own
            // rounding error, so ties within that noise count as ascent
            let slack = F::of(64.0) * F::epsilon() * obj.abs().max(F::one());
            let mut t = F::one();
            let mut improved = false;
            for _ in 0..40 {
                let cand: Vec<F> = w.iter().zip(&step).map(|(&a, &b)| a + t * b).collect();
                let cand_obj = self.objective(mask, &cand);
                if cand_obj >= obj - slack {
                    w = cand;
                    obj = cand_obj;
                    improved = true;
                    break;
                }
                t = t * F::of(0.5);
            }
            if !improved {
                // no ascent direction left at working precision
                let g = self.gradient(mask, &w);
                converged = g.iter().fold(F::zero(), |m, x| m.max(x.abs())) < self.options.tol;
                break;
            }
        }
        let log_likelihood = self.log_likelihood(mask, &w);
        if !converged {
            log::warn!("logistic regression did not converge after {iterations} iterations");
        }
        LogisticFit {
            mask: mask.to_vec(),
            weights: w,
            log_likelihood,
            converged,
            iterations,
        }
    }

    /// |w_j| · sd(z_j) for every masked feature.
    pub fn standardized_coefficients(&self, fit: &LogisticFit<F>) -> Vec<F> {
        fit.weights[1..]
            .iter()
            .zip(&fit.mask)
            .map(|(w, &j)| w.abs() * self.col_sd[j])
            .collect()
    }

    pub fn aic(&self, fit: &LogisticFit<F>) -> F {
        aic_logistic(fit.log_likelihood, fit.mask.len())
    }

    pub fn to_model(&self, fit: &LogisticFit<F>) -> LogisticModel<F> {
        LogisticModel {
            weights: fit.weights.clone(),
            scaling: self.scaling.clone(),
            selected: fit.mask.clone(),
            penalty: self.options.penalty,
            converged: fit.converged,
            iterations: fit.iterations,
        }
    }
}

/// Unclamped logistic, used inside the optimizer.
fn sigmoid_exact<F: Scalar>(s: F) -> F {
    if s >= F::zero() {
        F::one() / (F::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (F::one() + e)
    }
}

/// Penalized logistic regression on every non-constant feature.
pub fn fit_logistic<F: Scalar>(d: &DesignMatrix<F>) -> Result<LogisticModel<F>, FitError> {
    let mask = ScalingParams::fit(d).non_constant();
    fit_logistic_with(d, &mask, LogisticOptions::default())
}

pub fn fit_logistic_with<F: Scalar>(
    d: &DesignMatrix<F>,
    mask: &[usize],
    options: LogisticOptions<F>,
) -> Result<LogisticModel<F>, FitError> {
    let problem = LogisticProblem::new(d, options)?;
    let fit = problem.fit(mask, None);
    Ok(problem.to_model(&fit))
}
