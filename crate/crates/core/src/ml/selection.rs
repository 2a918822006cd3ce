use serde::{Deserialize, Serialize};

use super::{
    moments, DesignMatrix, FitError, LambdaChoice, LogisticOptions, LogisticProblem, RidgeOptions,
    RidgeProblem, ScalingParams,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ridge,
    Logistic,
}

#[derive(Debug, Clone)]
pub struct SelectionOptions<F> {
    pub ridge: RidgeOptions<F>,
    pub logistic: LogisticOptions<F>,
    /// Pairs with |r| above this are collinear.
    pub correlation_threshold: F,
}

impl<F: Scalar> Default for SelectionOptions<F> {
    fn default() -> Self {
        SelectionOptions {
            ridge: RidgeOptions::default(),
            logistic: LogisticOptions::default(),
            correlation_threshold: F::of(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult<F> {
    pub mask: Vec<usize>,
    pub aic_before: F,
    pub aic_after: F,
    /// Features removed, in order.
    pub dropped: Vec<usize>,
    /// Penalty held fixed during ridge elimination.
    pub lambda: Option<F>,
}

/// Pearson correlation; zero when either side is constant.
pub fn pearson<F: Scalar>(a: &[F], b: &[F]) -> F {
    let (ma, sa) = moments(a);
    let (mb, sb) = moments(b);
    if !(sa > F::zero()) || !(sb > F::zero()) {
        return F::zero();
    }
    let n = F::of_usize(a.len());
    let cov = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x - ma) * (y - mb))
        .sum::<F>()
        / n;
    (cov / (sa * sb)).max(-F::one()).min(F::one())
}

/// Common interface over the two model kinds: fit a mask, score it, rank
/// its features.
trait Stepper<F> {
    /// Returns (aic, standardized coefficients aligned with `mask`).
    fn evaluate(&mut self, mask: &[usize]) -> Option<(F, Vec<F>)>;
}

struct RidgeStepper<'a, F: Scalar> {
    problem: &'a RidgeProblem<F>,
    lambda: F,
}

impl<F: Scalar> Stepper<F> for RidgeStepper<'_, F> {
    fn evaluate(&mut self, mask: &[usize]) -> Option<(F, Vec<F>)> {
        let fit = self.problem.fit(mask, self.lambda).ok()?;
        Some((
            self.problem.aic(&fit),
            self.problem.standardized_coefficients(&fit),
        ))
    }
}

struct LogisticStepper<'a, F: Scalar> {
    problem: &'a LogisticProblem<F>,
    warm: Option<(Vec<usize>, Vec<F>)>,
}

impl<F: Scalar> Stepper<F> for LogisticStepper<'_, F> {
    fn evaluate(&mut self, mask: &[usize]) -> Option<(F, Vec<F>)> {
        // warm start from the previous fit restricted to this mask
        let warm = self.warm.as_ref().map(|(m, w)| {
            let mut out = vec![w[0]];
            for &j in mask {
                out.push(
                    m.iter()
                        .position(|&x| x == j)
                        .map_or(F::zero(), |p| w[p + 1]),
                );
            }
            out
        });
        let fit = self.problem.fit(mask, warm.as_deref());
        if !fit.log_likelihood.is_finite() {
            return None;
        }
        let coef = self.problem.standardized_coefficients(&fit);
        let aic = self.problem.aic(&fit);
        self.warm = Some((fit.mask, fit.weights));
        Some((aic, coef))
    }
}

fn argmin<F: Scalar>(xs: &[F]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}

fn eliminate<F: Scalar>(
    d: &DesignMatrix<F>,
    start: Vec<usize>,
    threshold: F,
    stepper: &mut dyn Stepper<F>,
) -> Result<(Vec<usize>, F, F, Vec<usize>), FitError> {
    let mut mask = start;
    let (aic_before, mut coef) = stepper.evaluate(&mask).ok_or(FitError::Singular)?;
    let mut aic = aic_before;
    let mut dropped = Vec::new();

    while mask.len() > 1 {
        let victim = argmin(&coef);
        let mut trial = mask.clone();
        trial.remove(victim);
        match stepper.evaluate(&trial) {
            Some((trial_aic, trial_coef)) if trial_aic <= aic => {
                dropped.push(mask[victim]);
                mask = trial;
                aic = trial_aic;
                coef = trial_coef;
            }
            _ => break,
        }
    }
    // the rejected trial may have replaced the warm start; refit the kept mask
    if let Some((a, c)) = stepper.evaluate(&mask) {
        aic = a;
        coef = c;
    }

    let columns: Vec<Vec<F>> = (0..d.features()).map(|j| d.column(j)).collect();
    loop {
        if mask.len() < 2 {
            break;
        }
        let mut worst: Option<(F, usize, usize)> = None;
        for a in 0..mask.len() {
            for b in a + 1..mask.len() {
                let r = pearson(&columns[mask[a]], &columns[mask[b]]).abs();
                if r > threshold && worst.map_or(true, |(w, _, _)| r > w) {
                    worst = Some((r, a, b));
                }
            }
        }
        let Some((_, a, b)) = worst else { break };
        let victim = if coef[b] <= coef[a] { b } else { a };
        dropped.push(mask[victim]);
        mask.remove(victim);
        match stepper.evaluate(&mask) {
            Some((a, c)) => {
                aic = a;
                coef = c;
            }
            None => return Err(FitError::Singular),
        }
    }
    Ok((mask, aic_before, aic, dropped))
}

/// Backward elimination by smallest standardized coefficient while AIC does
/// not increase, followed by removal of collinear features.
pub fn select_features_with<F: Scalar>(
    d: &DesignMatrix<F>,
    kind: ModelKind,
    options: &SelectionOptions<F>,
) -> Result<SelectionResult<F>, FitError> {
    let all = d.all_features();
    if all.len() < 2 {
        return Ok(SelectionResult {
            mask: all,
            aic_before: F::nan(),
            aic_after: F::nan(),
            dropped: Vec::new(),
            lambda: None,
        });
    }
    let mut start = ScalingParams::fit(d).non_constant();
    if start.is_empty() {
        start = vec![0];
    }
    match kind {
        ModelKind::Ridge => {
            let problem = RidgeProblem::new(d, &options.ridge);
            let lambda = match &options.ridge.lambda {
                LambdaChoice::Fixed(l) => *l,
                choice => problem.fit_choice(&start, choice)?.lambda,
            };
            let mut stepper = RidgeStepper {
                problem: &problem,
                lambda,
            };
            let (mask, aic_before, aic_after, dropped) =
                eliminate(d, start, options.correlation_threshold, &mut stepper)?;
            Ok(SelectionResult {
                mask,
                aic_before,
                aic_after,
                dropped,
                lambda: Some(lambda),
            })
        }
        ModelKind::Logistic => {
            let problem = LogisticProblem::new(d, options.logistic.clone())?;
            let mut stepper = LogisticStepper {
                problem: &problem,
                warm: None,
            };
            let (mask, aic_before, aic_after, dropped) =
                eliminate(d, start, options.correlation_threshold, &mut stepper)?;
            Ok(SelectionResult {
                mask,
                aic_before,
                aic_after,
                dropped,
                lambda: None,
            })
        }
    }
}

pub fn select_features<F: Scalar>(
    d: &DesignMatrix<F>,
    kind: ModelKind,
) -> Result<Vec<usize>, FitError> {
    select_features_with(d, kind, &SelectionOptions::default()).map(|r| r.mask)
}
