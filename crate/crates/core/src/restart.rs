//! Universal restart strategies expressed as sequences of conflict budgets,
//! and the fixed nine-strategy portfolio.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest restart length ever emitted.
const MAX_LENGTH: u64 = 1 << 62;

/// A restart-length generator consumed by the solver.
pub type Schedule = Box<dyn Iterator<Item = u64> + Send>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum StrategyKind {
    Fixed { size: u64 },
    Luby { unit: u64 },
    Geometric { init: u64, factor: f64 },
    Nested { inner: u64, outer: u64, factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartStrategy {
    pub name: String,
    pub kind: StrategyKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("restart lengths must be at least 1")]
    ZeroLength,
    #[error("geometric factor must be > 1, got {0}")]
    BadFactor(f64),
    #[error("nested inner length {inner} exceeds outer bound {outer}")]
    InnerExceedsOuter { inner: u64, outer: u64 },
    #[error("unknown restart strategy `{0}`")]
    UnknownName(String),
}

/// The `i`-th term (1-based) of the Luby sequence 1,1,2,1,1,2,4,...
pub fn luby_core(i: u64) -> u64 {
    assert!(i >= 1, "luby index is 1-based");
    let mut i = i;
    loop {
        // smallest k with i <= 2^k - 1
        let k = 64 - i.leading_zeros();
        if k < 64 && i == (1u64 << k) - 1 {
            return 1 << (k - 1);
        }
        if k == 64 && i == u64::MAX {
            return 1 << 63;
        }
        i = i - (1u64 << (k - 1)) + 1;
    }
}

fn emit(x: f64) -> u64 {
    if !(x < MAX_LENGTH as f64) {
        MAX_LENGTH
    } else {
        (x.floor() as u64).max(1)
    }
}

impl RestartStrategy {
    pub fn new(
        name: impl Into<String>,
        kind: StrategyKind,
    ) -> Result<RestartStrategy, StrategyError> {
        let s = RestartStrategy {
            name: name.into(),
            kind,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn fixed(size: u64) -> RestartStrategy {
        RestartStrategy {
            name: format!("Fixed-{size}"),
            kind: StrategyKind::Fixed { size },
        }
    }

    pub fn luby(unit: u64) -> RestartStrategy {
        RestartStrategy {
            name: format!("luby-{unit}"),
            kind: StrategyKind::Luby { unit },
        }
    }

    pub fn geometric(init: u64, factor: f64) -> RestartStrategy {
        RestartStrategy {
            name: format!("Geometric-{factor}"),
            kind: StrategyKind::Geometric { init, factor },
        }
    }

    pub fn nested(inner: u64, outer: u64, factor: f64) -> RestartStrategy {
        RestartStrategy {
            name: format!("Nested-{factor}"),
            kind: StrategyKind::Nested {
                inner,
                outer,
                factor,
            },
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let factor_ok = |f: f64| {
            if f > 1.0 && f.is_finite() {
                Ok(())
            } else {
                Err(StrategyError::BadFactor(f))
            }
        };
        match self.kind {
            StrategyKind::Fixed { size } if size == 0 => Err(StrategyError::ZeroLength),
            StrategyKind::Luby { unit } if unit == 0 => Err(StrategyError::ZeroLength),
            StrategyKind::Geometric { init, factor } => {
                if init == 0 {
                    return Err(StrategyError::ZeroLength);
                }
                factor_ok(factor)
            }
            StrategyKind::Nested {
                inner,
                outer,
                factor,
            } => {
                if inner == 0 || outer == 0 {
                    return Err(StrategyError::ZeroLength);
                }
                if inner > outer {
                    return Err(StrategyError::InnerExceedsOuter { inner, outer });
                }
                factor_ok(factor)
            }
            _ => Ok(()),
        }
    }

    /// Iterator over t1, t2, ...
    pub fn lengths(&self) -> RestartLengths {
        RestartLengths {
            kind: self.kind,
            index: 0,
            inner_step: 0,
            outer_step: 0,
        }
    }

    pub fn schedule(&self) -> Schedule {
        Box::new(self.lengths())
    }

    /// Length of restart `i` (1-based). Nested strategies are stateful, so
    /// this walks the sequence and costs O(i) for them.
    pub fn restart_length(&self, i: u64) -> u64 {
        assert!(i >= 1, "restart index is 1-based");
        match self.kind {
            StrategyKind::Fixed { size } => size,
            StrategyKind::Luby { unit } => unit.saturating_mul(luby_core(i)).min(MAX_LENGTH),
            StrategyKind::Geometric { init, factor } => {
                emit(init as f64 * factor.powi((i - 1) as i32))
            }
            StrategyKind::Nested { .. } => self.lengths().nth((i - 1) as usize).unwrap(),
        }
    }
}

impl fmt::Display for RestartStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Infinite restart-length sequence for one strategy.
#[derive(Debug, Clone)]
pub struct RestartLengths {
    kind: StrategyKind,
    index: u64,
    // Nested: current length is inner * factor^inner_step, bound is
    // outer * factor^outer_step. Exponents are tracked instead of running
    // products so no rounding accumulates.
    inner_step: i32,
    outer_step: i32,
}

impl Iterator for RestartLengths {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        self.index += 1;
        let len = match self.kind {
            StrategyKind::Fixed { size } => size,
            StrategyKind::Luby { unit } => {
                unit.saturating_mul(luby_core(self.index)).min(MAX_LENGTH)
            }
            StrategyKind::Geometric { init, factor } => {
                emit(init as f64 * factor.powi((self.index - 1).min(i32::MAX as u64) as i32))
            }
            StrategyKind::Nested {
                inner,
                outer,
                factor,
            } => {
                let current = inner as f64 * factor.powi(self.inner_step);
                let candidate = inner as f64 * factor.powi(self.inner_step + 1);
                let bound = outer as f64 * factor.powi(self.outer_step);
                if candidate > bound {
                    self.inner_step = 0;
                    self.outer_step = self.outer_step.saturating_add(1);
                } else {
                    self.inner_step += 1;
                }
                emit(current)
            }
        };
        Some(len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub strategies: Vec<RestartStrategy>,
}

impl Default for Portfolio {
    fn default() -> Self {
        default_portfolio()
    }
}

impl Portfolio {
    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.strategies.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.strategies.iter().position(|s| s.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&RestartStrategy> {
        self.strategies.iter().find(|s| s.name == name)
    }

    /// Picks a sub-portfolio of the default nine by name, in the given order.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Portfolio, StrategyError> {
        let all = default_portfolio();
        let strategies = names
            .iter()
            .map(|n| {
                all.get(n.as_ref())
                    .cloned()
                    .ok_or_else(|| StrategyError::UnknownName(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Portfolio { strategies })
    }
}

/// luby-32, luby-512, Fixed-512, Fixed-4096, Fixed-16384, Geometric-1.1
/// (first restart 32), Geometric-1.5 (first restart 100), Nested-1.1 and
/// Nested-1.5 (inner 100, outer 1000). Order is the tie-break order.
pub fn default_portfolio() -> Portfolio {
    Portfolio {
        strategies: vec![
            RestartStrategy::luby(32),
            RestartStrategy::luby(512),
            RestartStrategy::fixed(512),
            RestartStrategy::fixed(4096),
            RestartStrategy::fixed(16384),
            RestartStrategy::geometric(32, 1.1),
            RestartStrategy::geometric(100, 1.5),
            RestartStrategy::nested(100, 1000, 1.1),
            RestartStrategy::nested(100, 1000, 1.5),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luby_prefix() {
        let got: Vec<u64> = (1..=17).map(luby_core).collect();
        assert_eq!(got, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8, 1, 1]);
        assert_eq!(luby_core(7), 4);
        assert_eq!(luby_core((1 << 20) - 1), 1 << 19);
        assert_eq!(luby_core(u64::MAX), 1 << 63);
    }

    #[test]
    fn strategy_examples() {
        let luby: Vec<u64> = RestartStrategy::luby(32).lengths().take(3).collect();
        assert_eq!(luby, vec![32, 32, 64]);
        let geo: Vec<u64> = RestartStrategy::geometric(100, 1.5)
            .lengths()
            .take(4)
            .collect();
        assert_eq!(geo, vec![100, 150, 225, 337]);
        let nested: Vec<u64> = RestartStrategy::nested(100, 150, 1.2)
            .lengths()
            .take(9)
            .collect();
        // bound 150 -> 180 -> 216
        assert_eq!(nested, vec![100, 120, 144, 100, 120, 144, 172, 100, 120]);
        let fixed: Vec<u64> = RestartStrategy::fixed(512).lengths().take(3).collect();
        assert_eq!(fixed, vec![512; 3]);
    }

    #[test]
    fn restart_length_matches_iterator() {
        for s in default_portfolio().strategies {
            let seq: Vec<u64> = s.lengths().take(200).collect();
            for (i, &len) in seq.iter().enumerate() {
                assert_eq!(s.restart_length(i as u64 + 1), len, "{}", s.name);
            }
        }
    }

    #[test]
    fn huge_indices_saturate() {
        let g = RestartStrategy::geometric(100, 1.5);
        assert_eq!(g.restart_length(10_000), MAX_LENGTH);
        let l = RestartStrategy::luby(512);
        assert!(l.restart_length((1 << 62) - 1) >= 1);
    }

    #[test]
    fn validation() {
        assert_eq!(
            RestartStrategy::new(
                "x",
                StrategyKind::Geometric {
                    init: 10,
                    factor: 1.0
                }
            )
            .unwrap_err(),
            StrategyError::BadFactor(1.0)
        );
        assert_eq!(
            RestartStrategy::new("x", StrategyKind::Fixed { size: 0 }).unwrap_err(),
            StrategyError::ZeroLength
        );
        assert!(RestartStrategy::new(
            "x",
            StrategyKind::Nested {
                inner: 10,
                outer: 5,
                factor: 1.5
            }
        )
        .is_err());
        for s in default_portfolio().strategies {
            s.validate().unwrap();
        }
    }

    #[test]
    fn portfolio_by_name() {
        let p = Portfolio::from_names(&["Fixed-4096", "luby-32"]).unwrap();
        assert_eq!(p.names(), vec!["Fixed-4096", "luby-32"]);
        assert!(Portfolio::from_names(&["luby-7"]).is_err());
    }
}
