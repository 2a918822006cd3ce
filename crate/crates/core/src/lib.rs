//! A CDCL SAT solver with a portfolio of restart strategies and a learned
//! selector that, after a short observation window, predicts per-strategy
//! runtime and satisfiability and commits to the cheapest strategy.
//!
//! Numeric model code in [`ml`] is generic over the float type; the
//! aliases below fix it to `f64`, which is what the picker and harness use.

pub mod cnf;
pub mod cputime;
pub mod features;
pub mod harness;
pub mod ml;
pub mod picker;
pub mod restart;
pub mod scalar;
pub mod solver;

pub use cnf::{parse_dimacs, preprocess, Formula, Lit, PreprocessResult, PreprocessStatus};
pub use features::{FeatureVector, StatQuad, NUM_FEATURES};
pub use restart::{default_portfolio, luby_core, Portfolio, RestartStrategy, StrategyKind};
pub use scalar::Scalar;
pub use solver::{check_model, solve, SolveOutcome, SolveStatus, Solver, SolverConfig};

pub type DesignMatrix = ml::DesignMatrix<f64>;
pub type ScalingParams = ml::ScalingParams<f64>;
pub type RidgeModel = ml::RidgeModel<f64>;
pub type LogisticModel = ml::LogisticModel<f64>;
pub type TrainedBundle = picker::TrainedBundle<f64>;

pub type DesignMatrix32 = ml::DesignMatrix<f32>;
pub type RidgeModel32 = ml::RidgeModel<f32>;
pub type LogisticModel32 = ml::LogisticModel<f32>;
