//! Two-stage reviewer assignment.
//!
//! Reviewers are split between a first review stage and a reserve that is
//! assigned once the second-stage papers are known. This crate provides the
//! b-matching solvers, evaluators for the split and oracle values, Monte
//! Carlo estimators, lower-bound calculators, instance generators and data
//! loaders used to study that choice.

pub mod bounds;
pub mod constructions;
pub mod dataio;
pub mod error;
pub mod harness;
pub mod model;
pub mod solver;
pub mod twostage;

pub use error::{Error, Result};
pub use model::{
    mean_similarity, Assignment, DrawMode, LoadConfig, SimilarityMatrix, SplitInstance, Violation,
};
pub use solver::{brute_force_solve, extract_unit_matching, solve, MatchSpec, PapMode};
pub use twostage::{
    brute_force_best_r2, draw_split, estimate_f, oracle_optimal, oracle_paper_split,
    paper_split_value, sampled_objective, split_value, split_value_underloaded, suboptimality,
    DrawParams, EstimatorResult, R2Choice, TwoStageResult,
};
