//! Two-stage values: the oracle optimum, the value of a committed reviewer
//! split, suboptimality, and the sampled objective over fixed paper draws.

mod draw;
mod estimate;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, LoadConfig, SimilarityMatrix, VALUE_TOL};
use crate::solver::flow::FlowNetwork;
use crate::solver::{scaled, solve, MatchSpec, PapMode};

pub use draw::{draw_split, DrawParams};
pub use estimate::{estimate_f, EstimatorResult, R2Choice};

/// Assignments for both stages and the resulting mean similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub stage1: Assignment,
    pub stage2: Assignment,
    pub mean_sim: f64,
    pub oracle_mean_sim: Option<f64>,
    pub fraction_of_oracle: Option<f64>,
}

impl TwoStageResult {
    fn new(stage1: Assignment, stage2: Assignment, divisor: f64) -> Result<Self> {
        if divisor <= 0.0 {
            return Err(Error::config("mean similarity of an empty problem is undefined"));
        }
        let mean_sim = (stage1.value() + stage2.value()) / divisor;
        Ok(TwoStageResult {
            stage1,
            stage2,
            mean_sim,
            oracle_mean_sim: None,
            fraction_of_oracle: None,
        })
    }

    /// Attaches the oracle value and the ratio `mean_sim / oracle`. A zero
    /// oracle means nothing can be gained, and the ratio is reported as 1.
    pub fn with_oracle(mut self, oracle_mean_sim: f64) -> Self {
        self.oracle_mean_sim = Some(oracle_mean_sim);
        self.fraction_of_oracle = Some(if oracle_mean_sim > 0.0 {
            self.mean_sim / oracle_mean_sim
        } else {
            1.0
        });
        self
    }
}

fn divisor(loads: &LoadConfig, n1: usize, n2: usize) -> f64 {
    loads.ell_pap1 as f64 * n1 as f64 + loads.ell_pap2 as f64 * n2 as f64
}

fn complement(n: usize, subset: &[usize]) -> Result<Vec<usize>> {
    let mut member = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::config(format!("index {i} out of range (size {n})")));
        }
        if std::mem::replace(&mut member[i], true) {
            return Err(Error::config(format!("index {i} listed twice")));
        }
    }
    Ok((0..n).filter(|&i| !member[i]).collect())
}

fn stage(label: &str, r: std::result::Result<Assignment, Error>) -> Result<Assignment> {
    r.map_err(|e| match e {
        Error::Infeasible(m) => Error::Infeasible(format!("{label}: {m}")),
        other => other,
    })
}

/// Jointly optimal two-stage assignment when the second-stage papers `p2`
/// are known in advance (oracle value Q*).
///
/// Solved as a single flow: each reviewer is one supply node of capacity
/// `ell_rev` feeding a stage-one bank (every paper, `ell_pap1` reviewers) and
/// a stage-two bank (papers in `p2`, `ell_pap2` reviewers). A reviewer may
/// serve the same paper in both banks.
pub fn oracle_optimal(s: &SimilarityMatrix, p2: &[usize], loads: &LoadConfig) -> Result<TwoStageResult> {
    let all: Vec<usize> = (0..s.n_papers()).collect();
    complement(s.n_papers(), p2)?;
    joint(s, &all, p2, loads)
}

/// Oracle for the paper-split variant: stage-one papers are those outside
/// `p2`, and both banks draw on every reviewer.
pub fn oracle_paper_split(
    s: &SimilarityMatrix,
    p2: &[usize],
    loads: &LoadConfig,
) -> Result<TwoStageResult> {
    let p1 = complement(s.n_papers(), p2)?;
    joint(s, &p1, p2, loads)
}

fn joint(
    s: &SimilarityMatrix,
    p1: &[usize],
    p2: &[usize],
    loads: &LoadConfig,
) -> Result<TwoStageResult> {
    loads.check()?;
    let n_r = s.n_reviewers();
    let need = loads.ell_pap1 as usize * p1.len() + loads.ell_pap2 as usize * p2.len();
    if loads.ell_rev as usize * n_r < need {
        return Err(Error::infeasible(format!(
            "ell_rev * lambda = {} < requested reviews {need}",
            loads.ell_rev as usize * n_r
        )));
    }
    for (bank, l) in [(p1, loads.ell_pap1), (p2, loads.ell_pap2)] {
        if !bank.is_empty() && n_r < l as usize {
            return Err(Error::infeasible(format!(
                "a paper needs {l} distinct reviewers but only {n_r} exist"
            )));
        }
    }

    let mut net = FlowNetwork::new(vec![loads.ell_rev; n_r]);
    let mut banks: [Vec<(usize, std::ops::Range<usize>)>; 2] = [Vec::new(), Vec::new()];
    for (b, (papers, l)) in [(p1, loads.ell_pap1), (p2, loads.ell_pap2)].into_iter().enumerate() {
        for &p in papers {
            let u = net.add_demand(l, (0..n_r).map(|r| (r, scaled(s.get(r, p)), 1)));
            banks[b].push((p, net.edges(u)));
        }
    }
    let flow = net
        .solve()
        .map_err(|_| Error::infeasible("joint assignment cannot meet every paper load"))?;
    let [b1, b2] = banks.map(|bank| {
        let mut pairs = Vec::new();
        for (p, range) in bank {
            for e in range {
                if flow[e] > 0 {
                    pairs.push((net.edge_target(e), p));
                }
            }
        }
        pairs
    });
    TwoStageResult::new(
        Assignment::from_pairs(s, b1)?,
        Assignment::from_pairs(s, b2)?,
        divisor(loads, p1.len(), p2.len()),
    )
}

/// Value Q(R2, P2) of committing reviewers `r2` to the second stage:
/// stage one assigns the other reviewers to every paper, stage two assigns
/// `r2` to `p2`, both with exact paper loads.
pub fn split_value(
    s: &SimilarityMatrix,
    r2: &[usize],
    p2: &[usize],
    loads: &LoadConfig,
) -> Result<TwoStageResult> {
    loads.check()?;
    let r1 = complement(s.n_reviewers(), r2)?;
    complement(s.n_papers(), p2)?;
    let all: Vec<usize> = (0..s.n_papers()).collect();
    let a1 = stage(
        "stage one",
        solve(s, &MatchSpec::exact(r1, all, loads.ell_rev, loads.ell_pap1)),
    )?;
    let a2 = stage(
        "stage two",
        solve(s, &MatchSpec::exact(r2.to_vec(), p2.to_vec(), loads.ell_rev, loads.ell_pap2)),
    )?;
    TwoStageResult::new(a1, a2, divisor(loads, s.n_papers(), p2.len()))
}

/// Split value with paper loads as upper bounds (Q'), normalised by the
/// nominal number of reviews `ell_pap1 n + ell_pap2 beta n` regardless of
/// the realised size of `p2`. Never infeasible.
pub fn split_value_underloaded(
    s: &SimilarityMatrix,
    r2: &[usize],
    p2: &[usize],
    loads: &LoadConfig,
) -> Result<TwoStageResult> {
    loads.check()?;
    let r1 = complement(s.n_reviewers(), r2)?;
    complement(s.n_papers(), p2)?;
    let all: Vec<usize> = (0..s.n_papers()).collect();
    let a1 = solve(
        s,
        &MatchSpec::exact(r1, all, loads.ell_rev, loads.ell_pap1).with_mode(PapMode::AtMost),
    )?;
    let a2 = solve(
        s,
        &MatchSpec::exact(r2.to_vec(), p2.to_vec(), loads.ell_rev, loads.ell_pap2)
            .with_mode(PapMode::AtMost),
    )?;
    TwoStageResult::new(a1, a2, loads.total_reviews(s.n_papers()))
}

/// Paper-split variant: stage one reviews only the papers outside `p2`.
pub fn paper_split_value(
    s: &SimilarityMatrix,
    r2: &[usize],
    p2: &[usize],
    loads: &LoadConfig,
) -> Result<TwoStageResult> {
    loads.check()?;
    let r1 = complement(s.n_reviewers(), r2)?;
    let p1 = complement(s.n_papers(), p2)?;
    let n1 = p1.len();
    let a1 = stage(
        "stage one",
        solve(s, &MatchSpec::exact(r1, p1, loads.ell_rev, loads.ell_pap1)),
    )?;
    let a2 = stage(
        "stage two",
        solve(s, &MatchSpec::exact(r2.to_vec(), p2.to_vec(), loads.ell_rev, loads.ell_pap2)),
    )?;
    TwoStageResult::new(a1, a2, divisor(loads, n1, p2.len()))
}

/// `Q*(P2) - Q(R2, P2)`.
pub fn suboptimality(
    s: &SimilarityMatrix,
    r2: &[usize],
    p2: &[usize],
    loads: &LoadConfig,
) -> Result<f64> {
    let q = split_value(s, r2, p2, loads)?.mean_sim;
    let q_star = oracle_optimal(s, p2, loads)?.mean_sim;
    Ok(q_star - q)
}

/// Average split value over fixed second-stage paper samples.
pub fn sampled_objective(
    s: &SimilarityMatrix,
    r2: &[usize],
    loads: &LoadConfig,
    samples: &[Vec<usize>],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::config("sampled objective needs at least one paper sample"));
    }
    let m = loads.second_stage_papers(s.n_papers())?;
    let mut total = 0.0;
    for p2 in samples {
        if p2.len() != m {
            return Err(Error::config(format!(
                "paper sample has {} papers, expected beta * n = {m}",
                p2.len()
            )));
        }
        total += split_value(s, r2, p2, loads)?.mean_sim;
    }
    Ok(total / samples.len() as f64)
}

const MAX_BRUTE_REVIEWERS: usize = 20;

/// Exhaustive maximiser of [`sampled_objective`] over reviewer sets of the
/// default second-stage size. Splits that cannot be staffed are skipped.
pub fn brute_force_best_r2(
    s: &SimilarityMatrix,
    loads: &LoadConfig,
    samples: &[Vec<usize>],
) -> Result<(Vec<usize>, f64)> {
    let lambda = s.n_reviewers();
    if lambda > MAX_BRUTE_REVIEWERS {
        return Err(Error::TooLarge(format!(
            "exhaustive split search limited to {MAX_BRUTE_REVIEWERS} reviewers, got {lambda}"
        )));
    }
    let m = loads.default_r2_size(lambda);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r2 in (0..lambda).combinations(m) {
        let v = match sampled_objective(s, &r2, loads, samples) {
            Ok(v) => v,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(_, b)| v > *b + VALUE_TOL) {
            best = Some((r2, v));
        }
    }
    best.ok_or_else(|| Error::infeasible("no reviewer split of the required size is feasible"))
}
