//! Domain types shared by the solver, the two-stage evaluators and the
//! experiment harness.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for every similarity-value comparison.
pub const VALUE_TOL: f64 = 1e-9;

/// Rounds `x` to the nearest integer when it is within [`VALUE_TOL`] of one.
///
/// Loads such as `beta * n` or `(1 + beta) * mu` are computed from decimal
/// fractions; `0.07 * 100.0` is not exactly `7.0` in binary floating point.
pub fn as_integer(x: f64) -> Option<i64> {
    let r = x.round();
    ((x - r).abs() <= VALUE_TOL).then_some(r as i64)
}

/// Floor that treats values within [`VALUE_TOL`] of an integer as that integer.
pub fn floor_tol(x: f64) -> i64 {
    as_integer(x).unwrap_or_else(|| x.floor() as i64)
}

/// Ceiling that treats values within [`VALUE_TOL`] of an integer as that integer.
pub fn ceil_tol(x: f64) -> i64 {
    as_integer(x).unwrap_or_else(|| x.ceil() as i64)
}

/// Mixes a master seed with a sequence of indices into an independent
/// 64-bit seed (splitmix64 finalizer over each component).
///
/// Trials seeded this way do not depend on evaluation order, so adding a
/// trial or a beta value never reshuffles the others.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts
        .iter()
        .fold(mix(master), |acc, &p| mix(acc ^ mix(p.wrapping_add(0x632b_e59b_d9b4_e019))))
}

/// A problem found by [`SimilarityMatrix::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    OutOfRange { reviewer: usize, paper: usize, value: f64 },
    NonFinite { reviewer: usize, paper: usize },
    DuplicateReviewerId { index: usize, id: String },
    DuplicatePaperId { index: usize, id: String },
    ShapeMismatch { expected: usize, found: usize, what: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange { reviewer, paper, value } => {
                write!(f, "entry ({reviewer},{paper}) = {value} outside [0,1]")
            }
            Violation::NonFinite { reviewer, paper } => {
                write!(f, "entry ({reviewer},{paper}) is not finite")
            }
            Violation::DuplicateReviewerId { index, id } => {
                write!(f, "reviewer id {id:?} at row {index} duplicates an earlier row")
            }
            Violation::DuplicatePaperId { index, id } => {
                write!(f, "paper id {id:?} at column {index} duplicates an earlier column")
            }
            Violation::ShapeMismatch { expected, found, what } => {
                write!(f, "{what}: expected {expected}, found {found}")
            }
        }
    }
}

/// Dense reviewer-by-paper similarity scores in `[0, 1]`.
///
/// Rows are reviewers, columns are papers. Conflicts of interest are encoded
/// as zero similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n_reviewers: usize,
    n_papers: usize,
    scores: Vec<f64>,
    reviewer_ids: Vec<String>,
    paper_ids: Vec<String>,
}

impl SimilarityMatrix {
    /// Builds a validated matrix from labelled rows.
    pub fn new(
        reviewer_ids: Vec<String>,
        paper_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let s = Self::from_parts_unchecked(reviewer_ids, paper_ids, rows);
        let violations = s.validate();
        if violations.is_empty() {
            Ok(s)
        } else {
            Err(Error::Validation(violations))
        }
    }

    /// Builds a validated matrix with generated ids `r0, r1, ...` and `p0, p1, ...`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_papers = rows.first().map_or(0, Vec::len);
        Self::new(default_ids("r", rows.len()), default_ids("p", n_papers), rows)
    }

    /// Builds a validated matrix by evaluating `f(reviewer, paper)`.
    pub fn from_fn(
        n_reviewers: usize,
        n_papers: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let rows = (0..n_reviewers)
            .map(|r| (0..n_papers).map(|p| f(r, p)).collect())
            .collect();
        Self::from_rows(rows)
    }

    /// Stores the data as given. Ragged rows are padded with NaN so that
    /// [`validate`](Self::validate) reports them.
    pub fn from_parts_unchecked(
        reviewer_ids: Vec<String>,
        paper_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Self {
        let n_reviewers = rows.len();
        let n_papers = paper_ids.len();
        let mut scores = Vec::with_capacity(n_reviewers * n_papers);
        for row in &rows {
            scores.extend((0..n_papers).map(|p| row.get(p).copied().unwrap_or(f64::NAN)));
        }
        SimilarityMatrix {
            n_reviewers,
            n_papers,
            scores,
            reviewer_ids,
            paper_ids,
        }
    }

    /// Reports every out-of-range or non-finite entry and every duplicate
    /// label, with coordinates. An empty list means the matrix is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.reviewer_ids.len() != self.n_reviewers {
            out.push(Violation::ShapeMismatch {
                expected: self.n_reviewers,
                found: self.reviewer_ids.len(),
                what: "reviewer id count",
            });
        }
        for r in 0..self.n_reviewers {
            for p in 0..self.n_papers {
                let v = self.get(r, p);
                if !v.is_finite() {
                    out.push(Violation::NonFinite { reviewer: r, paper: p });
                } else if !(0.0..=1.0).contains(&v) {
                    out.push(Violation::OutOfRange { reviewer: r, paper: p, value: v });
                }
            }
        }
        let mut seen = HashSet::new();
        for (index, id) in self.reviewer_ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                out.push(Violation::DuplicateReviewerId { index, id: id.clone() });
            }
        }
        seen.clear();
        for (index, id) in self.paper_ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                out.push(Violation::DuplicatePaperId { index, id: id.clone() });
            }
        }
        out
    }

    pub fn n_reviewers(&self) -> usize {
        self.n_reviewers
    }

    pub fn n_papers(&self) -> usize {
        self.n_papers
    }

    #[inline]
    pub fn get(&self, reviewer: usize, paper: usize) -> f64 {
        self.scores[reviewer * self.n_papers + paper]
    }

    pub fn row(&self, reviewer: usize) -> &[f64] {
        &self.scores[reviewer * self.n_papers..(reviewer + 1) * self.n_papers]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_reviewers).map(move |r| self.row(r))
    }

    pub fn reviewer_ids(&self) -> &[String] {
        &self.reviewer_ids
    }

    pub fn paper_ids(&self) -> &[String] {
        &self.paper_ids
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Reorders reviewers and papers: row `i` of the result is row
    /// `reviewer_order[i]` of `self`, likewise for columns.
    pub fn permuted(&self, reviewer_order: &[usize], paper_order: &[usize]) -> Self {
        let rows = reviewer_order
            .iter()
            .map(|&r| paper_order.iter().map(|&p| self.get(r, p)).collect())
            .collect();
        SimilarityMatrix::from_parts_unchecked(
            reviewer_order.iter().map(|&r| self.reviewer_ids[r].clone()).collect(),
            paper_order.iter().map(|&p| self.paper_ids[p].clone()).collect(),
            rows,
        )
    }
}

pub(crate) fn default_ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Reviewer and paper loads for a two-stage assignment plus the fraction
/// `beta` of papers that receive second-stage review.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadConfig {
    /// Maximum reviews per reviewer across both stages.
    pub ell_rev: u32,
    /// Reviews per paper in stage one.
    pub ell_pap1: u32,
    /// Reviews per second-stage paper.
    pub ell_pap2: u32,
    pub beta: f64,
}

impl LoadConfig {
    pub fn new(ell_rev: u32, ell_pap1: u32, ell_pap2: u32, beta: f64) -> Result<Self> {
        let cfg = LoadConfig { ell_rev, ell_pap1, ell_pap2, beta };
        cfg.check()?;
        Ok(cfg)
    }

    /// All loads one, as in the theoretical analysis.
    pub fn unit(beta: f64) -> Self {
        LoadConfig { ell_rev: 1, ell_pap1: 1, ell_pap2: 1, beta }
    }

    pub fn check(&self) -> Result<()> {
        if self.ell_rev == 0 || self.ell_pap1 == 0 || self.ell_pap2 == 0 {
            return Err(Error::config("loads must be positive integers"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0 + VALUE_TOL) {
            return Err(Error::config(format!("beta = {} outside (0, 1]", self.beta)));
        }
        Ok(())
    }

    /// Number of second-stage papers `beta * n`; rejects non-integral products.
    pub fn second_stage_papers(&self, n_papers: usize) -> Result<usize> {
        let x = self.beta * n_papers as f64;
        as_integer(x).map(|v| v as usize).ok_or_else(|| {
            Error::config(format!(
                "beta * n = {} * {} = {x} is not an integer",
                self.beta, n_papers
            ))
        })
    }

    /// Default size of the second-stage reviewer set, `floor(beta/(1+beta) * lambda)`.
    pub fn default_r2_size(&self, n_reviewers: usize) -> usize {
        floor_tol(self.beta / (1.0 + self.beta) * n_reviewers as f64).max(0) as usize
    }

    /// Total number of reviews requested, `ell_pap1 * n + ell_pap2 * beta * n`.
    pub fn total_reviews(&self, n_papers: usize) -> f64 {
        let n = n_papers as f64;
        self.ell_pap1 as f64 * n + self.ell_pap2 as f64 * self.beta * n
    }

    /// Supply feasibility: requested reviews do not exceed reviewer capacity.
    pub fn supply_feasible(&self, n_reviewers: usize, n_papers: usize) -> bool {
        self.total_reviews(n_papers) <= (self.ell_rev as usize * n_reviewers) as f64 + VALUE_TOL
    }

    /// Per-stage feasibility of a split with `r2_size` second-stage reviewers
    /// and `p2_size` second-stage papers.
    pub fn split_feasible(
        &self,
        n_reviewers: usize,
        n_papers: usize,
        r2_size: usize,
        p2_size: usize,
    ) -> Result<()> {
        let rev = self.ell_rev as usize;
        if r2_size > n_reviewers {
            return Err(Error::config("second-stage reviewer set larger than the reviewer pool"));
        }
        if rev * r2_size < self.ell_pap2 as usize * p2_size {
            return Err(Error::infeasible(format!(
                "stage two: ell_rev * |R2| = {} < ell_pap2 * |P2| = {}",
                rev * r2_size,
                self.ell_pap2 as usize * p2_size
            )));
        }
        if rev * (n_reviewers - r2_size) < self.ell_pap1 as usize * n_papers {
            return Err(Error::infeasible(format!(
                "stage one: ell_rev * |R1| = {} < ell_pap1 * n = {}",
                rev * (n_reviewers - r2_size),
                self.ell_pap1 as usize * n_papers
            )));
        }
        Ok(())
    }
}

/// An integral reviewer-to-paper assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pairs: Vec<(usize, usize)>,
    value: f64,
}

impl Assignment {
    pub fn empty() -> Self {
        Assignment { pairs: Vec::new(), value: 0.0 }
    }

    /// Validates the pairs against `s` and computes the total similarity.
    pub fn from_pairs(s: &SimilarityMatrix, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(format!("duplicate pair {:?}", w[0])));
        }
        if let Some(&(r, p)) = pairs
            .iter()
            .find(|&&(r, p)| r >= s.n_reviewers() || p >= s.n_papers())
        {
            return Err(Error::config(format!(
                "pair ({r},{p}) out of range for a {}x{} matrix",
                s.n_reviewers(),
                s.n_papers()
            )));
        }
        let value = canonical_sum(pairs.iter().map(|&(r, p)| s.get(r, p)));
        Ok(Assignment { pairs, value })
    }

    /// Sorted, duplicate-free `(reviewer, paper)` pairs.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Total similarity over the assigned pairs.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, reviewer: usize, paper: usize) -> bool {
        self.pairs.binary_search(&(reviewer, paper)).is_ok()
    }

    pub fn reviewer_loads(&self, n_reviewers: usize) -> Vec<u32> {
        let mut loads = vec![0; n_reviewers];
        for &(r, _) in &self.pairs {
            loads[r] += 1;
        }
        loads
    }

    pub fn paper_loads(&self, n_papers: usize) -> Vec<u32> {
        let mut loads = vec![0; n_papers];
        for &(_, p) in &self.pairs {
            loads[p] += 1;
        }
        loads
    }

    /// Largest load on either side.
    pub fn max_load(&self) -> u32 {
        let r = self.pairs.iter().map(|&(r, _)| r).max().map_or(0, |m| m + 1);
        let p = self.pairs.iter().map(|&(_, p)| p).max().map_or(0, |m| m + 1);
        let a = self.reviewer_loads(r).into_iter().max().unwrap_or(0);
        let b = self.paper_loads(p).into_iter().max().unwrap_or(0);
        a.max(b)
    }
}

/// Order-independent sum: equal multisets of values always produce the same
/// bits, so two optimal assignments that differ only by zero-similarity
/// pairs report identical values.
pub(crate) fn canonical_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_unstable_by(f64::total_cmp);
    v.into_iter().sum()
}

/// How a second-stage split was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrawMode {
    UniformFixedSize,
    IndependentInclusion,
    ScoreTop,
    ScoreMiddle,
    Explicit,
}

impl std::str::FromStr for DrawMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "uniform" | "uniform-fixed-size" => DrawMode::UniformFixedSize,
            "independent" | "independent-inclusion" => DrawMode::IndependentInclusion,
            "score-top" | "top" => DrawMode::ScoreTop,
            "score-middle" | "middle" => DrawMode::ScoreMiddle,
            "explicit" => DrawMode::Explicit,
            other => return Err(Error::config(format!("unknown draw mode {other:?}"))),
        })
    }
}

impl fmt::Display for DrawMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DrawMode::UniformFixedSize => "uniform-fixed-size",
            DrawMode::IndependentInclusion => "independent-inclusion",
            DrawMode::ScoreTop => "score-top",
            DrawMode::ScoreMiddle => "score-middle",
            DrawMode::Explicit => "explicit",
        })
    }
}

/// A realized second-stage reviewer set and paper set, with the seed that
/// produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitInstance {
    pub r2: Vec<usize>,
    pub p2: Vec<usize>,
    pub seed: u64,
    pub draw_mode: DrawMode,
}

/// Mean similarity of a two-stage assignment: total similarity over the
/// number of requested reviews `ell_pap1 * n + ell_pap2 * beta * n`.
pub fn mean_similarity(
    a1: &Assignment,
    a2: &Assignment,
    loads: &LoadConfig,
    n_papers: usize,
) -> Result<f64> {
    let divisor = loads.total_reviews(n_papers);
    if divisor <= 0.0 {
        return Err(Error::config("mean similarity of an empty problem is undefined"));
    }
    Ok((a1.value() + a2.value()) / divisor)
}
