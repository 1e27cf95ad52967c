//! Maximum-weight bipartite b-matching between reviewers and papers.

mod brute;
pub(crate) mod flow;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{as_integer, floor_tol, Assignment, SimilarityMatrix};

pub use brute::brute_force_solve;
use flow::FlowNetwork;

/// Similarities are converted to integers at this resolution for the flow
/// arithmetic; reported values are recomputed from the chosen pairs.
pub(crate) const WEIGHT_SCALE: f64 = 1e9;

pub(crate) fn scaled(v: f64) -> i64 {
    (v * WEIGHT_SCALE).round() as i64
}

/// How paper loads are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PapMode {
    /// Every paper receives exactly `ell_pap` reviewers.
    Exact,
    /// Every paper receives at most `ell_pap` reviewers.
    AtMost,
    /// Every paper receives `floor(ell_pap)` or `ceil(ell_pap)` reviewers,
    /// `floor(ell_pap * |P|)` reviews in total.
    FloorCeil,
}

/// One b-matching problem over a sub-block of a similarity matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSpec {
    pub reviewer_subset: Vec<usize>,
    pub paper_subset: Vec<usize>,
    pub ell_rev: u32,
    pub ell_pap: f64,
    pub pap_mode: PapMode,
    pub excluded_pairs: Vec<(usize, usize)>,
}

impl MatchSpec {
    /// Exact paper loads over the whole matrix.
    pub fn full(s: &SimilarityMatrix, ell_rev: u32, ell_pap: u32) -> Self {
        MatchSpec::exact(
            (0..s.n_reviewers()).collect(),
            (0..s.n_papers()).collect(),
            ell_rev,
            ell_pap,
        )
    }

    pub fn exact(reviewers: Vec<usize>, papers: Vec<usize>, ell_rev: u32, ell_pap: u32) -> Self {
        MatchSpec {
            reviewer_subset: reviewers,
            paper_subset: papers,
            ell_rev,
            ell_pap: ell_pap as f64,
            pap_mode: PapMode::Exact,
            excluded_pairs: Vec::new(),
        }
    }

    pub fn with_mode(mut self, mode: PapMode) -> Self {
        self.pap_mode = mode;
        self
    }

    pub fn with_exclusions(mut self, pairs: Vec<(usize, usize)>) -> Self {
        self.excluded_pairs = pairs;
        self
    }

    /// Checks indices and load arithmetic. Returns the per-paper demand
    /// `(base, bonus_papers)`: `base` reviewers for every paper plus one more
    /// for `bonus_papers` of them (floor-ceil mode only).
    pub(crate) fn check(&self, s: &SimilarityMatrix) -> Result<(u32, usize)> {
        check_subset(&self.reviewer_subset, s.n_reviewers(), "reviewer")?;
        check_subset(&self.paper_subset, s.n_papers(), "paper")?;
        if !(self.ell_pap.is_finite() && self.ell_pap >= 0.0) {
            return Err(Error::config(format!("paper load {} is not a nonnegative number", self.ell_pap)));
        }
        let n_p = self.paper_subset.len();
        let (base, bonus) = match self.pap_mode {
            PapMode::Exact | PapMode::AtMost => {
                let l = as_integer(self.ell_pap).ok_or_else(|| {
                    Error::config(format!(
                        "paper load {} must be an integer in {:?} mode",
                        self.ell_pap, self.pap_mode
                    ))
                })?;
                (l as u32, 0)
            }
            PapMode::FloorCeil => {
                let lo = floor_tol(self.ell_pap) as u32;
                let total = floor_tol(self.ell_pap * n_p as f64) as usize;
                (lo, total - lo as usize * n_p)
            }
        };
        let required = base as usize * n_p + bonus;
        if self.pap_mode != PapMode::AtMost {
            let capacity = self.ell_rev as usize * self.reviewer_subset.len();
            if capacity < required {
                return Err(Error::infeasible(format!(
                    "ell_rev * |R| = {} * {} = {capacity} < required reviews {required}",
                    self.ell_rev,
                    self.reviewer_subset.len()
                )));
            }
            let excluded: HashSet<(usize, usize)> = self.excluded_pairs.iter().copied().collect();
            let need = if bonus > 0 { base + 1 } else { base };
            let mut short = 0usize;
            for &p in &self.paper_subset {
                let eligible = self
                    .reviewer_subset
                    .iter()
                    .filter(|&&r| !excluded.contains(&(r, p)))
                    .count();
                if eligible < base as usize {
                    return Err(Error::infeasible(format!(
                        "paper {p} has {eligible} eligible reviewers but needs {base}"
                    )));
                }
                if (eligible as u32) < need {
                    short += 1;
                }
            }
            if n_p - short < bonus {
                return Err(Error::infeasible(format!(
                    "only {} papers can take an extra reviewer but {bonus} are required",
                    n_p - short
                )));
            }
        }
        Ok((base, bonus))
    }
}

fn check_subset(ix: &[usize], n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in ix {
        if i >= n {
            return Err(Error::config(format!("{what} index {i} out of range (size {n})")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::config(format!("{what} index {i} listed twice")));
        }
    }
    Ok(())
}

/// Finds a maximum-total-similarity assignment satisfying `spec`.
///
/// Deterministic for a fixed input: reviewers and papers are visited in the
/// order given by the subsets and ties resolve towards lower indices.
pub fn solve(s: &SimilarityMatrix, spec: &MatchSpec) -> Result<Assignment> {
    let (base, bonus) = spec.check(s)?;
    let excluded: HashSet<(usize, usize)> = spec.excluded_pairs.iter().copied().collect();
    let reviewers = &spec.reviewer_subset;
    let n_r = reviewers.len();
    let n_p = spec.paper_subset.len();

    let mut net = FlowNetwork::new(vec![spec.ell_rev; n_r]);
    // Edge index ranges of real reviewer edges, per paper.
    let mut real_edges: Vec<(usize, std::ops::Range<usize>)> = Vec::with_capacity(n_p);

    let excluded = &excluded;
    let eligible = |p: usize| {
        reviewers
            .iter()
            .enumerate()
            .filter(move |&(_, &r)| !excluded.contains(&(r, p)))
            .map(move |(j, &r)| (j, s.get(r, p)))
    };

    match spec.pap_mode {
        PapMode::Exact => {
            for &p in &spec.paper_subset {
                let u = net.add_demand(base, eligible(p).map(|(j, v)| (j, scaled(v), 1)));
                real_edges.push((p, net.edges(u)));
            }
        }
        PapMode::AtMost => {
            // Each paper may fall back on a private zero-weight dummy. Real
            // weights get a +1 tie-breaker (kept below one scaled unit) so that
            // zero-similarity pairs are still preferred over leaving a slot
            // empty.
            let k = (base as i64) * (n_p as i64) + 1;
            for &p in &spec.paper_subset {
                let dummy = net.add_supply(base);
                let edges: Vec<_> = eligible(p)
                    .map(|(j, v)| (j, scaled(v) * k + 1, 1))
                    .chain(std::iter::once((dummy, 0, base)))
                    .collect();
                let u = net.add_demand(base, edges);
                let r = net.edges(u);
                real_edges.push((p, r.start..r.end - 1));
            }
        }
        PapMode::FloorCeil => {
            // Demand ceil per paper; a shared dummy absorbs the unit that
            // papers without a bonus do not receive. Its edges outweigh any
            // real assignment so it is always filled to capacity.
            let hi = if bonus > 0 { base + 1 } else { base };
            let dummy_cap = if bonus > 0 { n_p - bonus } else { 0 } as u32;
            let big = (WEIGHT_SCALE as i64) * (hi as i64 * n_p as i64 + 1);
            let dummy = net.add_supply(dummy_cap);
            for &p in &spec.paper_subset {
                let mut edges: Vec<_> = eligible(p).map(|(j, v)| (j, scaled(v), 1)).collect();
                let n_real = edges.len();
                if dummy_cap > 0 {
                    edges.push((dummy, big, 1));
                }
                let u = net.add_demand(hi, edges);
                let r = net.edges(u);
                real_edges.push((p, r.start..r.start + n_real));
            }
        }
    }

    let flow = net.solve().map_err(|e| {
        Error::infeasible(format!(
            "no feasible assignment: paper {} cannot be filled without violating reviewer loads",
            spec.paper_subset[e.demand_node]
        ))
    })?;

    let mut pairs = Vec::new();
    for (p, range) in real_edges {
        for e in range {
            if flow[e] > 0 {
                pairs.push((reviewers[net.edge_target(e)], p));
            }
        }
    }
    Assignment::from_pairs(s, pairs)
}

/// Selects a unit-load sub-assignment of `a` with value at least
/// `value(a) / mu`.
///
/// The support of `a` is a bipartite graph of maximum degree `mu`, so its
/// edges split into `mu` matchings; the best of them reaches the bound and a
/// maximum-weight matching on the support is at least as good.
pub fn extract_unit_matching(s: &SimilarityMatrix, a: &Assignment, mu: u32) -> Result<Assignment> {
    let rl = a.reviewer_loads(s.n_reviewers());
    let pl = a.paper_loads(s.n_papers());
    if let Some((r, &l)) = rl.iter().enumerate().find(|(_, &l)| l > mu) {
        return Err(Error::Precondition(format!("reviewer {r} has load {l} > mu = {mu}")));
    }
    if let Some((p, &l)) = pl.iter().enumerate().find(|(_, &l)| l > mu) {
        return Err(Error::Precondition(format!("paper {p} has load {l} > mu = {mu}")));
    }
    if a.is_empty() {
        return Ok(Assignment::empty());
    }
    let reviewers: Vec<usize> = (0..s.n_reviewers()).filter(|&r| rl[r] > 0).collect();
    let papers: Vec<usize> = (0..s.n_papers()).filter(|&p| pl[p] > 0).collect();
    let mut col = vec![usize::MAX; s.n_reviewers()];
    for (j, &r) in reviewers.iter().enumerate() {
        col[r] = j;
    }

    let mut by_paper: Vec<Vec<usize>> = vec![Vec::new(); s.n_papers()];
    for &(r, p) in a.pairs() {
        by_paper[p].push(r);
    }
    let k = papers.len() as i64 + 1;
    let mut net = FlowNetwork::new(vec![1; reviewers.len()]);
    let mut ranges = Vec::with_capacity(papers.len());
    for &p in &papers {
        let dummy = net.add_supply(1);
        let edges: Vec<_> = by_paper[p]
            .iter()
            .map(|&r| (col[r], scaled(s.get(r, p)) * k + 1, 1))
            .chain(std::iter::once((dummy, 0, 1)))
            .collect();
        let u = net.add_demand(1, edges);
        let range = net.edges(u);
        ranges.push((p, range.start..range.end - 1));
    }
    let flow = net
        .solve()
        .expect("every paper has a private dummy, so the network is always feasible");
    let mut pairs = Vec::new();
    for (p, range) in ranges {
        for e in range {
            if flow[e] > 0 {
                pairs.push((reviewers[net.edge_target(e)], p));
            }
        }
    }
    Assignment::from_pairs(s, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: Vec<Vec<f64>>) -> SimilarityMatrix {
        SimilarityMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn single_edge() {
        let s = m(vec![vec![0.7]]);
        let a = solve(&s, &MatchSpec::full(&s, 1, 1)).unwrap();
        assert_eq!(a.pairs(), &[(0, 0)]);
        assert_eq!(a.value(), 0.7);
    }

    #[test]
    fn three_by_two() {
        let s = m(vec![vec![0.9, 0.1], vec![0.5, 0.8], vec![0.4, 0.6]]);
        let a = solve(&s, &MatchSpec::full(&s, 1, 1)).unwrap();
        assert_eq!(a.pairs(), &[(0, 0), (1, 1)]);
        assert!((a.value() - 1.7).abs() < 1e-12);
    }

    #[test]
    fn counting_infeasibility() {
        let s = m(vec![vec![0.5; 3]; 2]);
        let err = solve(&s, &MatchSpec::full(&s, 1, 1)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "{err}");
    }

    #[test]
    fn exclusions_are_respected() {
        let s = m(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let spec = MatchSpec::full(&s, 1, 1).with_exclusions(vec![(0, 0)]);
        let a = solve(&s, &spec).unwrap();
        assert_eq!(a.pairs(), &[(0, 1), (1, 0)]);
        assert_eq!(a.value(), 0.0);
    }

    #[test]
    fn exclusion_infeasibility_is_detected() {
        let s = m(vec![vec![1.0], vec![1.0]]);
        let spec = MatchSpec::full(&s, 1, 2).with_exclusions(vec![(1, 0)]);
        assert!(matches!(solve(&s, &spec), Err(Error::Infeasible(_))));
    }

    #[test]
    fn at_most_mode_keeps_zero_pairs_and_allows_underload() {
        let s = m(vec![vec![0.0, 0.3]]);
        let spec = MatchSpec::full(&s, 2, 1).with_mode(PapMode::AtMost);
        let a = solve(&s, &spec).unwrap();
        assert_eq!(a.pairs(), &[(0, 0), (0, 1)]);

        let spec = MatchSpec::full(&s, 1, 1).with_mode(PapMode::AtMost);
        let a = solve(&s, &spec).unwrap();
        assert_eq!(a.pairs(), &[(0, 1)]);
    }

    #[test]
    fn floor_ceil_mode_splits_loads() {
        let s = SimilarityMatrix::from_fn(3, 4, |r, p| ((r + 2 * p) % 5) as f64 / 5.0).unwrap();
        let mut spec = MatchSpec::full(&s, 2, 1);
        spec.ell_pap = 1.5;
        spec.pap_mode = PapMode::FloorCeil;
        let a = solve(&s, &spec).unwrap();
        assert_eq!(a.len(), 6);
        assert!(a.paper_loads(4).iter().all(|&l| l == 1 || l == 2));
        assert!(a.reviewer_loads(3).iter().all(|&l| l <= 2));
        assert_eq!(a.value(), brute_force_solve(&s, &spec).unwrap().value());
    }

    #[test]
    fn non_integral_load_needs_floor_ceil() {
        let s = m(vec![vec![0.5; 2]; 2]);
        let mut spec = MatchSpec::full(&s, 2, 1);
        spec.ell_pap = 1.5;
        assert!(matches!(solve(&s, &spec), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn extract_identity_for_unit_loads() {
        let s = m(vec![vec![0.0, 0.2], vec![0.9, 0.0]]);
        let a = Assignment::from_pairs(&s, vec![(0, 0), (1, 1)]).unwrap();
        assert_eq!(extract_unit_matching(&s, &a, 1).unwrap(), a);
    }

    #[test]
    fn extract_from_complete_two_by_two() {
        let s = m(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let a = Assignment::from_pairs(&s, vec![(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let b = extract_unit_matching(&s, &a, 2).unwrap();
        assert_eq!(b.value(), 2.0);
        assert!(b.max_load() <= 1);
    }

    #[test]
    fn extract_empty_and_precondition() {
        let s = m(vec![vec![1.0, 1.0]]);
        assert!(extract_unit_matching(&s, &Assignment::empty(), 3).unwrap().is_empty());
        let a = Assignment::from_pairs(&s, vec![(0, 0), (0, 1)]).unwrap();
        assert!(matches!(extract_unit_matching(&s, &a, 1), Err(Error::Precondition(_))));
    }
}
