use std::collections::{HashMap, HashSet};

use itertools::Itertools;

use super::{MatchSpec, PapMode};
use crate::error::{Error, Result};
use crate::model::{Assignment, SimilarityMatrix};

const MAX_CELLS: usize = 36;

/// Exhaustive reference solver for desk-scale instances
/// (`|reviewers| * |papers| <= 36`).
///
/// Papers are filled one at a time with every admissible reviewer subset;
/// partial results are memoised on the remaining reviewer capacities.
pub fn brute_force_solve(s: &SimilarityMatrix, spec: &MatchSpec) -> Result<Assignment> {
    let cells = spec.reviewer_subset.len() * spec.paper_subset.len();
    if cells > MAX_CELLS {
        return Err(Error::TooLarge(format!(
            "brute force limited to {MAX_CELLS} reviewer-paper cells, got {cells}"
        )));
    }
    let (base, bonus) = spec.check(s)?;
    let excluded: HashSet<(usize, usize)> = spec.excluded_pairs.iter().copied().collect();

    let options: Vec<Vec<Vec<usize>>> = spec
        .paper_subset
        .iter()
        .map(|&p| {
            let eligible: Vec<usize> = (0..spec.reviewer_subset.len())
                .filter(|&j| !excluded.contains(&(spec.reviewer_subset[j], p)))
                .collect();
            let sizes: Vec<usize> = match spec.pap_mode {
                PapMode::Exact => vec![base as usize],
                PapMode::AtMost => (0..=base as usize).collect(),
                PapMode::FloorCeil if bonus > 0 => vec![base as usize, base as usize + 1],
                PapMode::FloorCeil => vec![base as usize],
            };
            sizes
                .into_iter()
                .flat_map(|k| eligible.iter().copied().combinations(k))
                .collect()
        })
        .collect();

    let mut search = Search {
        s,
        spec,
        options: &options,
        base: base as usize,
        memo: HashMap::new(),
    };
    let caps = vec![spec.ell_rev; spec.reviewer_subset.len()];
    if search.best(0, caps.clone(), bonus).is_none() {
        return Err(Error::infeasible("no assignment satisfies the loads"));
    }

    // Replay the memoised decisions.
    let mut pairs = Vec::new();
    let mut caps = caps;
    let mut bonus_left = bonus;
    for (i, &p) in spec.paper_subset.iter().enumerate() {
        let (_, choice) = search.memo[&(i, caps.clone(), bonus_left)].expect("feasible state");
        let chosen = &options[i][choice];
        for &j in chosen {
            caps[j] -= 1;
            pairs.push((spec.reviewer_subset[j], p));
        }
        if spec.pap_mode == PapMode::FloorCeil && chosen.len() > search.base {
            bonus_left -= 1;
        }
    }
    Assignment::from_pairs(s, pairs)
}

type State = (usize, Vec<u32>, usize);

struct Search<'a> {
    s: &'a SimilarityMatrix,
    spec: &'a MatchSpec,
    options: &'a [Vec<Vec<usize>>],
    base: usize,
    memo: HashMap<State, Option<(f64, usize)>>,
}

impl Search<'_> {
    fn best(&mut self, i: usize, caps: Vec<u32>, bonus_left: usize) -> Option<f64> {
        if i == self.options.len() {
            return (bonus_left == 0).then_some(0.0);
        }
        let key = (i, caps, bonus_left);
        if let Some(hit) = self.memo.get(&key) {
            return hit.map(|(v, _)| v);
        }
        let (_, caps, _) = &key;
        let p = self.spec.paper_subset[i];
        let mut best: Option<(f64, usize)> = None;
        for (c, chosen) in self.options[i].iter().enumerate() {
            if chosen.iter().any(|&j| caps[j] == 0) {
                continue;
            }
            let extra = self.spec.pap_mode == PapMode::FloorCeil && chosen.len() > self.base;
            if extra && bonus_left == 0 {
                continue;
            }
            let mut next = caps.clone();
            let mut gain = 0.0;
            for &j in chosen {
                next[j] -= 1;
                gain += self.s.get(self.spec.reviewer_subset[j], p);
            }
            let Some(rest) = self.best(i + 1, next, bonus_left - extra as usize) else {
                continue;
            };
            let total = gain + rest;
            if best.is_none_or(|(b, _)| total > b) {
                best = Some((total, c));
            }
        }
        self.memo.insert(key, best);
        best.map(|(v, _)| v)
    }
}
