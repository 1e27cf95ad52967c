use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ceil_tol, DrawMode, LoadConfig, SimilarityMatrix, SplitInstance};

/// Optional parameters for [`draw_split`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawParams {
    /// Size of the second-stage reviewer set; defaults to
    /// `floor(beta / (1 + beta) * lambda)`.
    pub r2_size: Option<usize>,
    /// Number of second-stage papers; defaults to `beta * n`. Score modes
    /// usually set this explicitly.
    pub p2_count: Option<usize>,
    /// Per-paper review scores, required by the score modes.
    pub scores: Option<Vec<f64>>,
    /// Percentile (0-100) the score-middle window is centred on.
    pub percentile: f64,
    /// Sets used verbatim by [`DrawMode::Explicit`].
    pub explicit_r2: Vec<usize>,
    pub explicit_p2: Vec<usize>,
}

impl Default for DrawParams {
    fn default() -> Self {
        DrawParams {
            r2_size: None,
            p2_count: None,
            scores: None,
            percentile: 63.0,
            explicit_r2: Vec::new(),
            explicit_p2: Vec::new(),
        }
    }
}

fn sample_sorted(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let (chosen, _) = pool.partial_shuffle(rng, k);
    let mut v = chosen.to_vec();
    v.sort_unstable();
    v
}

/// Draws a second-stage reviewer set and paper set.
///
/// The reviewer set is uniform among subsets of the requested size (or
/// independent per reviewer in [`DrawMode::IndependentInclusion`]); the
/// paper set follows `mode`. Identical inputs and seeds give identical
/// splits.
pub fn draw_split(
    s: &SimilarityMatrix,
    loads: &LoadConfig,
    mode: DrawMode,
    params: &DrawParams,
    seed: u64,
) -> Result<SplitInstance> {
    let lambda = s.n_reviewers();
    let n = s.n_papers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if mode == DrawMode::Explicit {
        for (set, bound, what) in [
            (&params.explicit_r2, lambda, "reviewer"),
            (&params.explicit_p2, n, "paper"),
        ] {
            if let Some(&i) = set.iter().find(|&&i| i >= bound) {
                return Err(Error::config(format!("explicit {what} index {i} out of range")));
            }
        }
        let mut r2 = params.explicit_r2.clone();
        let mut p2 = params.explicit_p2.clone();
        r2.sort_unstable();
        r2.dedup();
        p2.sort_unstable();
        p2.dedup();
        return Ok(SplitInstance { r2, p2, seed, draw_mode: mode });
    }

    if mode == DrawMode::IndependentInclusion {
        let pr = loads.beta / (1.0 + loads.beta);
        let r2 = (0..lambda).filter(|_| rng.random_bool(pr)).collect();
        let p2 = (0..n).filter(|_| rng.random_bool(loads.beta.min(1.0))).collect();
        return Ok(SplitInstance { r2, p2, seed, draw_mode: mode });
    }

    let m2 = params.r2_size.unwrap_or_else(|| loads.default_r2_size(lambda));
    if m2 > lambda {
        return Err(Error::config(format!("|R2| = {m2} exceeds lambda = {lambda}")));
    }
    let r2 = sample_sorted(&mut rng, lambda, m2);

    let p2 = match mode {
        DrawMode::UniformFixedSize => {
            let m = match params.p2_count {
                Some(m) => m,
                None => loads.second_stage_papers(n)?,
            };
            if m > n {
                return Err(Error::config(format!("|P2| = {m} exceeds n = {n}")));
            }
            sample_sorted(&mut rng, n, m)
        }
        DrawMode::ScoreTop | DrawMode::ScoreMiddle => {
            let scores = params
                .scores
                .as_ref()
                .ok_or_else(|| Error::MissingData("score-based draw needs a score vector".into()))?;
            if scores.len() != n {
                return Err(Error::config(format!(
                    "{} scores for {n} papers",
                    scores.len()
                )));
            }
            let m = match params.p2_count {
                Some(m) => m,
                None => loads.second_stage_papers(n)?,
            };
            if m > n {
                return Err(Error::config(format!("|P2| = {m} exceeds n = {n}")));
            }
            if mode == DrawMode::ScoreTop {
                score_top(scores, m)
            } else {
                score_middle(scores, m, params.percentile)?
            }
        }
        DrawMode::Explicit | DrawMode::IndependentInclusion => unreachable!(),
    };
    Ok(SplitInstance { r2, p2, seed, draw_mode: mode })
}

/// The `m` highest-scoring papers; ties prefer the lower index.
pub(crate) fn score_top(scores: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut v = order[..m].to_vec();
    v.sort_unstable();
    v
}

/// A window of `m` papers in ascending score order, centred on the paper at
/// 1-based rank `ceil(percentile / 100 * n)` and clamped into the array.
pub(crate) fn score_middle(scores: &[f64], m: usize, percentile: f64) -> Result<Vec<usize>> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::config(format!("percentile {percentile} outside [0, 100]")));
    }
    let n = scores.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let center = (ceil_tol(percentile / 100.0 * n as f64).max(1) - 1) as usize;
    let start = center.saturating_sub(m / 2).min(n - m);
    let mut v = order[start..start + m].to_vec();
    v.sort_unstable();
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::gen_constant;

    #[test]
    fn uniform_is_deterministic_and_sized() {
        let s = gen_constant(6, 12, 0.5).unwrap();
        let loads = LoadConfig::unit(0.5);
        let p = DrawParams::default();
        let a = draw_split(&s, &loads, DrawMode::UniformFixedSize, &p, 9).unwrap();
        let b = draw_split(&s, &loads, DrawMode::UniformFixedSize, &p, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.r2.len(), 4);
        assert_eq!(a.p2.len(), 3);
        let c = draw_split(&s, &loads, DrawMode::UniformFixedSize, &p, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn reviewer_split_size() {
        let s = gen_constant(2, 4, 0.5).unwrap();
        let split = draw_split(
            &s,
            &LoadConfig::unit(1.0),
            DrawMode::UniformFixedSize,
            &DrawParams::default(),
            1,
        )
        .unwrap();
        assert_eq!(split.r2.len(), 2);
    }

    #[test]
    fn score_modes_need_scores() {
        let s = gen_constant(4, 8, 0.5).unwrap();
        let err = draw_split(&s, &LoadConfig::unit(0.5), DrawMode::ScoreTop, &DrawParams::default(), 0)
            .unwrap_err();
        assert!(matches!(err, Error::MissingData(_)));
    }

    #[test]
    fn score_middle_window() {
        let scores: [f64; 10] = [5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0, 0.0];
        // Ascending order: 9,1,5,3,7,0,8,4,6,2 (indices). 1-based rank 7 sits
        // at position 6; a window of 4 starts two before it.
        let mut sorted: Vec<usize> = (0..10).collect();
        sorted.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let mut expect = sorted[4..8].to_vec();
        expect.sort_unstable();
        assert_eq!(score_middle(&scores, 4, 63.0).unwrap(), expect);
        assert_eq!(expect, vec![0, 4, 7, 8]);
    }

    #[test]
    fn score_middle_clamps_to_edges() {
        let scores: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(score_middle(&scores, 4, 100.0).unwrap(), vec![6, 7, 8, 9]);
        assert_eq!(score_middle(&scores, 4, 0.0).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn score_top_prefers_low_index_on_ties() {
        assert_eq!(score_top(&[1.0, 2.0, 2.0, 0.5], 2), vec![1, 2]);
        assert_eq!(score_top(&[1.0, 1.0, 1.0], 2), vec![0, 1]);
    }

    #[test]
    fn independent_inclusion_rates() {
        let s = gen_constant(200, 300, 0.5).unwrap();
        let split = draw_split(
            &s,
            &LoadConfig::unit(0.5),
            DrawMode::IndependentInclusion,
            &DrawParams::default(),
            3,
        )
        .unwrap();
        // Expected 100 reviewers and 100 papers; 5 sigma is under 45.
        assert!((split.r2.len() as i64 - 100).abs() < 45);
        assert!((split.p2.len() as i64 - 100).abs() < 45);
    }
}
