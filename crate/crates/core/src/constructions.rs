//! Instance generators: the adversarial constructions used to analyse
//! random splitting, plus seeded synthetic instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{as_integer, LoadConfig, SimilarityMatrix};

/// Reviewer and paper embeddings whose inner products are similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankFactors {
    pub k: usize,
    pub reviewer_vectors: Vec<Vec<f64>>,
    pub paper_vectors: Vec<Vec<f64>>,
}

impl LowRankFactors {
    /// `S[r][p] = <u_r, v_p>`, clamped into `[0, 1]` to absorb rounding.
    pub fn similarity(&self) -> SimilarityMatrix {
        let rows = self
            .reviewer_vectors
            .iter()
            .map(|u| {
                self.paper_vectors
                    .iter()
                    .map(|v| dot(u, v).clamp(0.0, 1.0))
                    .collect()
            })
            .collect();
        SimilarityMatrix::from_rows(rows).expect("clamped inner products are valid similarities")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn beta_n(n: usize, beta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::config(format!("beta = {beta} outside (0, 1]")));
    }
    as_integer(beta * n as f64)
        .map(|m| m as usize)
        .ok_or_else(|| Error::config(format!("beta * n = {} is not an integer", beta * n as f64)))
}

/// `(1 + beta) n x n` instance where paper `i` has similarity 1 with
/// reviewer `i` and, for `i < beta n`, with reviewer `n + i`; all else 0.
pub fn gen_thm2(n: usize, beta: f64) -> Result<SimilarityMatrix> {
    if n == 0 {
        return Err(Error::config("need at least one paper"));
    }
    let m = beta_n(n, beta)?;
    SimilarityMatrix::from_fn(n + m, n, |r, p| {
        if r == p || (r >= n && r - n == p) {
            1.0
        } else {
            0.0
        }
    })
}

/// `2n x n` block instance of rank `k`: a large group of `ceil(n/2)` papers
/// and `2 ceil(n/2)` reviewers, then `k - 1` groups of one paper and two
/// reviewers. Similarity is 1 inside a group and 0 elsewhere, including the
/// rows and columns that belong to no group.
pub fn gen_thm4_groups(n: usize, k: usize) -> Result<SimilarityMatrix> {
    if k == 0 || 2 * k > n {
        return Err(Error::config(format!("need 1 <= k <= n/2, got k = {k}, n = {n}")));
    }
    let h = n.div_ceil(2);
    let paper_group = |p: usize| {
        if p < h {
            Some(0)
        } else if p - h < k - 1 {
            Some(1 + p - h)
        } else {
            None
        }
    };
    let reviewer_group = |r: usize| {
        if r < 2 * h {
            Some(0)
        } else if (r - 2 * h) / 2 < k - 1 {
            Some(1 + (r - 2 * h) / 2)
        } else {
            None
        }
    };
    SimilarityMatrix::from_fn(2 * n, n, |r, p| match (reviewer_group(r), paper_group(p)) {
        (Some(a), Some(b)) if a == b => 1.0,
        _ => 0.0,
    })
}

/// Papers at the first `n` points (lexicographic order) of an evenly spaced
/// grid in `[0, 1/sqrt(k)]^k` with `z` points per axis, `z` the smallest
/// integer with `z^k >= n`. Reviewers `i` and `n + i` sit on paper `i`'s point.
pub fn gen_thm4_grid(n: usize, k: usize) -> Result<LowRankFactors> {
    if k == 0 {
        return Err(Error::config("rank k must be at least 1"));
    }
    let mut z = 1usize;
    while z.checked_pow(k as u32).is_some_and(|v| v < n) {
        z += 1;
    }
    let side = 1.0 / (k as f64).sqrt();
    let coord = |j: usize| if z == 1 { 0.0 } else { j as f64 / (z - 1) as f64 * side };
    let papers: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            // Mixed-radix digits of i, most significant first.
            let mut digits = vec![0usize; k];
            let mut rest = i;
            for d in digits.iter_mut().rev() {
                *d = rest % z;
                rest /= z;
            }
            digits.into_iter().map(coord).collect()
        })
        .collect();
    let reviewers = papers.iter().chain(papers.iter()).cloned().collect();
    Ok(LowRankFactors {
        k,
        reviewer_vectors: reviewers,
        paper_vectors: papers,
    })
}

/// Instance encoding a 3-dimensional matching problem as a sampled-objective
/// maximisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Gadget {
    pub matrix: SimilarityMatrix,
    /// Second-stage paper sets: the X, Y and Z element papers.
    pub samples: [Vec<usize>; 3],
    pub loads: LoadConfig,
}

/// Builds the reduction instance for `tuples` over three universes of size
/// `s`.
///
/// Papers `0..s`, `s..2s`, `2s..3s` stand for the X, Y and Z elements; the
/// remaining `|T| - s` papers are dummies every reviewer likes. Reviewers
/// `0..3s` are element specialists, reviewer `3s + t` likes the three
/// element papers of tuple `t`. All loads are 1 and `beta = s / n`.
pub fn gen_3dm_gadget(s: usize, tuples: &[(usize, usize, usize)]) -> Result<Gadget> {
    if s == 0 {
        return Err(Error::config("universe size must be at least 1"));
    }
    if tuples.len() < s {
        return Err(Error::config(format!(
            "need at least s = {s} tuples, got {}",
            tuples.len()
        )));
    }
    if let Some(t) = tuples.iter().find(|&&(x, y, z)| x >= s || y >= s || z >= s) {
        return Err(Error::config(format!("tuple {t:?} has an element outside 0..{s}")));
    }
    let nt = tuples.len();
    let n = nt + 2 * s;
    let lambda = nt + 3 * s;
    let matrix = SimilarityMatrix::from_fn(lambda, n, |r, p| {
        if p >= 3 * s {
            return 1.0;
        }
        if r < 3 * s {
            return if r == p { 1.0 } else { 0.0 };
        }
        let (x, y, z) = tuples[r - 3 * s];
        if p == x || p == s + y || p == 2 * s + z {
            1.0
        } else {
            0.0
        }
    })?;
    let samples = [
        (0..s).collect(),
        (s..2 * s).collect(),
        (2 * s..3 * s).collect(),
    ];
    let loads = LoadConfig::new(1, 1, 1, s as f64 / n as f64)?;
    Ok(Gadget { matrix, samples, loads })
}

/// Whether `tuples` contain a perfect 3-dimensional matching (exhaustive).
pub fn has_perfect_3dm(s: usize, tuples: &[(usize, usize, usize)]) -> bool {
    fn go(
        x: usize,
        s: usize,
        tuples: &[(usize, usize, usize)],
        used_y: &mut [bool],
        used_z: &mut [bool],
    ) -> bool {
        if x == s {
            return true;
        }
        for &(tx, ty, tz) in tuples {
            if tx == x && !used_y[ty] && !used_z[tz] {
                used_y[ty] = true;
                used_z[tz] = true;
                let ok = go(x + 1, s, tuples, used_y, used_z);
                used_y[ty] = false;
                used_z[tz] = false;
                if ok {
                    return true;
                }
            }
        }
        false
    }
    go(0, s, tuples, &mut vec![false; s], &mut vec![false; s])
}

/// Seeded random nonnegative rank-`k` instance: factor entries uniform in
/// `[0, 1/sqrt(k)]`, so every inner product lies in `[0, 1]`.
pub fn gen_random_lowrank(
    n: usize,
    lambda: usize,
    k: usize,
    seed: u64,
) -> Result<(LowRankFactors, SimilarityMatrix)> {
    if k == 0 {
        return Err(Error::config("rank k must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (k as f64).sqrt();
    let mut draw = |count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..k).map(|_| rng.random::<f64>() * scale).collect())
            .collect()
    };
    let reviewer_vectors = draw(lambda);
    let paper_vectors = draw(n);
    let f = LowRankFactors {
        k,
        reviewer_vectors,
        paper_vectors,
    };
    let s = f.similarity();
    Ok((f, s))
}

/// Seeded instance where each paper has one "star" reviewer with high
/// similarity and uniformly low similarity elsewhere. Paper `p`'s star is
/// reviewer `p % lambda`.
pub fn gen_star(n: usize, lambda: usize, seed: u64) -> Result<SimilarityMatrix> {
    if lambda == 0 {
        return Err(Error::config("need at least one reviewer"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SimilarityMatrix::from_fn(lambda, n, |r, p| {
        let noise = rng.random::<f64>();
        if p % lambda == r {
            0.9 + 0.1 * noise
        } else {
            0.2 * noise
        }
    })
}

/// Matrix with every entry equal to `value`.
pub fn gen_constant(n: usize, lambda: usize, value: f64) -> Result<SimilarityMatrix> {
    SimilarityMatrix::from_fn(lambda, n, |_, _| value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(s: &SimilarityMatrix) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for r in 0..s.n_reviewers() {
            for p in 0..s.n_papers() {
                if s.get(r, p) == 1.0 {
                    v.push((r, p));
                }
            }
        }
        v
    }

    #[test]
    fn gen_thm2_small() {
        let s = gen_thm2(2, 1.0).unwrap();
        assert_eq!((s.n_reviewers(), s.n_papers()), (4, 2));
        assert_eq!(ones(&s), vec![(0, 0), (1, 1), (2, 0), (3, 1)]);
    }

    #[test]
    fn thm2_single_second_stage_paper() {
        let s = gen_thm2(5, 0.2).unwrap();
        assert_eq!(s.n_reviewers(), 6);
        assert_eq!(ones(&s).len(), 6);
        assert!(gen_thm2(5, 0.3).is_err());
    }

    #[test]
    fn groups_layout() {
        let s = gen_thm4_groups(4, 2).unwrap();
        assert_eq!((s.n_reviewers(), s.n_papers()), (8, 4));
        let mut expect = Vec::new();
        for r in 0..4 {
            for p in 0..2 {
                expect.push((r, p));
            }
        }
        expect.push((4, 2));
        expect.push((5, 2));
        assert_eq!(ones(&s), expect);
        assert!(gen_thm4_groups(4, 3).is_err());
        let one = gen_thm4_groups(5, 1).unwrap();
        assert_eq!(ones(&one).len(), 3 * 6);
    }

    #[test]
    fn grid_one_dimensional() {
        let f = gen_thm4_grid(3, 1).unwrap();
        let pts: Vec<f64> = f.paper_vectors.iter().map(|v| v[0]).collect();
        assert_eq!(pts, vec![0.0, 0.5, 1.0]);
        let s = f.similarity();
        assert_eq!(s.n_reviewers(), 6);
        for (i, x) in pts.iter().enumerate() {
            assert_eq!(s.get(i, i), x * x);
            assert_eq!(s.get(3 + i, i), x * x);
        }
    }

    #[test]
    fn grid_points_are_distinct_and_spaced() {
        for (n, k) in [(10, 2), (27, 3), (50, 2), (7, 3)] {
            let f = gen_thm4_grid(n, k).unwrap();
            let min_gap = 1.0 / (2.0 * (k as f64).sqrt() * (n as f64).powf(1.0 / k as f64));
            for i in 0..n {
                for j in 0..i {
                    let d: f64 = f.paper_vectors[i]
                        .iter()
                        .zip(&f.paper_vectors[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    assert!(d >= min_gap - 1e-12, "n={n} k={k} d={d}");
                }
            }
        }
    }

    #[test]
    fn gadget_shape() {
        let g = gen_3dm_gadget(1, &[(0, 0, 0)]).unwrap();
        assert_eq!((g.matrix.n_reviewers(), g.matrix.n_papers()), (4, 3));
        assert_eq!(g.samples, [vec![0], vec![1], vec![2]]);
        assert!((g.loads.beta - 1.0 / 3.0).abs() < 1e-15);
        assert!(gen_3dm_gadget(2, &[(0, 0, 2), (1, 1, 1)]).is_err());
        assert!(gen_3dm_gadget(2, &[(0, 0, 0)]).is_err());
    }

    #[test]
    fn perfect_matching_detection() {
        assert!(has_perfect_3dm(2, &[(0, 0, 1), (1, 1, 0)]));
        assert!(!has_perfect_3dm(2, &[(0, 0, 1), (0, 1, 0)]));
    }

    #[test]
    fn lowrank_is_deterministic_and_in_range() {
        let (_, a) = gen_random_lowrank(8, 10, 3, 42).unwrap();
        let (_, b) = gen_random_lowrank(8, 10, 3, 42).unwrap();
        assert_eq!(a, b);
    }
}
