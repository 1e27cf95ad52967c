use serde::{Deserialize, Serialize};

use super::draw::{draw_split, DrawParams};
use super::{split_value, split_value_underloaded};
use crate::error::{Error, Result};
use crate::model::{derive_seed, DrawMode, LoadConfig, SimilarityMatrix};

/// Which second-stage reviewers the estimator uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum R2Choice {
    /// Keep this reviewer set for every sample.
    Fixed(Vec<usize>),
    /// Draw a fresh reviewer set with every paper sample.
    Redraw,
}

/// Monte Carlo mean and standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_samples)`; 0 for one sample.
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Set when `n_samples == 1`, where no spread can be estimated.
    pub single_sample: bool,
}

impl EstimatorResult {
    pub fn from_values(values: &[f64], seed: u64) -> Self {
        let k = values.len();
        let mean = values.iter().sum::<f64>() / k as f64;
        let stderr = if k > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        EstimatorResult {
            mean,
            stderr,
            n_samples: k,
            seed,
            single_sample: k == 1,
        }
    }
}

/// Estimates `f(R2)`, the expected split value over random second-stage
/// paper sets (or `E[f(R2)]` with [`R2Choice::Redraw`]).
///
/// Sample `i` is drawn with seed `derive_seed(seed, [i])`, so samples do not
/// depend on each other. With [`DrawMode::IndependentInclusion`] the
/// realised sets vary in size and each sample is the underloaded value Q'.
pub fn estimate_f(
    s: &SimilarityMatrix,
    r2: &R2Choice,
    loads: &LoadConfig,
    n_samples: usize,
    seed: u64,
    p2_mode: DrawMode,
    params: &DrawParams,
) -> Result<EstimatorResult> {
    if n_samples == 0 {
        return Err(Error::config("need at least one sample"));
    }
    let mut values = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let split = draw_split(s, loads, p2_mode, params, derive_seed(seed, &[i as u64]))?;
        let r2 = match r2 {
            R2Choice::Fixed(v) => v.as_slice(),
            R2Choice::Redraw => split.r2.as_slice(),
        };
        let q = if p2_mode == DrawMode::IndependentInclusion {
            split_value_underloaded(s, r2, &split.p2, loads)?
        } else {
            split_value(s, r2, &split.p2, loads)?
        };
        values.push(q.mean_sim);
    }
    Ok(EstimatorResult::from_values(&values, seed))
}
