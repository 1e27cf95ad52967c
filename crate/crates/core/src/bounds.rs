//! Lower bounds on the expected value of a uniformly random reviewer split,
//! in terms of the optimal mean similarity at scaled-up loads.
//!
//! Every bound is reported clamped below at 0; the raw expressions go
//! negative for small load scales where they carry no information.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::model::{as_integer, ceil_tol, floor_tol, Assignment, LoadConfig, SimilarityMatrix};
use crate::solver::{solve, MatchSpec, PapMode};

/// Inputs shared by the bound calculators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Load scale: reviewers take at most `mu` papers, papers get `(1+beta) mu`.
    pub mu: u32,
    pub beta: f64,
    /// Mean similarity of an optimal assignment at the scaled loads.
    pub s_mu: f64,
    /// Mean similarity of an optimal assignment at loads `(1, 1 + beta)`.
    pub s_1: f64,
}

impl BoundInputs {
    pub fn new(mu: u32, beta: f64, s_mu: f64, s_1: f64) -> Result<Self> {
        let b = BoundInputs { mu, beta, s_mu, s_1 };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        if self.mu == 0 {
            return Err(Error::config("mu must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::config(format!("beta = {} outside (0, 1]", self.beta)));
        }
        for (v, name) in [(self.s_mu, "s_mu"), (self.s_1, "s_1")] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// `ceil(beta mu) - floor(beta mu)`.
    pub fn eps_thm5(&self) -> f64 {
        let bm = self.beta * self.mu as f64;
        (ceil_tol(bm) - floor_tol(bm)) as f64
    }

    /// `ceil(mu / 4) - mu / 4`.
    pub fn eps_thm6(&self) -> f64 {
        let m = self.mu as f64 / 4.0;
        ceil_tol(m) as f64 - m
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `E[min(X / ell, 1)]` for `X ~ Binomial(n, p)`, summed exactly.
///
/// Uses `E = 1 - sum_{x < ell} pmf(x) (1 - x / ell)` with the pmf built by
/// the log-space recurrence `pmf(x+1) = pmf(x) (n-x)/(x+1) p/q`.
pub fn binom_min_expectation(n: u64, p: f64, ell: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
    assert!(ell >= 1.0, "threshold {ell} below 1");
    if n == 0 {
        return 0.0;
    }
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return (n as f64 / ell).min(1.0);
    }
    let q = 1.0 - p;
    let log_ratio = (p / q).ln();
    let mut log_pmf = n as f64 * q.ln();
    let mut deficit = 0.0;
    let mut x = 0u64;
    while (x as f64) < ell && x <= n {
        deficit += log_pmf.exp() * (1.0 - x as f64 / ell);
        if x == n {
            break;
        }
        log_pmf += ((n - x) as f64 / (x + 1) as f64).ln() + log_ratio;
        x += 1;
    }
    (1.0 - deficit).clamp(0.0, 1.0)
}

/// Normal-approximation lower bound on `E[min(X / ell, 1)]`:
/// `1 - sqrt(q / (2 pi n p)) - Phi((ell - n p) / sqrt(n p q)) (1 - n p / ell)`.
pub fn normal_min_expectation(n: u64, p: f64, ell: f64) -> Result<f64> {
    if n == 0 || !(p > 0.0 && p < 1.0) {
        return Err(Error::Precondition(format!(
            "normal approximation needs n >= 1 and 0 < p < 1, got n = {n}, p = {p}"
        )));
    }
    let np = n as f64 * p;
    if np > ell * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("n p = {np} exceeds ell = {ell}")));
    }
    Ok(normal_term(n as f64, p, ell))
}

fn normal_term(n: f64, p: f64, ell: f64) -> f64 {
    let q = 1.0 - p;
    let np = n * p;
    // Degenerate distributions: X = np exactly.
    if q <= 0.0 || np <= 0.0 {
        return (np / ell).min(1.0);
    }
    let tail = 1.0 - np / ell;
    let phi = if tail == 0.0 {
        0.0
    } else {
        std_normal_cdf((ell - np) / (np * q).sqrt())
    };
    1.0 - (q / (2.0 * PI * np)).sqrt() - phi * tail
}

fn thm5_terms(b: &BoundInputs) -> (f64, f64, f64, f64) {
    let mu = b.mu as f64;
    let f = floor_tol((1.0 + b.beta) * mu) as f64;
    let c = ceil_tol(b.beta * mu) as f64;
    let c_prime = ceil_tol((1.0 + b.beta) * mu) as f64;
    (mu, f, c, c_prime)
}

/// Closed form for integral `beta mu`:
/// `s_mu [1 - sqrt(beta / (2 pi (1+beta)^2 mu)) (2 sqrt(1/(1+beta)) + sqrt(1-beta))]`.
pub fn thm5_bound_simple(b: &BoundInputs) -> Result<f64> {
    b.check()?;
    if as_integer(b.beta * b.mu as f64).is_none() {
        return Err(Error::config(format!(
            "beta * mu = {} is not an integer; use the general form",
            b.beta * b.mu as f64
        )));
    }
    let beta = b.beta;
    let mu = b.mu as f64;
    let coef = (beta / (2.0 * PI * (1.0 + beta).powi(2) * mu)).sqrt();
    let bracket = 1.0 - coef * (2.0 * (1.0 / (1.0 + beta)).sqrt() + (1.0 - beta).sqrt());
    Ok((b.s_mu * bracket).max(0.0))
}

/// Form valid for any `beta mu`, with rounding gap `eps`.
pub fn thm5_bound_general(b: &BoundInputs) -> Result<f64> {
    b.check()?;
    let beta = b.beta;
    let (_, f, c, c_prime) = thm5_terms(b);
    let eps = b.eps_thm5();
    let coef = (beta / (2.0 * PI * (1.0 + beta) * f)).sqrt();
    let bracket = 1.0
        - coef * (2.0 / (1.0 + beta).sqrt() + (1.0 - beta).sqrt())
        - (1.0 + 2.0 * beta) * eps / ((1.0 + beta) * c);
    Ok((b.s_mu * bracket * (1.0 - eps / c_prime)).max(0.0))
}

/// The binomial expression before any approximation:
/// `s_mu (mu / C') [E(F, 1/(1+beta), mu) + beta (E(F, beta/(1+beta), C) + E(mu, beta, C) - 1)]`
/// with `F = floor((1+beta) mu)`, `C = ceil(beta mu)`, `C' = ceil((1+beta) mu)`
/// and `E(N, p, l) = E[min(X/l, 1)]` for `X ~ Binomial(N, p)`.
pub fn thm5_bound_exact(b: &BoundInputs) -> Result<f64> {
    b.check()?;
    let beta = b.beta;
    let (mu, f, c, c_prime) = thm5_terms(b);
    let e1 = binom_min_expectation(f as u64, 1.0 / (1.0 + beta), mu);
    let e2 = binom_min_expectation(f as u64, beta / (1.0 + beta), c);
    let e3 = binom_min_expectation(b.mu as u64, beta, c);
    let v = b.s_mu * (mu / c_prime) * (e1 + beta * (e2 + e3 - 1.0));
    Ok(v.max(0.0))
}

/// The exact form with each binomial term replaced by its normal
/// approximation [`normal_min_expectation`].
pub fn thm5_bound_normal(b: &BoundInputs) -> Result<f64> {
    b.check()?;
    let beta = b.beta;
    let (mu, f, c, c_prime) = thm5_terms(b);
    let n1 = normal_term(f, 1.0 / (1.0 + beta), mu);
    let n2 = normal_term(f, beta / (1.0 + beta), c);
    let n3 = normal_term(mu, beta, c);
    let v = b.s_mu * (mu / c_prime) * (n1 + beta * (n2 + n3 - 1.0));
    Ok(v.max(0.0))
}

fn require_beta_one(b: &BoundInputs) -> Result<()> {
    b.check()?;
    if (b.beta - 1.0).abs() > 1e-12 {
        return Err(Error::Unsupported(format!(
            "the two-round bound is stated for beta = 1, got {}",
            b.beta
        )));
    }
    Ok(())
}

/// `(3/4) s_1 + (1 - 1.44 / sqrt(mu)) s_mu / 4`, for `mu` a multiple of 4.
pub fn thm6_bound_simple(b: &BoundInputs) -> Result<f64> {
    require_beta_one(b)?;
    if b.mu < 4 || !b.mu.is_multiple_of(4) {
        return Err(Error::config(format!("mu = {} must be a positive multiple of 4", b.mu)));
    }
    let mu = b.mu as f64;
    Ok((0.75 * b.s_1 + (1.0 - 1.44 / mu.sqrt()) * b.s_mu / 4.0).max(0.0))
}

/// Bracket of the general two-round form:
/// `1 - (sqrt 7 + sqrt 6) / (2 sqrt(pi mu)) - 3 eps / ceil(mu/4)`.
pub fn thm6_general_bracket(mu: u32) -> f64 {
    let m = mu as f64;
    let theta = ceil_tol(m / 4.0) as f64;
    let eps = theta - m / 4.0;
    1.0 - (7f64.sqrt() + 6f64.sqrt()) / (2.0 * (PI * m).sqrt()) - 3.0 * eps / theta
}

/// `(3/4) s_1 + (s_mu / 4) * bracket` with [`thm6_general_bracket`].
pub fn thm6_bound_general(b: &BoundInputs) -> Result<f64> {
    require_beta_one(b)?;
    Ok((0.75 * b.s_1 + b.s_mu / 4.0 * thm6_general_bracket(b.mu)).max(0.0))
}

/// Two-round form before the last simplification, with normal CDF terms.
pub fn thm6_bound_normal(b: &BoundInputs) -> Result<f64> {
    require_beta_one(b)?;
    let m = b.mu as f64;
    let theta = ceil_tol(m / 4.0) as f64;
    let eps = theta - m / 4.0;
    let gap = 1.0 - (m / 4.0) / theta;
    let phis = if gap == 0.0 {
        0.0
    } else {
        std_normal_cdf(eps / (7.0 / 32.0 * m).sqrt()) + std_normal_cdf(eps / (3.0 / 16.0 * m).sqrt()) + 1.0
    };
    let bracket = 1.0 - (7f64.sqrt() + 6f64.sqrt()) / (2.0 * (PI * m).sqrt()) - gap * phis;
    Ok((0.75 * b.s_1 + b.s_mu / 4.0 * bracket).max(0.0))
}

/// Second-round factor of the exact two-round bound:
/// `(1/4) [E(2mu, 1/8, theta) + E(mu, 1/4, theta) - mu / (4 theta)]` with
/// `theta = ceil(mu / 4)`. The bound is `(3/4) s_1 + factor * s_mu`.
pub fn thm6_bound_exact(mu: u32) -> Result<f64> {
    if mu == 0 {
        return Err(Error::config("mu must be at least 1"));
    }
    let m = mu as f64;
    let theta = ceil_tol(m / 4.0) as f64;
    let e1 = binom_min_expectation(2 * mu as u64, 1.0 / 8.0, theta);
    let e2 = binom_min_expectation(mu as u64, 0.25, theta);
    Ok(0.25 * (e1 + e2 - m / (4.0 * theta)))
}

/// `(3/4) s_1 + thm6_bound_exact(mu) * s_mu`, clamped at 0.
pub fn thm6_bound_exact_total(b: &BoundInputs) -> Result<f64> {
    require_beta_one(b)?;
    Ok((0.75 * b.s_1 + thm6_bound_exact(b.mu)? * b.s_mu).max(0.0))
}

/// Optimal assignment with reviewer load `mu` and paper load `(1+beta) mu`
/// (floor-ceil loads when that is not an integer), avoiding the pairs of
/// `exclude`. Returns it with its mean similarity `value / ((1+beta) mu n)`.
pub fn compute_s_mu(
    s: &SimilarityMatrix,
    loads: &LoadConfig,
    mu: u32,
    exclude: Option<&Assignment>,
) -> Result<(Assignment, f64)> {
    if mu == 0 {
        return Err(Error::config("mu must be at least 1"));
    }
    let ell_pap = (1.0 + loads.beta) * mu as f64;
    let mode = if as_integer(ell_pap).is_some() {
        PapMode::Exact
    } else {
        PapMode::FloorCeil
    };
    let spec = MatchSpec {
        reviewer_subset: (0..s.n_reviewers()).collect(),
        paper_subset: (0..s.n_papers()).collect(),
        ell_rev: mu,
        ell_pap: as_integer(ell_pap).map_or(ell_pap, |v| v as f64),
        pap_mode: mode,
        excluded_pairs: exclude.map_or_else(Vec::new, |a| a.pairs().to_vec()),
    };
    let a = solve(s, &spec)?;
    let denom = ell_pap * s.n_papers() as f64;
    if denom <= 0.0 {
        return Err(Error::config("no papers"));
    }
    let v = a.value() / denom;
    Ok((a, v))
}
