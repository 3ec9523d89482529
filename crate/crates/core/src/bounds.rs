//! Analytic bounds on success probabilities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{fourier_povm, haar_random_povm};
use crate::povm::Povm;
use crate::rng::Seed;

/// Constants of the general concentration bound.
pub const GENERAL_C: f64 = 6.79e-2;
pub const GENERAL_A: f64 = 0.307;
/// Constants of the `m = d` concentration bound.
pub const SQUARE_C: f64 = 6.74e-2;
pub const SQUARE_A: f64 = 1.79;

/// Traces `w_j = tr M_j` of a rank-one POVM.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>, dim: usize) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let s: f64 = w.iter().sum();
        if (s - dim as f64).abs() > 1e-8 {
            return Err(Error::Validation(format!("weights sum to {s}, expected {dim}")));
        }
        Ok(WeightVector(w))
    }

    pub fn from_povm(povm: &Povm) -> Result<Self> {
        Self::new(povm.weights(), povm.dim())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.0.iter().map(|w| w * w).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    pub q: f64,
    /// Critical white-noise visibility satisfies `t ≥ t_lower`.
    pub t_lower: f64,
    /// Generalized robustness satisfies `R ≤ r_upper`.
    pub r_upper: f64,
}

pub fn visibility_robustness(q: f64) -> Result<BoundsReport> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1], got {q}")));
    }
    Ok(BoundsReport { q, t_lower: q, r_upper: 1.0 / q - 1.0 })
}

/// `(Σ of the m largest w_j) / Σ_j w_j²`, an upper bound on the success
/// probability of any `m`-outcome simulation of a rank-one POVM.
pub fn q_upper_bound_rank_one(weights: &WeightVector, m: usize) -> Result<f64> {
    let w = weights.as_slice();
    if m == 0 || m > w.len() {
        return Err(Error::InvalidArgument(format!("m = {m} outside 1..={}", w.len())));
    }
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = sorted[..m].iter().sum();
    Ok(top / weights.sum_of_squares())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub threshold: f64,
    pub prob_lower_bound: f64,
}

/// Concentration threshold for `q_succ` of Haar-random rank-one POVMs under
/// the standard partition. For `m < d`, `ε ∈ (0, (√5−1)/2)`; for `m = d`,
/// `ε ∈ (0, 1)`.
pub fn theorem2_threshold(d: usize, n: usize, m: usize, eps: f64) -> Result<Threshold> {
    if d < 2 || n < d || n > d * d {
        return Err(Error::InvalidArgument(format!("need 2 <= d <= n <= d^2, got d = {d}, n = {n}")));
    }
    if m < 2 || m > d {
        return Err(Error::InvalidArgument(format!("need 2 <= m <= d, got m = {m}")));
    }
    let (nf, df, mf) = (n as f64, d as f64, m as f64);
    let (threshold, prob) = if m == d {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {eps}")));
        }
        (SQUARE_C * (1.0 - eps), 1.0 - nf / (df - 1.0) * (-SQUARE_A * df * eps * eps).exp())
    } else {
        let upper = (5f64.sqrt() - 1.0) / 2.0;
        if !(eps > 0.0 && eps < upper) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, {upper:.6}), got {eps}")));
        }
        let gamma = 2.0 * (mf - 1.0) / df;
        let s = (1.0 + gamma.sqrt()).powi(2);
        (
            GENERAL_C * gamma / s * (1.0 - eps),
            1.0 - nf / (mf - 1.0) * (-GENERAL_A * s * df * eps * eps).exp(),
        )
    };
    Ok(Threshold { threshold: threshold.clamp(0.0, 1.0), prob_lower_bound: prob.clamp(0.0, 1.0) })
}

/// The `ε → 0` limit of [`theorem2_threshold`]: `c` for `m = d`, otherwise
/// `c·γ/(1+√γ)²` with `γ = 2(m−1)/d`.
pub fn theorem2_floor(d: usize, m: usize) -> Result<f64> {
    if m < 2 || m > d {
        return Err(Error::InvalidArgument(format!("need 2 <= m <= d, got m = {m}, d = {d}")));
    }
    if m == d {
        return Ok(SQUARE_C);
    }
    let gamma = 2.0 * (m as f64 - 1.0) / d as f64;
    Ok(GENERAL_C * gamma / (1.0 + gamma.sqrt()).powi(2))
}

/// Fourier frame attains `Σ w² = d²/n` and no sampled Haar frame goes below it.
pub fn fourier_is_minimizer_check(d: usize, n: usize, trials: usize, seed: Seed) -> Result<bool> {
    let floor = (d * d) as f64 / n as f64;
    let fourier = WeightVector::from_povm(&fourier_povm(d, n)?)?.sum_of_squares();
    if (fourier - floor).abs() > 1e-10 {
        return Ok(false);
    }
    for t in 0..trials as u64 {
        let w = WeightVector::from_povm(&haar_random_povm(d, n, seed.derive(t))?)?;
        if w.sum_of_squares() < floor - 1e-10 {
            return Ok(false);
        }
    }
    Ok(true)
}
