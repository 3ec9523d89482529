//! Monte-Carlo sampling of measurement outcomes.
//!
//! Shots are drawn in fixed-size batches; batch `b` uses stream `b` of the
//! seed, so the merged counts do not depend on how batches are scheduled.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::trace_product;
use crate::povm::{born, sanitize_probabilities, tvd, Povm, ProbVector, QuantumState};
use crate::rng::Seed;
use crate::scheme::SchemeResult;

/// Shots per PRNG stream.
pub const SHOT_BATCH: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    Direct,
    Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub mode: SampleMode,
    pub shots: u64,
    /// Raw outcome counts; in scheme mode the last entry is the trash outcome.
    pub counts: Vec<u64>,
    /// Counts of target outcomes kept after postselection (scheme mode).
    pub postselected_counts: Option<Vec<u64>>,
    pub success_count: u64,
    pub empirical_success_rate: f64,
    pub empirical_tvd_vs_target: Option<f64>,
    pub seed: Seed,
}

/// Cumulative distribution for inverse-CDF draws.
#[derive(Debug, Clone)]
pub struct Cdf(Vec<f64>);

impl Cdf {
    pub fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        Cdf(p
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.0.last().copied().unwrap_or(1.0);
        self.0.partition_point(|&c| c <= u).min(self.0.len() - 1)
    }
}

fn batched<F>(shots: u64, seed: Seed, outcomes: usize, draw: F) -> Vec<u64>
where
    F: Fn(&mut rand_chacha::ChaCha20Rng) -> usize + Sync,
{
    let batches = shots.div_ceil(SHOT_BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.stream(b);
            let len = SHOT_BATCH.min(shots - b * SHOT_BATCH);
            let mut counts = vec![0u64; outcomes];
            for _ in 0..len {
                counts[draw(&mut rng)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; outcomes],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

fn frequencies(counts: &[u64]) -> Result<Vec<f64>> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::UndefinedStatistics("no shots to estimate frequencies from".into()));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// I.i.d. Born-rule draws.
pub fn sample_direct(povm: &Povm, state: &QuantumState, shots: u64, seed: Seed) -> Result<SampleReport> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let p = born(povm, state)?;
    let cdf = Cdf::new(&p);
    let counts = batched(shots, seed, p.len(), |rng| cdf.sample(rng));
    let tvd = tvd(&frequencies(&counts)?, &p)?;
    Ok(SampleReport {
        mode: SampleMode::Direct,
        shots,
        counts,
        postselected_counts: None,
        success_count: shots,
        empirical_success_rate: 1.0,
        empirical_tvd_vs_target: Some(tvd),
        seed,
    })
}

/// Two-stage draws: a block `γ` with probability `p_γ`, then an outcome of
/// `N^{X_γ}`. Target outcomes are kept, the trash outcome is discarded.
pub fn sample_scheme(scheme: &SchemeResult, state: &QuantumState, shots: u64, seed: Seed) -> Result<SampleReport> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let n = scheme.target.outcomes();
    let block_cdf = Cdf::new(&scheme.mix_probs);
    let mut subs = Vec::with_capacity(scheme.sub_povms.len());
    for s in &scheme.sub_povms {
        let p = born(&s.as_povm()?, state)?;
        subs.push((Cdf::new(&p), s.labels()));
    }
    let counts = batched(shots, seed, n + 1, |rng| {
        let (cdf, labels) = &subs[block_cdf.sample(rng)];
        labels[cdf.sample(rng)]
    });
    let post = counts[..n].to_vec();
    let success: u64 = post.iter().sum();
    let target = born(&scheme.target, state)?;
    let tvd = if success > 0 { Some(tvd(&frequencies(&post)?, &target)?) } else { None };
    Ok(SampleReport {
        mode: SampleMode::Scheme,
        shots,
        counts,
        postselected_counts: Some(post),
        success_count: success,
        empirical_success_rate: success as f64 / shots as f64,
        empirical_tvd_vs_target: tvd,
        seed,
    })
}

/// TVD between observed frequencies and `expected`; in scheme mode only the
/// postselected counts are used.
pub fn empirical_tvd(report: &SampleReport, expected: &ProbVector) -> Result<f64> {
    let counts = report.postselected_counts.as_deref().unwrap_or(&report.counts);
    if counts.len() != expected.len() {
        return Err(Error::Structural(format!(
            "report has {} outcomes, expected distribution has {}",
            counts.len(),
            expected.len()
        )));
    }
    tvd(&frequencies(counts)?, expected)
}

/// Exact conditional law `p(i | i ≤ n)` from the mixture `L`, with the
/// postselection probability.
pub fn exact_postselected_law(scheme: &SchemeResult, state: &QuantumState) -> Result<(ProbVector, f64)> {
    let n = scheme.target.outcomes();
    let raw: Vec<f64> = (0..n).map(|i| trace_product(state.rho(), scheme.mixture.effect(i)).re).collect();
    let total: f64 = raw.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate("postselection probability is zero".into()));
    }
    let law = sanitize_probabilities(raw.iter().map(|x| x / total).collect())?;
    Ok((law, total))
}
