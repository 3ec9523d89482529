//! Simulation of an `n`-outcome POVM by a random choice of few-outcome
//! sub-measurements followed by postselection.
//!
//! For a partition `{X_γ}` of the outcomes, block `γ` is measured with
//! `N^γ = (λ_γ M_i for i∈X_γ, 𝟙 − λ_γ Σ_{X_γ} M_i)` where
//! `λ_γ = ‖Σ_{X_γ} M_i‖⁻¹`. Choosing `γ` with probability `q/λ_γ` gives the
//! mixture `L = (q M_1, …, q M_n, (1−q)𝟙)` with `q = (Σ_γ λ_γ⁻¹)⁻¹`.
//!
//! Outcome labels are 0-based in this API; the trash outcome of an
//! `n`-outcome target has index `n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c, identity, max_abs_entry, max_eigenvalue, min_eigenvalue, operator_norm, truncation, CMatrix, PSD_TOL};
use crate::povm::{mix, Povm, ProbVector};

/// Block sums with norm at or below this are treated as zero.
pub const DEGENERATE_BLOCK_NORM: f64 = 1e-14;

/// Disjoint blocks covering `0..n`, each of size at most `cap`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    cap: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, cap: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if cap == 0 {
            return Err(Error::InvalidPartition("block size cap must be at least 1".into()));
        }
        let mut seen = vec![false; n];
        for (g, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(Error::InvalidPartition(format!("block {} is empty", g + 1)));
            }
            if b.len() > cap {
                return Err(Error::InvalidPartition(format!(
                    "block {} has {} elements, cap is {}",
                    g + 1,
                    b.len(),
                    cap
                )));
            }
            for &i in b {
                if i >= n {
                    return Err(Error::InvalidPartition(format!("label {} outside [{}]", i + 1, n)));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!("label {} appears twice", i + 1)));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("label {} is not covered", missing + 1)));
        }
        Ok(Partition { n, cap, blocks })
    }

    /// Blocks given with labels in `1..=n`.
    pub fn from_one_based(n: usize, cap: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut zero = Vec::with_capacity(blocks.len());
        for b in blocks {
            let mut out = Vec::with_capacity(b.len());
            for i in b {
                if i == 0 {
                    return Err(Error::InvalidPartition("labels start at 1".into()));
                }
                out.push(i - 1);
            }
            zero.push(out);
        }
        Self::new(n, cap, zero)
    }

    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.iter().map(|i| i + 1).collect()).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Outcome count `m = cap + 1` of the sub-measurements.
    pub fn m(&self) -> usize {
        self.cap + 1
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `owner[i]` is the index of the block containing outcome `i`.
    pub fn owners(&self) -> Vec<usize> {
        let mut owner = vec![0; self.n];
        for (g, b) in self.blocks.iter().enumerate() {
            for &i in b {
                owner[i] = g;
            }
        }
        owner
    }

    /// Split block `g` at position `at`, keeping the cap.
    pub fn split_block(&self, g: usize, at: usize) -> Result<Self> {
        let b = self
            .blocks
            .get(g)
            .ok_or_else(|| Error::InvalidArgument(format!("no block {}", g + 1)))?;
        if at == 0 || at >= b.len() {
            return Err(Error::InvalidArgument("split point must leave both parts nonempty".into()));
        }
        let mut blocks = self.blocks.clone();
        let tail = blocks[g].split_off(at);
        blocks.push(tail);
        Self::new(self.n, self.cap, blocks)
    }
}

/// `‖Σ_{i∈block} M_i‖` by Hermitian eigensolve.
pub fn block_norm(target: &Povm, block: &[usize]) -> f64 {
    max_eigenvalue(&target.block_sum(block)).max(0.0)
}

/// `‖T_X‖²` for the `d×n` generator frame `T`: the same quantity as
/// [`block_norm`] for rank-one POVMs, computed by SVD of the truncation.
pub fn block_norm_from_generator(frame: &CMatrix, block: &[usize]) -> Result<f64> {
    let t = truncation(frame, frame.nrows(), block)?;
    Ok(operator_norm(&t)?.powi(2))
}

fn check_partition(target: &Povm, partition: &Partition) -> Result<()> {
    if partition.n() != target.outcomes() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} labels but the POVM has {} outcomes",
            partition.n(),
            target.outcomes()
        )));
    }
    Ok(())
}

/// `q_succ = (Σ_γ ‖Σ_{i∈X_γ} M_i‖)⁻¹`.
pub fn success_probability(target: &Povm, partition: &Partition) -> Result<f64> {
    check_partition(target, partition)?;
    let total: f64 = partition.blocks().iter().map(|b| block_norm(target, b)).sum();
    Ok(1.0 / total)
}

/// `q_succ` evaluated through the generator frame, `(Σ_γ ‖T_{X_γ}‖²)⁻¹`.
pub fn success_probability_from_generator(frame: &CMatrix, partition: &Partition) -> Result<f64> {
    if partition.n() != frame.ncols() {
        return Err(Error::InvalidPartition("partition does not match generator".into()));
    }
    let mut total = 0.0;
    for b in partition.blocks() {
        total += block_norm_from_generator(frame, b)?;
    }
    Ok(1.0 / total)
}

/// One sub-measurement `N^{X_γ}`; only its nonzero-by-construction effects
/// are stored, with the label map kept alongside.
#[derive(Debug, Clone)]
pub struct SubPovm {
    /// Target labels of the block, in block order.
    pub block: Vec<usize>,
    pub lambda: f64,
    /// `λ M_i` for `i ∈ block`, then the trash effect.
    pub effects: Vec<CMatrix>,
    /// Outcome count of the target; the trash outcome carries this label.
    pub target_outcomes: usize,
}

impl SubPovm {
    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    pub fn trash(&self) -> &CMatrix {
        self.effects.last().expect("sub-POVM always has a trash effect")
    }

    /// Target label of each stored effect; the trash maps to `n`.
    pub fn labels(&self) -> Vec<usize> {
        let mut l = self.block.clone();
        l.push(self.target_outcomes);
        l
    }

    /// The stored effects as a stand-alone `|block|+1`-outcome POVM.
    pub fn as_povm(&self) -> Result<Povm> {
        Povm::new_unchecked(self.effects.clone())
    }

    /// Drop effects that vanish (e.g. a zero trash when the block sum is 𝟙).
    pub fn reduced(&self) -> Result<(Povm, Vec<usize>)> {
        let labels = self.labels();
        let (eff, lab): (Vec<_>, Vec<_>) = self
            .effects
            .iter()
            .zip(labels)
            .filter(|(e, _)| max_abs_entry(e) > DEGENERATE_BLOCK_NORM)
            .map(|(e, l)| (e.clone(), l))
            .unzip();
        Ok((Povm::new_unchecked(eff)?, lab))
    }

    /// All `n+1` effects with zeros outside the block.
    pub fn embedded(&self) -> Vec<CMatrix> {
        let d = self.dim();
        let mut out = vec![CMatrix::zeros(d, d); self.target_outcomes + 1];
        for (e, l) in self.effects.iter().zip(self.labels()) {
            out[l] = e.clone();
        }
        out
    }
}

pub fn build_sub_povm(target: &Povm, block: &[usize]) -> Result<SubPovm> {
    if block.is_empty() {
        return Err(Error::InvalidArgument("empty block".into()));
    }
    let n = target.outcomes();
    if let Some(&bad) = block.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("label {} outside [{}]", bad + 1, n)));
    }
    let sum = target.block_sum(block);
    let norm = max_eigenvalue(&sum);
    if norm.is_nan() || norm <= DEGENERATE_BLOCK_NORM {
        return Err(Error::DegenerateBlock { block: block.iter().map(|i| i + 1).collect() });
    }
    let lambda = 1.0 / norm;
    let mut effects: Vec<CMatrix> = block.iter().map(|&i| target.effect(i) * c(lambda, 0.0)).collect();
    let trash = identity(target.dim()) - sum * c(lambda, 0.0);
    let lo = min_eigenvalue(&trash);
    if lo < -PSD_TOL {
        return Err(Error::NumericalIntegrity(format!(
            "trash effect has eigenvalue {:.3e}",
            lo
        )));
    }
    effects.push(trash);
    Ok(SubPovm { block: block.to_vec(), lambda, effects, target_outcomes: n })
}

#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub target: Povm,
    pub partition: Partition,
    /// `λ_γ = ‖Σ_{X_γ} M_i‖⁻¹`.
    pub lambdas: Vec<f64>,
    /// `p_γ = q_succ / λ_γ`.
    pub mix_probs: Vec<f64>,
    pub q_succ: f64,
    pub sub_povms: Vec<SubPovm>,
    /// `n+1`-outcome POVM `L`.
    pub mixture: Povm,
}

impl SchemeResult {
    /// `⟨|X_γ|⟩ = Σ_γ p_γ |X_γ|`.
    pub fn mean_block_size(&self) -> f64 {
        self.mix_probs
            .iter()
            .zip(self.partition.blocks())
            .map(|(p, b)| p * b.len() as f64)
            .sum()
    }
}

pub fn build_scheme(target: &Povm, partition: &Partition) -> Result<SchemeResult> {
    check_partition(target, partition)?;
    let sub_povms = partition
        .blocks()
        .par_iter()
        .map(|b| build_sub_povm(target, b))
        .collect::<Result<Vec<_>>>()?;
    let lambdas: Vec<f64> = sub_povms.iter().map(|s| s.lambda).collect();
    let q_succ = 1.0 / lambdas.iter().map(|l| 1.0 / l).sum::<f64>();
    let mix_probs: Vec<f64> = lambdas.iter().map(|l| q_succ / l).collect();
    let embedded = sub_povms
        .iter()
        .map(|s| Povm::new_unchecked(s.embedded()))
        .collect::<Result<Vec<_>>>()?;
    let mixture = mix(&embedded, &ProbVector::new(mix_probs.clone())?)?;
    Ok(SchemeResult {
        target: target.clone(),
        partition: partition.clone(),
        lambdas,
        mix_probs,
        q_succ,
        sub_povms,
        mixture,
    })
}

/// Diagnostics from [`verify_simulation`].
#[derive(Debug, Clone, Serialize)]
pub struct SimulationCheck {
    pub passed: bool,
    pub mix_prob_sum_deviation: f64,
    pub mix_prob_formula_deviation: f64,
    /// `max_i max |L_i − q M_i|` over entries.
    pub max_effect_deviation: f64,
    /// `max |L_{n+1} − (1−q) 𝟙|`.
    pub trash_deviation: f64,
    pub invalid_sub_povms: Vec<usize>,
}

/// True iff all scheme invariants hold at `tol`.
pub fn verify_simulation(result: &SchemeResult, tol: f64) -> SimulationCheck {
    let q = result.q_succ;
    let target = &result.target;
    let n = target.outcomes();
    let mix_sum = (result.mix_probs.iter().sum::<f64>() - 1.0).abs();
    let formula = result
        .mix_probs
        .iter()
        .zip(&result.lambdas)
        .map(|(p, l)| (p - q / l).abs())
        .fold(0.0_f64, f64::max);
    let mut effect_dev = 0.0_f64;
    let mut trash_dev = f64::INFINITY;
    if result.mixture.outcomes() == n + 1 && result.mixture.dim() == target.dim() {
        for i in 0..n {
            let dev = max_abs_entry(&(result.mixture.effect(i) - target.effect(i) * c(q, 0.0)));
            effect_dev = effect_dev.max(dev);
        }
        trash_dev = max_abs_entry(&(result.mixture.effect(n) - identity(target.dim()) * c(1.0 - q, 0.0)));
    } else {
        effect_dev = f64::INFINITY;
    }
    let invalid: Vec<usize> = result
        .sub_povms
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            !crate::povm::validate_effects(s.dim(), &s.effects, tol.max(PSD_TOL))
                .map(|r| r.passed)
                .unwrap_or(false)
        })
        .map(|(g, _)| g)
        .collect();
    let passed = mix_sum <= tol
        && formula <= tol
        && effect_dev <= tol
        && trash_dev <= tol
        && invalid.is_empty()
        && q > 0.0
        && q <= 1.0 + tol;
    SimulationCheck {
        passed,
        mix_prob_sum_deviation: mix_sum,
        mix_prob_formula_deviation: formula,
        max_effect_deviation: effect_dev,
        trash_deviation: trash_dev,
        invalid_sub_povms: invalid,
    }
}
