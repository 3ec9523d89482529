//! White-noise model for measurement implementations, and the comparison
//! between direct Naimark dilation and the postselection scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::{born, sanitize_probabilities, tvd, Povm, ProbVector, QuantumState};
use crate::scheme::SchemeResult;

/// Per-gate error rates, gate counts and SPAM rates of one circuit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub r1: f64,
    pub r2: f64,
    pub g1: f64,
    pub g2: f64,
    pub qubits: f64,
    pub r_p: f64,
    pub r_m: f64,
}

impl NoiseModel {
    /// Only two-qubit gate errors.
    pub fn two_qubit(r2: f64, g2: f64) -> Self {
        NoiseModel { r2, g2, ..Default::default() }
    }

    /// `η = exp(−r₁g₁ − r₂g₂ − N(r_p + r_m))`.
    pub fn visibility(&self) -> Result<f64> {
        let all = [self.r1, self.r2, self.g1, self.g2, self.qubits, self.r_p, self.r_m];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument("noise parameters must be finite and nonnegative".into()));
        }
        Ok((-self.r1 * self.g1 - self.r2 * self.g2 - self.qubits * (self.r_p + self.r_m)).exp())
    }
}

pub fn visibility(model: &NoiseModel) -> Result<f64> {
    model.visibility()
}

/// Leading-order two-qubit gate counts `(4^{2N}, 4^{N+1})` for a generic
/// `2N`-qubit Naimark unitary and an `(N+1)`-qubit postselection circuit.
/// Constants are set to one; these are order-of-magnitude estimates.
pub fn gate_count_estimates(qubits: u32) -> Result<(u64, u64)> {
    if qubits == 0 || qubits > 15 {
        return Err(Error::InvalidArgument(format!("qubit count must be in 1..=15, got {qubits}")));
    }
    Ok((4u64.pow(2 * qubits), 4u64.pow(qubits + 1)))
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("visibility must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// `max_i ½ Σ_j | |T_ij|² − 1/n |` over the rows of the generator frame,
/// i.e. the TVD between outcome laws of basis states and the uniform law.
pub fn basis_state_deviation(povm: &Povm) -> Result<f64> {
    let t = povm.generator().ok_or(Error::MissingGenerator)?;
    let n = t.ncols() as f64;
    Ok((0..t.nrows())
        .map(|i| 0.5 * t.row(i).iter().map(|z| (z.norm_sqr() - 1.0 / n).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// `(1−η)·max_i ½ Σ_j | |T_ij|² − 1/n |`; lower-bounds the worst-case TVD
/// between the ideal and uniformly depolarized measurement.
pub fn worst_case_tvd_lower_bound(povm: &Povm, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok((1.0 - eta) * basis_state_deviation(povm)?)
}

/// `(1 − 1/n)^n`, the Haar average of [`basis_state_deviation`] at a fixed row.
pub fn haar_deviation_mean(n: usize) -> f64 {
    (1.0 - 1.0 / n as f64).powi(n as i32)
}

#[derive(Debug, Clone, Serialize)]
pub struct NoisySchemeLaw {
    /// Postselected law over the `n` target outcomes.
    pub law: ProbVector,
    /// `p(i ≤ n) = ηq + (1−η)⟨|X|⟩/d_tot`.
    pub postselection_prob: f64,
}

/// Outcome law of the scheme when every projective outcome of each
/// `d_tot`-dimensional dilation is depolarized with visibility `η`:
/// `p(i) ∝ ηq·p(i|M,ρ) + (1−η)p_{γ(i)}/d_tot`.
pub fn noisy_scheme_distribution(scheme: &SchemeResult, state: &QuantumState, eta: f64, d_tot: usize) -> Result<NoisySchemeLaw> {
    check_eta(eta)?;
    let needed = scheme
        .sub_povms
        .iter()
        .map(|s| s.as_povm().map(|p| (0..p.outcomes()).map(|i| p.effect_rank(i)).sum::<usize>()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    if d_tot < needed {
        return Err(Error::InvalidArgument(format!(
            "d_tot = {d_tot} is below the dilation dimension {needed}"
        )));
    }
    let q = scheme.q_succ;
    let target = born(&scheme.target, state)?;
    let owners = scheme.partition.owners();
    let raw: Vec<f64> = target
        .iter()
        .zip(&owners)
        .map(|(p, &g)| eta * q * p + (1.0 - eta) * scheme.mix_probs[g] / d_tot as f64)
        .collect();
    let post = eta * q + (1.0 - eta) * scheme.mean_block_size() / d_tot as f64;
    if post.is_nan() || post <= 0.0 {
        return Err(Error::Degenerate("postselection probability is zero".into()));
    }
    let law = sanitize_probabilities(raw.iter().map(|x| x / post).collect())?;
    Ok(NoisySchemeLaw { law, postselection_prob: post })
}

/// `(1−η)·max(1/(2q), 1)`, valid when `|X_γ| = d` for all blocks and `d_tot = 2d`.
pub fn noisy_post_bound(eta: f64, q: f64) -> f64 {
    (1.0 - eta) * (1.0 / (2.0 * q)).max(1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub qubits: u32,
    pub r2: f64,
    pub outcomes: usize,
    pub q_succ: f64,
    /// Order-of-magnitude two-qubit gate counts.
    pub g2_naimark: u64,
    pub g2_post: u64,
    pub eta_naimark: f64,
    pub eta_post: f64,
    /// `(1−1/n)^n`.
    pub c_n: f64,
    /// `(1−η_Naimark)·c_n`.
    pub naimark_tvd_lower: f64,
    /// `(1−η_post)·max(1/(2q), 1)`.
    pub post_tvd_upper: f64,
    /// `naimark_tvd_lower / post_tvd_upper`, absent when the denominator vanishes.
    pub ratio: Option<f64>,
    /// Basis-state lower bound for this target, when its generator is known.
    pub naimark_instance_lower: Option<f64>,
    /// TVD of the noisy postselected law at `d_tot = 2d` for the given state.
    pub post_tvd_actual: f64,
}

pub fn compare_implementations(qubits: u32, r2: f64, scheme: &SchemeResult, state: &QuantumState) -> Result<ComparisonReport> {
    if !(r2.is_finite() && r2 >= 0.0) {
        return Err(Error::InvalidArgument("r2 must be finite and nonnegative".into()));
    }
    let (g_n, g_p) = gate_count_estimates(qubits)?;
    let d = scheme.target.dim();
    if d != 1usize << qubits {
        return Err(Error::Structural(format!(
            "target dimension {d} does not match 2^{qubits}"
        )));
    }
    let eta_n = NoiseModel::two_qubit(r2, g_n as f64).visibility()?;
    let eta_p = NoiseModel::two_qubit(r2, g_p as f64).visibility()?;
    let n = scheme.target.outcomes();
    let c_n = haar_deviation_mean(n);
    let lower = (1.0 - eta_n) * c_n;
    let upper = noisy_post_bound(eta_p, scheme.q_succ);
    let ratio = if upper > 0.0 { Some(lower / upper) } else { None };
    let instance = match worst_case_tvd_lower_bound(&scheme.target, eta_n) {
        Ok(v) => Some(v),
        Err(Error::MissingGenerator) => None,
        Err(e) => return Err(e),
    };
    let noisy = noisy_scheme_distribution(scheme, state, eta_p, 2 * d)?;
    let actual = tvd(&born(&scheme.target, state)?, &noisy.law)?;
    Ok(ComparisonReport {
        qubits,
        r2,
        outcomes: n,
        q_succ: scheme.q_succ,
        g2_naimark: g_n,
        g2_post: g_p,
        eta_naimark: eta_n,
        eta_post: eta_p,
        c_n,
        naimark_tvd_lower: lower,
        post_tvd_upper: upper,
        ratio,
        naimark_instance_lower: instance,
        post_tvd_actual: actual,
    })
}
