//! POVMs, states and the classical operations on them: Born rule,
//! post-processing, convex mixing and depolarization.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, c, hermitian_deviation, identity, max_abs_entry, min_eigenvalue, trace, trace_product,
    CMatrix, COMPLETENESS_TOL,
};

/// Probabilities within this distance below zero are clipped to zero.
pub const PROB_CLIP_TOL: f64 = 1e-10;
/// Allowed deviation of a probability vector's sum from one.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// An `n`-outcome measurement on `C^d`.
///
/// Effects are stored densely. `generator`, when present, is a `d×n` matrix
/// with orthonormal rows whose columns `u_j` satisfy `M_j = u_j u_j†`; it is
/// recorded for rank-one families built from unitaries or isometries.
#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    effects: Vec<CMatrix>,
    pub label: Option<String>,
    generator: Option<CMatrix>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub tolerance: f64,
    pub outcomes: usize,
    pub min_effect_eigenvalue: f64,
    pub worst_effect: usize,
    pub max_hermitian_deviation: f64,
    /// Max entrywise `|Σ M_i − 𝟙|`.
    pub completeness_deviation: f64,
    pub failures: Vec<String>,
}

/// Checks effect shapes, then Hermiticity, positivity and completeness at `tol`.
///
/// Shape problems are returned as `Error::Structural`; numerical violations
/// only make the report fail.
pub fn validate_effects(dim: usize, effects: &[CMatrix], tol: f64) -> Result<ValidationReport> {
    if effects.is_empty() {
        return Err(Error::Structural("a POVM needs at least one outcome".into()));
    }
    for (i, e) in effects.iter().enumerate() {
        if e.shape() != (dim, dim) {
            return Err(Error::Structural(format!(
                "effect {} has shape {:?}, expected {}x{}",
                i + 1,
                e.shape(),
                dim,
                dim
            )));
        }
    }
    let mut failures = Vec::new();
    let mut min_eig = f64::INFINITY;
    let mut worst = 0;
    let mut max_herm = 0.0_f64;
    let mut sum = CMatrix::zeros(dim, dim);
    for (i, e) in effects.iter().enumerate() {
        if !numerics::is_finite(e) {
            failures.push(format!("effect {} has non-finite entries", i + 1));
            continue;
        }
        let herm = hermitian_deviation(e);
        max_herm = max_herm.max(herm);
        if herm > tol * e.norm().max(1.0) {
            failures.push(format!("effect {} not Hermitian (deviation {:.3e})", i + 1, herm));
        }
        let lo = min_eigenvalue(e);
        if lo < min_eig {
            min_eig = lo;
            worst = i;
        }
        if lo < -tol {
            failures.push(format!("effect {} not positive (min eigenvalue {:.3e})", i + 1, lo));
        }
        sum += e;
    }
    let completeness = max_abs_entry(&(sum - identity(dim)));
    if completeness > tol {
        failures.push(format!("effects do not sum to identity (deviation {:.3e})", completeness));
    }
    Ok(ValidationReport {
        passed: failures.is_empty(),
        tolerance: tol,
        outcomes: effects.len(),
        min_effect_eigenvalue: min_eig,
        worst_effect: worst + 1,
        max_hermitian_deviation: max_herm,
        completeness_deviation: completeness,
        failures,
    })
}

impl Povm {
    /// Validated construction at the default tolerance.
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        let povm = Self::new_unchecked(effects)?;
        let report = povm.validate(COMPLETENESS_TOL)?;
        if !report.passed {
            return Err(Error::Validation(report.failures.join("; ")));
        }
        Ok(povm)
    }

    /// Only checks that all effects are `d×d` for a common `d`.
    pub fn new_unchecked(effects: Vec<CMatrix>) -> Result<Self> {
        let dim = effects
            .first()
            .map(|e| e.nrows())
            .ok_or_else(|| Error::Structural("a POVM needs at least one outcome".into()))?;
        if dim == 0 {
            return Err(Error::Structural("zero-dimensional effects".into()));
        }
        if let Some((i, e)) = effects.iter().enumerate().find(|(_, e)| e.shape() != (dim, dim)) {
            return Err(Error::Structural(format!(
                "effect {} has shape {:?}, expected {}x{}",
                i + 1,
                e.shape(),
                dim,
                dim
            )));
        }
        Ok(Povm { dim, effects, label: None, generator: None })
    }

    /// Rank-one POVM `M_j = u_j u_j†` from the columns of a `d×n` frame.
    pub fn from_frame(frame: CMatrix) -> Result<Self> {
        let effects = (0..frame.ncols())
            .map(|j| {
                let col: Vec<_> = frame.column(j).iter().copied().collect();
                numerics::outer(&col)
            })
            .collect();
        let mut povm = Self::new(effects)?;
        povm.generator = Some(frame);
        Ok(povm)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Attach a generator frame after checking it reproduces the effects.
    pub fn with_generator(mut self, frame: CMatrix) -> Result<Self> {
        if frame.shape() != (self.dim, self.outcomes()) {
            return Err(Error::Structural(format!(
                "generator has shape {:?}, expected {}x{}",
                frame.shape(),
                self.dim,
                self.outcomes()
            )));
        }
        for (j, e) in self.effects.iter().enumerate() {
            let col: Vec<_> = frame.column(j).iter().copied().collect();
            if max_abs_entry(&(numerics::outer(&col) - e)) > 1e-8 {
                return Err(Error::Validation(format!(
                    "generator column {} does not reproduce effect {}",
                    j + 1,
                    j + 1
                )));
            }
        }
        self.generator = Some(frame);
        Ok(self)
    }

    /// The computational-basis measurement on `C^d`.
    pub fn computational_basis(dim: usize) -> Self {
        let effects = (0..dim)
            .map(|k| {
                let mut e = CMatrix::zeros(dim, dim);
                e[(k, k)] = c(1.0, 0.0);
                e
            })
            .collect();
        let mut p = Self::new(effects).expect("basis measurement is valid");
        p.generator = Some(identity(dim));
        p
    }

    /// The single-outcome POVM `(𝟙)`.
    pub fn trivial(dim: usize) -> Self {
        Self::new(vec![identity(dim)]).expect("trivial measurement is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn effect(&self, i: usize) -> &CMatrix {
        &self.effects[i]
    }

    pub fn generator(&self) -> Option<&CMatrix> {
        self.generator.as_ref()
    }

    pub fn into_effects(self) -> Vec<CMatrix> {
        self.effects
    }

    pub fn validate(&self, tol: f64) -> Result<ValidationReport> {
        validate_effects(self.dim, &self.effects, tol)
    }

    /// `w_j = tr M_j`.
    pub fn weights(&self) -> Vec<f64> {
        self.effects.iter().map(|e| trace(e).re).collect()
    }

    /// Rank of effect `i`, counted with the relative eigenvalue cutoff.
    pub fn effect_rank(&self, i: usize) -> usize {
        let vals = numerics::hermitian_eigenvalues(&self.effects[i]);
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        if top == 0.0 {
            return 0;
        }
        vals.iter().filter(|&&l| l > numerics::RANK_CUTOFF * top).count()
    }

    pub fn is_rank_one(&self) -> bool {
        (0..self.outcomes()).all(|i| self.effect_rank(i) <= 1)
    }

    /// `Σ_{i∈block} M_i` (0-based labels).
    pub fn block_sum(&self, block: &[usize]) -> CMatrix {
        let mut s = CMatrix::zeros(self.dim, self.dim);
        for &i in block {
            s += &self.effects[i];
        }
        s
    }
}

/// A density matrix.
#[derive(Debug, Clone)]
pub struct QuantumState {
    rho: CMatrix,
}

impl QuantumState {
    pub fn new(rho: CMatrix) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
            return Err(Error::Structural(format!("density matrix has shape {:?}", rho.shape())));
        }
        let herm = hermitian_deviation(&rho);
        if herm > numerics::HERMITIAN_TOL * rho.norm().max(1.0) {
            return Err(Error::NotHermitian {
                deviation: herm,
                tolerance: numerics::HERMITIAN_TOL,
            });
        }
        let tr = trace(&rho);
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::Validation(format!("state trace is {}, expected 1", tr)));
        }
        let lo = min_eigenvalue(&rho);
        if lo < -numerics::PSD_TOL {
            return Err(Error::Validation(format!("state not positive (min eigenvalue {:.3e})", lo)));
        }
        Ok(QuantumState { rho })
    }

    /// `|ψ⟩⟨ψ|` after normalizing `ψ`.
    pub fn pure(psi: &[numerics::C64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let v: Vec<_> = psi.iter().map(|z| z / norm).collect();
        Self::new(numerics::outer(&v))
    }

    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidArgument(format!("basis index {} out of range", k)));
        }
        let mut v = vec![c(0.0, 0.0); dim];
        v[k] = c(1.0, 0.0);
        Self::pure(&v)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        QuantumState { rho: identity(dim) * c(1.0 / dim as f64, 0.0) }
    }

    /// Haar-random pure state.
    pub fn random_pure<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let v: Vec<_> = (0..dim).map(|_| crate::rng::complex_gaussian(rng)).collect();
        Self::pure(&v).expect("gaussian vector is nonzero")
    }

    /// Random mixed state from a Ginibre matrix `G G† / tr(G G†)`.
    pub fn random_mixed<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = CMatrix::from_fn(dim, dim, |_, _| crate::rng::complex_gaussian(rng));
        let w = &g * g.adjoint();
        let tr = trace(&w).re;
        let rho = w * c(1.0 / tr, 0.0);
        QuantumState { rho: (&rho + rho.adjoint()) * c(0.5, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }
}

/// Nonnegative reals summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidArgument(format!("invalid probability {}", bad)));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidArgument(format!("probabilities sum to {}", s)));
        }
        Ok(ProbVector(p))
    }

    pub fn uniform(n: usize) -> Self {
        ProbVector(vec![1.0 / n as f64; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Column-stochastic relabeling `q_{i|j}`: `outputs × inputs`.
#[derive(Debug, Clone)]
pub struct StochasticMap {
    outputs: usize,
    inputs: usize,
    q: Vec<f64>,
}

impl StochasticMap {
    /// `entries[i][j] = q_{i|j}`.
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let outputs = entries.len();
        let inputs = entries.first().map_or(0, |r| r.len());
        if outputs == 0 || inputs == 0 || entries.iter().any(|r| r.len() != inputs) {
            return Err(Error::InvalidMap("ragged or empty matrix".into()));
        }
        let q: Vec<f64> = entries.into_iter().flatten().collect();
        if q.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::InvalidMap("negative or non-finite entry".into()));
        }
        for j in 0..inputs {
            let s: f64 = (0..outputs).map(|i| q[i * inputs + j]).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMap(format!("column {} sums to {}", j + 1, s)));
            }
        }
        Ok(StochasticMap { outputs, inputs, q })
    }

    pub fn identity(n: usize) -> Self {
        let entries = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self::new(entries).expect("identity is stochastic")
    }

    /// Deterministic relabeling `j ↦ target[j]`.
    pub fn from_function(target: &[usize], outputs: usize) -> Result<Self> {
        let mut entries = vec![vec![0.0; target.len()]; outputs];
        for (j, &i) in target.iter().enumerate() {
            if i >= outputs {
                return Err(Error::InvalidMap(format!("label {} out of range", i + 1)));
            }
            entries[i][j] = 1.0;
        }
        Self::new(entries)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.inputs + j]
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }
}

fn check_dims(povm: &Povm, state: &QuantumState) -> Result<()> {
    if povm.dim() != state.dim() {
        return Err(Error::Structural(format!(
            "POVM dimension {} does not match state dimension {}",
            povm.dim(),
            state.dim()
        )));
    }
    Ok(())
}

/// Clip tiny negatives, renormalize tiny sum deviations, reject the rest.
pub(crate) fn sanitize_probabilities(mut p: Vec<f64>) -> Result<ProbVector> {
    for (i, x) in p.iter_mut().enumerate() {
        if *x < 0.0 {
            if *x >= -PROB_CLIP_TOL {
                *x = 0.0;
            } else {
                return Err(Error::NumericalIntegrity(format!(
                    "probability of outcome {} is {:.3e}",
                    i + 1,
                    x
                )));
            }
        }
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::NumericalIntegrity(format!("probabilities sum to {}", s)));
    }
    if s != 1.0 {
        p.iter_mut().for_each(|x| *x /= s);
    }
    Ok(ProbVector(p))
}

/// `p_i = tr(ρ M_i)`.
pub fn born(povm: &Povm, state: &QuantumState) -> Result<ProbVector> {
    check_dims(povm, state)?;
    let p = povm
        .effects()
        .iter()
        .map(|e| trace_product(state.rho(), e).re)
        .collect();
    sanitize_probabilities(p)
}

/// `Q(M)_i = Σ_j q_{i|j} M_j`.
pub fn post_process(povm: &Povm, map: &StochasticMap) -> Result<Povm> {
    if map.inputs() != povm.outcomes() {
        return Err(Error::InvalidMap(format!(
            "map takes {} inputs but the POVM has {} outcomes",
            map.inputs(),
            povm.outcomes()
        )));
    }
    let d = povm.dim();
    let effects = (0..map.outputs())
        .map(|i| {
            let mut e = CMatrix::zeros(d, d);
            for (j, m) in povm.effects().iter().enumerate() {
                let q = map.get(i, j);
                if q != 0.0 {
                    e += m * c(q, 0.0);
                }
            }
            e
        })
        .collect();
    Povm::new(effects)
}

/// Effectwise convex combination `Σ_k w_k M^{(k)}`.
pub fn mix(povms: &[Povm], weights: &ProbVector) -> Result<Povm> {
    let first = povms
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to mix".into()))?;
    if povms.len() != weights.len() {
        return Err(Error::Structural(format!(
            "{} POVMs but {} weights",
            povms.len(),
            weights.len()
        )));
    }
    let (d, n) = (first.dim(), first.outcomes());
    if let Some(bad) = povms.iter().find(|p| p.dim() != d || p.outcomes() != n) {
        return Err(Error::Structural(format!(
            "cannot mix a {}-outcome POVM on C^{} with a {}-outcome POVM on C^{}",
            n,
            d,
            bad.outcomes(),
            bad.dim()
        )));
    }
    let effects = (0..n)
        .map(|i| {
            let mut e = CMatrix::zeros(d, d);
            for (p, &w) in povms.iter().zip(weights.iter()) {
                if w != 0.0 {
                    e += p.effect(i) * c(w, 0.0);
                }
            }
            e
        })
        .collect();
    Povm::new(effects)
}

/// How white noise is distributed over the outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepolarizingMode {
    /// `η M_i + (1−η) 𝟙/n`: noise at the level of the dilated circuit.
    #[default]
    UniformOutcome,
    /// `η M_i + (1−η) tr(M_i) 𝟙/d`: the channel `Φ_η` applied to each effect.
    TraceWeighted,
}

pub fn depolarize(povm: &Povm, eta: f64, mode: DepolarizingMode) -> Result<Povm> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("visibility {} outside [0, 1]", eta)));
    }
    let d = povm.dim();
    let n = povm.outcomes() as f64;
    let id = identity(d);
    let effects = povm
        .effects()
        .iter()
        .map(|m| {
            let noise = match mode {
                DepolarizingMode::UniformOutcome => 1.0 / n,
                DepolarizingMode::TraceWeighted => trace(m).re / d as f64,
            };
            m * c(eta, 0.0) + &id * c((1.0 - eta) * noise, 0.0)
        })
        .collect();
    let mut out = Povm::new(effects)?;
    out.label = povm.label.clone();
    Ok(out)
}

/// `½ Σ |p_i − q_i|`.
pub fn tvd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Structural(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::rng::Seed;

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| c(x, 0.0))))
    }

    #[test]
    fn validate_examples() {
        let basis = Povm::computational_basis(3);
        assert!(basis.validate(1e-8).unwrap().passed);

        let halves: Vec<_> = basis.effects().iter().map(|e| e * c(0.5, 0.0)).collect();
        let r = validate_effects(3, &halves, 1e-8).unwrap();
        assert!(!r.passed);
        assert!((r.completeness_deviation - 0.5).abs() < 1e-15);

        let bad = vec![diag(&[1.001, 0.0]), diag(&[-1e-3, 1.0])];
        let r = validate_effects(2, &bad, 1e-8).unwrap();
        assert!(!r.passed);
        assert!((r.min_effect_eigenvalue + 1e-3).abs() < 1e-12);
        assert_eq!(r.worst_effect, 2);
        assert!(r.failures.iter().any(|f| f.contains("not positive")));
    }

    #[test]
    fn structural_errors_are_distinct() {
        let r = validate_effects(2, &[identity(2), identity(3)], 1e-8);
        assert!(matches!(r, Err(Error::Structural(_))));
        assert!(matches!(Povm::new_unchecked(vec![]), Err(Error::Structural(_))));
    }

    #[test]
    fn born_examples() {
        let basis = Povm::computational_basis(3);
        let p = born(&basis, &QuantumState::basis(3, 0).unwrap()).unwrap();
        assert_eq!(&*p, &[1.0, 0.0, 0.0]);

        let povm = generators::haar_random_povm(3, 7, Seed(5)).unwrap();
        let p = born(&povm, &QuantumState::maximally_mixed(3)).unwrap();
        for (pi, w) in p.iter().zip(povm.weights()) {
            assert!((pi - w / 3.0).abs() < 1e-12);
        }

        let sic = generators::sic_povm(2, &generators::FiducialVector::qubit_sic()).unwrap();
        let p = born(&sic, &QuantumState::maximally_mixed(2)).unwrap();
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-12));
    }

    #[test]
    fn born_rejects_mismatch_and_negativity() {
        let basis = Povm::computational_basis(2);
        assert!(matches!(
            born(&basis, &QuantumState::maximally_mixed(3)),
            Err(Error::Structural(_))
        ));
        let bad = Povm::new_unchecked(vec![diag(&[1.1, 1.1]), diag(&[-0.1, -0.1])]).unwrap();
        assert!(matches!(
            born(&bad, &QuantumState::maximally_mixed(2)),
            Err(Error::NumericalIntegrity(_))
        ));
    }

    #[test]
    fn post_process_examples() {
        let povm = generators::haar_random_povm(2, 4, Seed(1)).unwrap();
        let same = post_process(&povm, &StochasticMap::identity(4)).unwrap();
        for (a, b) in same.effects().iter().zip(povm.effects()) {
            assert!(max_abs_entry(&(a - b)) < 1e-15);
        }
        let all = post_process(&povm, &StochasticMap::from_function(&[0, 0, 0, 0], 1).unwrap()).unwrap();
        assert!(max_abs_entry(&(all.effect(0) - identity(2))) < 1e-12);

        let sic = generators::sic_povm(2, &generators::FiducialVector::qubit_sic()).unwrap();
        let merged = post_process(&sic, &StochasticMap::from_function(&[0, 0, 1, 1], 2).unwrap()).unwrap();
        for w in merged.weights() {
            assert!((w - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            StochasticMap::new(vec![vec![0.5, 1.0], vec![0.4, 0.0]]),
            Err(Error::InvalidMap(_))
        ));
        assert!(post_process(&sic, &StochasticMap::identity(3)).is_err());
    }

    #[test]
    fn mix_examples() {
        let a = Povm::computational_basis(2);
        let b = generators::fourier_povm(2, 2).unwrap();
        let m = mix(&[a.clone(), b.clone()], &ProbVector::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert!(max_abs_entry(&(m.effect(0) - a.effect(0))) < 1e-15);
        let m = mix(&[b.clone(), b.clone()], &ProbVector::uniform(2)).unwrap();
        assert!(max_abs_entry(&(m.effect(1) - b.effect(1))) < 1e-15);
        let m = mix(&[a.clone(), b.clone()], &ProbVector::uniform(2)).unwrap();
        for (i, w) in m.weights().into_iter().enumerate() {
            assert!((w - 1.0).abs() < 1e-12);
            let expect = (a.effect(i) + b.effect(i)) * c(0.5, 0.0);
            assert!(max_abs_entry(&(m.effect(i) - expect)) < 1e-15);
        }
        assert!(matches!(
            mix(&[a, Povm::computational_basis(3)], &ProbVector::uniform(2)),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn depolarize_examples() {
        let basis = Povm::computational_basis(2);
        let same = depolarize(&basis, 1.0, DepolarizingMode::UniformOutcome).unwrap();
        assert!(max_abs_entry(&(same.effect(0) - basis.effect(0))) < 1e-15);
        let flat = depolarize(&basis, 0.0, DepolarizingMode::UniformOutcome).unwrap();
        assert!(max_abs_entry(&(flat.effect(1) - identity(2) * c(0.5, 0.0))) < 1e-15);
        let half = depolarize(&basis, 0.5, DepolarizingMode::UniformOutcome).unwrap();
        assert!(max_abs_entry(&(half.effect(0) - diag(&[0.75, 0.25]))) < 1e-15);
        assert!(depolarize(&basis, 1.5, DepolarizingMode::UniformOutcome).is_err());

        let povm = generators::haar_random_povm(3, 6, Seed(2)).unwrap();
        let tw = depolarize(&povm, 0.3, DepolarizingMode::TraceWeighted).unwrap();
        for (a, b) in tw.weights().iter().zip(povm.weights()) {
            assert!((a - b).abs() < 1e-12, "trace-weighted noise preserves weights");
        }
    }

    #[test]
    fn tvd_examples() {
        assert_eq!(tvd(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tvd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tvd(&[0.75, 0.25], &[0.5, 0.5]).unwrap() - 0.25).abs() < 1e-15);
        assert!(tvd(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn depolarized_statistics_relations() {
        let mut rng = Seed(9).rng();
        for trial in 0..50 {
            let povm = generators::haar_random_povm(3, 9, Seed(trial)).unwrap();
            let rho = QuantumState::random_mixed(3, &mut rng);
            let eta = (trial as f64 + 0.5) / 50.0;
            let noisy = depolarize(&povm, eta, DepolarizingMode::UniformOutcome).unwrap();
            let p = born(&povm, &rho).unwrap();
            let pn = born(&noisy, &rho).unwrap();
            let n = povm.outcomes() as f64;
            for (a, b) in p.iter().zip(pn.iter()) {
                assert!((b - (eta * a + (1.0 - eta) / n)).abs() <= 1e-10);
            }
            let lhs = tvd(&p, &pn).unwrap();
            let rhs = (1.0 - eta) * tvd(&p, &ProbVector::uniform(9)).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn post_processing_preserves_validity() {
        use rand::Rng;
        let mut rng = Seed(4).rng();
        for trial in 0..100 {
            let n = rng.random_range(4..=9);
            let povm = generators::haar_random_povm(3, n, Seed(100 + trial)).unwrap();
            let outputs = rng.random_range(1..=4);
            let mut cols = vec![vec![0.0; n]; outputs];
            for j in 0..n {
                let raw: Vec<f64> = (0..outputs).map(|_| rng.random::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                for i in 0..outputs {
                    cols[i][j] = raw[i] / s;
                }
                // exact column sums
                let s2: f64 = (0..outputs).map(|i| cols[i][j]).sum();
                cols[0][j] += 1.0 - s2;
            }
            let map = StochasticMap::new(cols).unwrap();
            let out = post_process(&povm, &map).unwrap();
            assert!(out.validate(1e-8).unwrap().passed);
            let p = born(&out, &QuantumState::random_pure(3, &mut rng)).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
