//! Naimark dilation of a POVM into a rank-one projective measurement.

use crate::error::{Error, Result};
use crate::numerics::{c, hermitian_eig, identity, isometry_error, max_abs_entry, CMatrix, RANK_CUTOFF};
use crate::povm::{sanitize_probabilities, Povm, QuantumState};
use crate::scheme::SubPovm;

/// Candidates whose residual norm falls below this are skipped during completion.
pub const COMPLETION_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default)]
pub struct DilationOptions {
    /// Pad the dilation space to this dimension; padding rows are zero and
    /// assigned to the last outcome.
    pub pad_to: Option<usize>,
    /// Also build a unitary whose first `d` columns are the isometry.
    pub complete: bool,
}

#[derive(Debug, Clone)]
pub struct NaimarkDilation {
    pub source: Povm,
    /// Dilation dimension `D`.
    pub big_dim: usize,
    /// `Σ_i rank M_i`, before padding.
    pub natural_dim: usize,
    /// `D×d` isometry `V`.
    pub isometry: CMatrix,
    /// `groups[k]` is the source outcome of basis projector `k`.
    pub groups: Vec<usize>,
    pub completed_unitary: Option<CMatrix>,
    pub warnings: Vec<String>,
}

/// Row `k` of `V` is `√λ_k ⟨v_k|` for each eigenpair of each effect above
/// `RANK_CUTOFF·‖M_i‖`.
pub fn naimark_dilate(povm: &Povm, options: DilationOptions) -> Result<NaimarkDilation> {
    let d = povm.dim();
    let mut rows: Vec<Vec<crate::numerics::C64>> = Vec::new();
    let mut groups = Vec::new();
    let mut warnings = Vec::new();
    for (i, m) in povm.effects().iter().enumerate() {
        let eig = hermitian_eig(m)?;
        let top = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        let cutoff = RANK_CUTOFF * top;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if top > 0.0 && lam >= 0.5 * cutoff && lam <= 2.0 * cutoff {
                warnings.push(format!(
                    "effect {}: eigenvalue {:.3e} is within a factor 2 of the rank cutoff",
                    i + 1,
                    lam
                ));
            }
            if top == 0.0 || lam <= cutoff {
                continue;
            }
            let s = lam.sqrt();
            rows.push(eig.eigenvectors.column(k).iter().map(|z| z.conj() * s).collect());
            groups.push(i);
        }
    }
    let natural_dim = rows.len();
    let big_dim = match options.pad_to {
        Some(p) if p < natural_dim => {
            return Err(Error::InvalidArgument(format!(
                "cannot pad to {p}: the dilation needs dimension {natural_dim}"
            )))
        }
        Some(p) => p,
        None => natural_dim,
    };
    let last = povm.outcomes() - 1;
    groups.resize(big_dim, last);
    let mut v = CMatrix::zeros(big_dim, d);
    for (r, row) in rows.iter().enumerate() {
        for (col, z) in row.iter().enumerate() {
            v[(r, col)] = *z;
        }
    }
    let err = isometry_error(&v);
    if err > 1e-8 {
        return Err(Error::NumericalIntegrity(format!("dilation is not an isometry (error {err:.3e})")));
    }
    let completed_unitary = if options.complete { Some(complete_isometry(&v)?) } else { None };
    Ok(NaimarkDilation {
        source: povm.clone(),
        big_dim,
        natural_dim,
        isometry: v,
        groups,
        completed_unitary,
        warnings,
    })
}

/// Dilation of a sub-POVM, padded to `2d` when the stored effects allow it.
pub fn dilate_sub_povm(sub: &SubPovm, complete: bool) -> Result<NaimarkDilation> {
    let povm = sub.as_povm()?;
    let natural: usize = (0..povm.outcomes()).map(|i| povm.effect_rank(i)).sum();
    let pad = 2 * povm.dim();
    let pad_to = if natural <= pad { Some(pad) } else { None };
    naimark_dilate(&povm, DilationOptions { pad_to, complete })
}

/// Extend the orthonormal columns of `v` to a unitary by projecting the
/// canonical basis vectors, in order, off the span built so far.
pub fn complete_isometry(v: &CMatrix) -> Result<CMatrix> {
    let (big, d) = v.shape();
    if d > big {
        return Err(Error::InvalidArgument("more columns than rows".into()));
    }
    let mut cols: Vec<nalgebra::DVector<crate::numerics::C64>> = (0..d).map(|j| v.column(j).into_owned()).collect();
    for e in 0..big {
        if cols.len() == big {
            break;
        }
        let mut x = nalgebra::DVector::from_element(big, c(0.0, 0.0));
        x[e] = c(1.0, 0.0);
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dotc(&x);
                x -= q * proj;
            }
        }
        let norm = x.norm();
        if norm < COMPLETION_THRESHOLD {
            continue;
        }
        cols.push(x / c(norm, 0.0));
    }
    if cols.len() != big {
        return Err(Error::NumericalIntegrity("isometry completion ran out of candidates".into()));
    }
    Ok(CMatrix::from_columns(&cols))
}

impl NaimarkDilation {
    pub fn dim(&self) -> usize {
        self.isometry.ncols()
    }

    /// `max_i max |Σ_{k∈groups(i)} V†Π_kV − M_i|`.
    pub fn reconstruction_error(&self) -> f64 {
        let d = self.dim();
        let mut acc = vec![CMatrix::zeros(d, d); self.source.outcomes()];
        for (k, &g) in self.groups.iter().enumerate() {
            let row = self.isometry.row(k);
            acc[g] += row.adjoint() * row;
        }
        acc.iter()
            .enumerate()
            .map(|(i, a)| max_abs_entry(&(a - self.source.effect(i))))
            .fold(0.0, f64::max)
    }

    /// `‖V†V − 𝟙‖_max`.
    pub fn isometry_error(&self) -> f64 {
        isometry_error(&self.isometry)
    }

    /// Outcome law of the projective measurement on `VρV†`, summed per group.
    pub fn grouped_born(&self, state: &QuantumState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let big = &self.isometry * state.rho() * self.isometry.adjoint();
        self.group_diagonal(&big)
    }

    /// Same law computed from the completed unitary acting on `ρ ⊕ 0`.
    pub fn grouped_born_unitary(&self, state: &QuantumState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let u = self
            .completed_unitary
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("dilation has no completed unitary".into()))?;
        let d = self.dim();
        let mut padded = CMatrix::zeros(self.big_dim, self.big_dim);
        padded.view_mut((0, 0), (d, d)).copy_from(state.rho());
        let big = u * padded * u.adjoint();
        self.group_diagonal(&big)
    }

    /// `‖U†U − 𝟙‖_max` and the deviation of its first `d` columns from `V`.
    pub fn completion_errors(&self) -> Option<(f64, f64)> {
        self.completed_unitary.as_ref().map(|u| {
            let unit = max_abs_entry(&(u.adjoint() * u - identity(self.big_dim)));
            let cols = max_abs_entry(&(u.columns(0, self.dim()) - &self.isometry));
            (unit, cols)
        })
    }

    fn check_state(&self, state: &QuantumState) -> Result<()> {
        if state.dim() != self.dim() {
            return Err(Error::Structural(format!(
                "state dimension {} does not match dilation input dimension {}",
                state.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn group_diagonal(&self, big: &CMatrix) -> Result<Vec<f64>> {
        let mut p = vec![0.0; self.source.outcomes()];
        for (k, &g) in self.groups.iter().enumerate() {
            p[g] += big[(k, k)].re;
        }
        sanitize_probabilities(p).map(|v| v.into_inner())
    }
}
