//! Measurement families: Haar-random unitaries, isometries and the rank-one
//! POVMs they induce, ℤ_d×ℤ_d covariant IC and SIC POVMs, Fourier POVMs.

use crate::error::{Error, Result};
use crate::numerics::{c, fourier_matrix, identity, isometry_error, truncation, CMatrix, C64};
use crate::povm::Povm;
use crate::rng::{complex_gaussian, Seed};

/// Default IC parameter `α = (1+i)/2`.
pub const DEFAULT_IC_ALPHA: C64 = C64::new(0.5, 0.5);

/// Overlap symmetry tolerance used when accepting SIC fiducials.
pub const SIC_SYMMETRY_TOL: f64 = 1e-6;

fn gaussian_matrix(rows: usize, cols: usize, seed: Seed) -> CMatrix {
    let mut rng = seed.rng();
    // column-major fill so that column k only depends on the first k columns' draws
    let mut m = CMatrix::zeros(rows, cols);
    for k in 0..cols {
        for i in 0..rows {
            m[(i, k)] = complex_gaussian(&mut rng);
        }
    }
    m
}

/// Haar-random `n×n` unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` moved into `Q`.
pub fn haar_unitary(n: usize, seed: Seed) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("unitary of size 0".into()));
    }
    let g = gaussian_matrix(n, n, seed);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..n {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 { rkk / rkk.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, k)] *= phase;
        }
    }
    Ok(q)
}

/// `G = L D L†` for Hermitian positive definite `G`, `L` unit lower triangular.
fn ldl(g: &CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let n = g.nrows();
    let mut l = identity(n);
    let mut dvals = vec![0.0; n];
    for j in 0..n {
        let mut dj = g[(j, j)].re;
        for k in 0..j {
            dj -= l[(j, k)].norm_sqr() * dvals[k];
        }
        if dj.is_nan() || dj <= 0.0 {
            return Err(Error::NumericalIntegrity(format!(
                "Gram matrix is not positive definite (pivot {} = {:.3e})",
                j, dj
            )));
        }
        dvals[j] = dj;
        for i in (j + 1)..n {
            let mut v = g[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj() * dvals[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    Ok((l, dvals))
}

/// Inverse of an upper triangular matrix by back substitution.
fn invert_upper(u: &CMatrix) -> CMatrix {
    let n = u.nrows();
    let mut inv = CMatrix::zeros(n, n);
    for col in 0..n {
        inv[(col, col)] = c(1.0, 0.0) / u[(col, col)];
        for i in (0..col).rev() {
            let mut s = c(0.0, 0.0);
            for k in (i + 1)..=col {
                s += u[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = -s / u[(i, i)];
        }
    }
    inv
}

/// One Gram/LDL orthonormalization sweep: `E = V (√D L†)⁻¹`.
fn ldl_orthonormalize(v: &CMatrix) -> Result<CMatrix> {
    let gram = v.adjoint() * v;
    let (l, dvals) = ldl(&gram)?;
    let mut upper = l.adjoint();
    for (i, d) in dvals.iter().enumerate() {
        let s = d.sqrt();
        for k in 0..upper.ncols() {
            upper[(i, k)] *= s;
        }
    }
    Ok(v * invert_upper(&upper))
}

/// Haar-random `n×d` isometry.
///
/// `d` i.i.d. complex Gaussian vectors in `C^n` are orthonormalized through
/// their Gramian: `G = L D L†`, `R = (√D L†)⁻¹`, `e_k = Σ_i R_{ik} v_i`.
/// When the Gramian is ill conditioned the sweep is applied a second time to
/// its own output, which leaves the (already triangular-equivalent) span and
/// ordering unchanged.
pub fn haar_isometry(d: usize, n: usize, seed: Seed) -> Result<CMatrix> {
    if d == 0 || d > n {
        return Err(Error::InvalidArgument(format!(
            "isometry needs 1 <= d <= n, got d = {}, n = {}",
            d, n
        )));
    }
    let v = gaussian_matrix(n, d, seed);
    let mut e = ldl_orthonormalize(&v)?;
    if isometry_error(&e) > 1e-13 {
        e = ldl_orthonormalize(&e)?;
    }
    Ok(e)
}

/// Rank-one `n`-outcome POVM on `C^d` from the rows of a Haar isometry:
/// `(M_j)_{il} = V*_{ji} V_{jl}`. The recorded generator is `V†`.
pub fn haar_random_povm(d: usize, n: usize, seed: Seed) -> Result<Povm> {
    if n < d || n > d * d {
        return Err(Error::InvalidArgument(format!(
            "Haar POVMs need d <= n <= d^2, got d = {}, n = {}",
            d, n
        )));
    }
    let v = haar_isometry(d, n, seed)?;
    Ok(Povm::from_frame(v.adjoint())?.with_label(format!("haar d={} n={} seed={}", d, n, seed.0)))
}

/// Rank-one POVM from the first `d` rows of a unitary.
pub fn povm_from_unitary(u: &CMatrix, d: usize) -> Result<Povm> {
    let cols: Vec<usize> = (0..u.ncols()).collect();
    Povm::from_frame(truncation(u, d, &cols)?)
}

/// `U_{m,k} = Σ_j exp(2πi jm/d) |j⟩⟨j⊕k|`.
pub fn displacement(d: usize, m: usize, k: usize) -> Result<CMatrix> {
    if d == 0 || m >= d || k >= d {
        return Err(Error::InvalidArgument(format!(
            "displacement indices ({}, {}) out of range for d = {}",
            m, k, d
        )));
    }
    let mut u = CMatrix::zeros(d, d);
    for j in 0..d {
        let phase = 2.0 * std::f64::consts::PI * ((j * m) % d) as f64 / d as f64;
        u[(j, (j + k) % d)] = C64::from_polar(1.0, phase);
    }
    Ok(u)
}

/// A unit vector generating a covariant POVM.
#[derive(Debug, Clone)]
pub struct FiducialVector {
    amplitudes: Vec<C64>,
}

impl FiducialVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("fiducial norm {} is not 1", norm)));
        }
        Ok(FiducialVector { amplitudes })
    }

    /// Accepts vectors whose norm is within `1e-6` of one and rescales them.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || (norm - 1.0).abs() >= 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "fiducial norm {} deviates from 1 by more than 1e-6",
                norm
            )));
        }
        Self::new(amplitudes.into_iter().map(|z| z / norm).collect())
    }

    /// `|ψ(α)⟩ ∝ Σ_i α^i |i⟩`.
    pub fn ic(d: usize, alpha: C64) -> Result<Self> {
        let a = alpha.norm();
        if d == 0 || !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidArgument(format!("|alpha| = {} must lie in (0, 1)", a)));
        }
        let norm = ((1.0 - a * a) / (1.0 - a.powi(2 * d as i32))).sqrt();
        let amps = (0..d).map(|i| alpha.powu(i as u32) * norm).collect();
        Ok(FiducialVector { amplitudes: amps })
    }

    /// Tetrahedral qubit fiducial with Bloch vector `(1,1,1)/√3`.
    pub fn qubit_sic() -> Self {
        let t = 1.0 / 3.0_f64.sqrt();
        let a = ((1.0 + t) / 2.0).sqrt();
        let b = ((1.0 - t) / 2.0).sqrt();
        FiducialVector {
            amplitudes: vec![c(a, 0.0), C64::from_polar(b, std::f64::consts::FRAC_PI_4)],
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }
}

/// Columns `U_{m,k} ψ / √d` in the order `j = m·d + k`.
fn covariant_frame(fid: &FiducialVector) -> CMatrix {
    let d = fid.dim();
    let psi = nalgebra::DVector::from_column_slice(fid.amplitudes());
    let scale = c(1.0 / (d as f64).sqrt(), 0.0);
    let mut frame = CMatrix::zeros(d, d * d);
    for m in 0..d {
        for k in 0..d {
            let u = displacement(d, m, k).expect("indices in range");
            frame.set_column(m * d + k, &((u * &psi) * scale));
        }
    }
    frame
}

/// `d²`-outcome IC POVM covariant under ℤ_d×ℤ_d.
pub fn ic_covariant_povm(d: usize, alpha: C64) -> Result<Povm> {
    let fid = FiducialVector::ic(d, alpha)?;
    Ok(Povm::from_frame(covariant_frame(&fid))?.with_label(format!("ic d={} alpha={}", d, alpha)))
}

/// Spread `max − min` of `|⟨ψ_a|ψ_b⟩|²` over `a ≠ b`, with `ψ` the
/// unit-normalized frame columns. Zero for a SIC.
pub fn overlap_spread(frame: &CMatrix) -> f64 {
    let n = frame.ncols();
    let norms: Vec<f64> = (0..n).map(|j| frame.column(j).norm()).collect();
    let gram = frame.adjoint() * frame;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for a in 0..n {
        for b in (a + 1)..n {
            let v = gram[(a, b)].norm_sqr() / (norms[a] * norms[a] * norms[b] * norms[b]);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if n < 2 {
        0.0
    } else {
        hi - lo
    }
}

/// SIC POVM `(1/d)|ψ_{m,k}⟩⟨ψ_{m,k}|` from an imported fiducial.
pub fn sic_povm(d: usize, fiducial: &FiducialVector) -> Result<Povm> {
    if fiducial.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "fiducial has dimension {}, expected {}",
            fiducial.dim(),
            d
        )));
    }
    let frame = covariant_frame(fiducial);
    let spread = overlap_spread(&frame);
    if spread > SIC_SYMMETRY_TOL {
        return Err(Error::NotSicFiducial(format!(
            "pairwise overlaps spread by {:.3e} (tolerance {:.0e})",
            spread, SIC_SYMMETRY_TOL
        )));
    }
    let povm = Povm::from_frame(frame).map_err(|e| Error::NotSicFiducial(e.to_string()))?;
    Ok(povm.with_label(format!("sic d={}", d)))
}

/// Rank-one POVM from the first `d` rows of the `n×n` Fourier matrix.
pub fn fourier_povm(d: usize, n: usize) -> Result<Povm> {
    if d == 0 || d > n {
        return Err(Error::InvalidArgument(format!(
            "Fourier POVM needs 1 <= d <= n, got d = {}, n = {}",
            d, n
        )));
    }
    Ok(povm_from_unitary(&fourier_matrix(n), d)?.with_label(format!("fourier d={} n={}", d, n)))
}
