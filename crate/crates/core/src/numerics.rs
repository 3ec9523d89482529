//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Tolerances follow a hybrid
//! absolute/relative policy: a check against `tol` passes when the violation
//! is at most `tol * max(1, ‖A‖)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Hermiticity tolerance (relative to `max(1, ‖A‖)`).
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Lowest admissible eigenvalue of an effect.
pub const PSD_TOL: f64 = 1e-9;
/// Entrywise tolerance on `Σ M_i = 𝟙`.
pub const COMPLETENESS_TOL: f64 = 1e-8;
/// Relative eigenvalue cutoff when counting ranks.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct EigSystem {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector belonging to `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

impl EigSystem {
    pub fn reconstruct(&self) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*lambda);
        }
        scaled * v.adjoint()
    }

    pub fn rank(&self, relative_cutoff: f64) -> usize {
        let top = self.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        if top == 0.0 {
            return 0;
        }
        self.eigenvalues
            .iter()
            .filter(|&&l| l > relative_cutoff * top)
            .count()
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `|v⟩⟨v|` for a column vector given as a slice.
pub fn outer(v: &[C64]) -> CMatrix {
    let n = v.len();
    CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

/// `F_{jl} = ω^{jl} / √n` with `ω = exp(2πi/n)` (0-based indices).
pub fn fourier_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |j, l| {
        let phase = 2.0 * std::f64::consts::PI * ((j * l) % n) as f64 / n as f64;
        C64::from_polar(scale, phase)
    })
}

pub fn max_abs_entry(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidArgument("operator norm of an empty matrix".into()));
    }
    if !is_finite(a) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let sv = a.clone().svd(false, false).singular_values;
    Ok(sv.iter().fold(0.0_f64, |m, &s| m.max(s)))
}

/// Operator norm of `A − A†`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let diff = a - a.adjoint();
    let fro = diff.norm();
    if fro == 0.0 {
        return 0.0;
    }
    // i(A − A†) is Hermitian; its spectral radius is the operator norm.
    let herm = diff * C64::i();
    let herm = (&herm + herm.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |m, &l| m.max(l.abs()))
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Structural(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if !is_finite(a) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let dev = hermitian_deviation(a);
    let scale = a.norm().max(1.0);
    let tol = HERMITIAN_TOL * scale;
    if dev > tol {
        return Err(Error::NotHermitian { deviation: dev, tolerance: tol });
    }
    Ok(())
}

fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Full eigensystem of a Hermitian matrix, eigenvalues descending.
///
/// Ties keep the order in which the solver produced them.
pub fn hermitian_eig(a: &CMatrix) -> Result<EigSystem> {
    check_hermitian(a)?;
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let n = a.nrows();
    let mut vecs = CMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigSystem { eigenvalues: vals, eigenvectors: vecs })
}

/// Eigenvalues only, descending. The input is symmetrized first, so callers
/// are responsible for Hermiticity.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = hermitian_part(a).symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    vals
}

/// Largest eigenvalue of a Hermitian matrix; for PSD input this is the
/// operator norm.
pub fn max_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigenvalues(a).first().copied().unwrap_or(0.0)
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigenvalues(a).last().copied().unwrap_or(0.0)
}

/// Rows `0..row_count` of `u` restricted to the columns in `cols`, in the
/// given order. Indices are 0-based.
pub fn truncation(u: &CMatrix, row_count: usize, cols: &[usize]) -> Result<CMatrix> {
    if row_count > u.nrows() {
        return Err(Error::InvalidArgument(format!(
            "row count {} exceeds matrix rows {}",
            row_count,
            u.nrows()
        )));
    }
    if let Some(&bad) = cols.iter().find(|&&c| c >= u.ncols()) {
        return Err(Error::InvalidArgument(format!(
            "column index {} out of range for {} columns",
            bad,
            u.ncols()
        )));
    }
    Ok(CMatrix::from_fn(row_count, cols.len(), |i, k| u[(i, cols[k])]))
}

/// Max entrywise deviation of `A†A` from the identity.
pub fn isometry_error(a: &CMatrix) -> f64 {
    let gram = a.adjoint() * a;
    max_abs_entry(&(gram - identity(a.ncols())))
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c_: usize) -> CMatrix {
        CMatrix::from_fn(r, c_, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let a = random_matrix(rng, n, n);
        (&a + a.adjoint()) * c(0.5, 0.0)
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&identity(3)).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(operator_norm(&CMatrix::zeros(4, 4)).unwrap(), 0.0);
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.3, 0.0), c(0.7, 0.0)]));
        assert!((operator_norm(&d).unwrap() - 0.7).abs() < 1e-14);
        assert!(matches!(operator_norm(&CMatrix::zeros(0, 0)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn eig_examples() {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]));
        let e = hermitian_eig(&d).unwrap();
        assert!((e.eigenvalues[0] - 2.0).abs() < 1e-14 && (e.eigenvalues[1] - 1.0).abs() < 1e-14);

        let psi = [c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)];
        let e = hermitian_eig(&outer(&psi)).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(e.eigenvalues[1..].iter().all(|l| l.abs() < 1e-12));

        let x = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let e = hermitian_eig(&x).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14 && (e.eigenvalues[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn truncation_examples() {
        let u = identity(4);
        let t = truncation(&u, 2, &[0]).unwrap();
        assert_eq!(t.shape(), (2, 1));
        assert_eq!(t[(0, 0)], c(1.0, 0.0));
        assert!((operator_norm(&t).unwrap() - 1.0).abs() < 1e-14);
        let t = truncation(&u, 2, &[3]).unwrap();
        assert_eq!(operator_norm(&t).unwrap(), 0.0);
        let f = fourier_matrix(2);
        let t = truncation(&f, 1, &[0]).unwrap();
        assert!((t[(0, 0)].re - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((operator_norm(&t).unwrap().powi(2) - 0.5).abs() < 1e-15);
        assert!(truncation(&u, 5, &[0]).is_err());
        assert!(truncation(&u, 2, &[4]).is_err());
    }

    #[test]
    fn eig_reconstruction_on_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = random_hermitian(&mut rng, 8);
            let e = hermitian_eig(&a).unwrap();
            let scale = operator_norm(&a).unwrap().max(1.0);
            assert!(operator_norm(&(e.reconstruct() - &a)).unwrap() <= 1e-10 * scale);
            assert!(isometry_error(&e.eigenvectors) <= 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn fourier_is_unitary() {
        for n in [1, 2, 5, 16] {
            assert!(isometry_error(&fourier_matrix(n)) < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn norm_matches_gram_route(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 8, 8);
            let direct = operator_norm(&a).unwrap();
            let gram = operator_norm(&(a.adjoint() * &a)).unwrap().sqrt();
            prop_assert!((direct - gram).abs() <= 1e-9);
        }

        #[test]
        fn unitary_truncations_are_contractions(seed in any::<u64>(), d in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_matrix(&mut rng, 8, 8);
            let q = g.qr().q();
            let cols: Vec<usize> = (0..8).filter(|_| rng.random_bool(0.5)).collect();
            prop_assume!(!cols.is_empty());
            let t = truncation(&q, d, &cols).unwrap();
            prop_assert!(operator_norm(&t).unwrap() <= 1.0 + 1e-10);
        }
    }
}
