//! Dense complex linear algebra shared by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`; the routines here add the
//! checks and conventions the rest of the crate relies on (sorted spectra,
//! deterministic polar completion, rank-revealing orthonormalization).

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

const MAX_SWEEPS: usize = 10_000;

/// Numerical tolerances, all relative to the Frobenius norm of the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub herm_tol: f64,
    pub eig_tol: f64,
    pub polar_tol: f64,
    pub svd_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm_tol: 1e-10,
            eig_tol: 1e-10,
            polar_tol: 1e-9,
            svd_tol: 1e-10,
        }
    }
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Largest entry of `|M - M^dagger|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry of `|M + M^dagger|`.
pub fn anti_hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] + m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Frobenius norm of `U^dagger U - I`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    (u.ad_mul(u) - identity(u.ncols())).norm()
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left factor most significant.
pub fn tensor(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .fold(CMatrix::from_element(1, 1, ONE), |acc, f| acc.kronecker(f))
}

pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

/// Build a matrix whose columns are the given vectors.
pub fn columns(vectors: &[CVector]) -> CMatrix {
    let rows = vectors.first().map_or(0, |v| v.len());
    CMatrix::from_fn(rows, vectors.len(), |r, c| vectors[c][r])
}

fn require_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_finite(m: &CMatrix) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::DegenerateInput("non-finite matrix entries".into()))
    }
}

/// Rotate each column so its first significant component is real and positive.
pub fn normalize_column_phases(m: &mut CMatrix) {
    for mut col in m.column_iter_mut() {
        let scale = col.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if scale == 0.0 {
            continue;
        }
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-8 * scale).copied() {
            let phase = lead.conj() / lead.norm();
            for z in col.iter_mut() {
                *z *= phase;
            }
        }
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and the unitary matrix whose
/// columns are the matching eigenvectors.
pub fn eig_hermitian(m: &CMatrix, tol: &Tolerances) -> Result<(Vec<f64>, CMatrix)> {
    require_square(m)?;
    check_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let scale = m.norm();
    let defect = hermitian_defect(m);
    if defect > tol.herm_tol * scale {
        return Err(Error::NonHermitianInput {
            defect,
            tol: tol.herm_tol * scale,
        });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::ConvergenceFailure {
            iterations: MAX_SWEEPS,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Full singular value decomposition `M = U diag(sigma) V^dagger`.
///
/// Singular values are returned in descending order. `U` is `rows x k` and
/// `V` is `cols x k` with `k = min(rows, cols)`.
pub fn svd(m: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok((CMatrix::zeros(rows, 0), Vec::new(), CMatrix::zeros(cols, 0)));
    }
    let dec = SVD::try_new(m.clone(), true, true, f64::EPSILON, MAX_SWEEPS).ok_or(
        Error::ConvergenceFailure {
            iterations: MAX_SWEEPS,
        },
    )?;
    let u = dec.u.expect("left singular vectors requested");
    let v = dec.v_t.expect("right singular vectors requested").adjoint();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let sigma = order.iter().map(|&i| dec.singular_values[i]).collect();
    let u = CMatrix::from_fn(rows, k, |r, c| u[(r, order[c])]);
    let v = CMatrix::from_fn(cols, k, |r, c| v[(r, order[c])]);
    Ok((u, sigma, v))
}

/// Polar decomposition `M = V_iso H` of a square matrix with `H = sqrt(M^dagger M)`.
///
/// On the kernel of `H` the isometry pairs left and right null singular
/// vectors in index order, so `V_iso` is always a full unitary.
pub fn polar_decompose(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    require_square(m)?;
    let (u, sigma, v) = svd(m)?;
    let iso = &u * v.adjoint();
    let sig = CMatrix::from_diagonal(&CVector::from_iterator(
        sigma.len(),
        sigma.iter().map(|&s| c64(s, 0.0)),
    ));
    let h = &v * sig * v.adjoint();
    let h = (&h + h.adjoint()).scale(0.5);
    Ok((iso, h))
}

/// Orthonormal basis of the column span.
///
/// The rank counts singular values above `rank_tol * sigma_max`.
pub fn orthonormalize(cols: &CMatrix, rank_tol: f64) -> Result<(CMatrix, usize)> {
    let rows = cols.nrows();
    if cols.ncols() == 0 || cols.norm() == 0.0 {
        return Ok((CMatrix::zeros(rows, 0), 0));
    }
    let (u, sigma, _) = svd(cols)?;
    let smax = sigma[0];
    let rank = sigma.iter().filter(|&&s| s > rank_tol * smax).count();
    Ok((u.columns(0, rank).into_owned(), rank))
}

/// Ratio of extreme singular values (infinite for rank-deficient input).
pub fn condition_number(m: &CMatrix) -> Result<f64> {
    let (_, sigma, _) = svd(m)?;
    match (sigma.first(), sigma.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
        (Some(_), Some(_)) => Ok(f64::INFINITY),
        _ => Ok(1.0),
    }
}

/// Moore-Penrose pseudo-inverse with relative singular value cutoff.
pub fn pseudo_inverse(m: &CMatrix, rel_cutoff: f64) -> Result<CMatrix> {
    let (u, sigma, v) = svd(m)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in sigma.iter().enumerate() {
        if s > rel_cutoff * smax && s > 0.0 {
            out += (v.column(k) * u.column(k).adjoint()).scale(1.0 / s);
        }
    }
    Ok(out)
}

/// Matrix exponential of an anti-Hermitian generator.
///
/// Computed through the spectral decomposition of the Hermitian matrix
/// `-iG`, which keeps the result unitary to working precision.
pub fn expm_antihermitian(g: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    require_square(g)?;
    check_finite(g)?;
    let scale = g.norm();
    let defect = anti_hermitian_defect(g);
    if defect > tol.herm_tol * scale {
        return Err(Error::NonAntiHermitianInput {
            defect,
            tol: tol.herm_tol * scale,
        });
    }
    let h = g.map(|z| z * -I);
    let h = (&h + h.adjoint()).scale(0.5);
    let (lambda, v) = eig_hermitian(&h, tol)?;
    let phases = CVector::from_iterator(lambda.len(), lambda.iter().map(|&l| (I * l).exp()));
    let mut vd = v.clone();
    for (c, mut col) in vd.column_iter_mut().enumerate() {
        col *= phases[c];
    }
    Ok(vd * v.adjoint())
}

/// Projector onto the column span of an orthonormal basis.
pub fn projector(basis: &CMatrix) -> CMatrix {
    basis * basis.adjoint()
}

/// Largest eigenvalue magnitude of a Hermitian matrix (operator norm).
pub fn hermitian_operator_norm(m: &CMatrix, tol: &Tolerances) -> Result<f64> {
    let (lambda, _) = eig_hermitian(m, tol)?;
    Ok(lambda.iter().fold(0.0f64, |acc, l| acc.max(l.abs())))
}

/// Operator 2-norm through the largest singular value.
pub fn operator_norm(m: &CMatrix) -> Result<f64> {
    let (_, sigma, _) = svd(m)?;
    Ok(sigma.first().copied().unwrap_or(0.0))
}
