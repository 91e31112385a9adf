use std::cmp::Ordering;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Side;

use super::{Complex, ComplexMatrix};
use crate::error::{Error, Result};

/// Residual bound above which an eigendecomposition is rejected.
pub const EIG_RESIDUAL_MAX: f64 = 1e-8;

/// `m = V diag(lambdas) V⁻¹` with canonically ordered eigenvalues.
#[derive(Debug, Clone)]
pub struct Eigendecomposition {
    pub v: ComplexMatrix,
    pub lambdas: Vec<Complex>,
    pub v_inv: ComplexMatrix,
    pub residual: f64,
}

impl Eigendecomposition {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let vl = ComplexMatrix::from_fn(self.v.rows(), self.v.cols(), |i, j| self.v[(i, j)] * self.lambdas[j]);
        vl.matmul(&self.v_inv)
    }

    /// Applies `f` to the spectrum: `V diag(f(λ)) V⁻¹`.
    pub fn apply(&self, f: impl Fn(Complex) -> Complex) -> ComplexMatrix {
        let fl: Vec<Complex> = self.lambdas.iter().map(|&l| f(l)).collect();
        let vl = ComplexMatrix::from_fn(self.v.rows(), self.v.cols(), |i, j| self.v[(i, j)] * fl[j]);
        vl.matmul(&self.v_inv)
    }
}

/// Result of an SVD-based rank decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdRank {
    pub rank: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub tol_used: f64,
}

fn require_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::ShapeMismatch(format!("{what} needs a nonempty square matrix, got {:?}", m.shape())));
    }
    Ok(())
}

/// Orders eigenvalues by descending modulus, then descending argument.
/// Moduli within `1e-9` relative are treated as tied.
pub fn canonical_order(lambdas: &[Complex]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..lambdas.len()).collect();
    idx.sort_by(|&a, &b| lambdas[b].norm().partial_cmp(&lambdas[a].norm()).unwrap_or(Ordering::Equal));
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let lead = lambdas[idx[start]].norm();
        let mut end = start + 1;
        while end < idx.len() && (lead - lambdas[idx[end]].norm()).abs() <= 1e-9 * lead.max(1.0) {
            end += 1;
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&a, &b| {
            canonical_arg(lambdas[b]).partial_cmp(&canonical_arg(lambdas[a])).unwrap_or(Ordering::Equal)
        });
        out.extend(group);
        start = end;
    }
    out
}

fn canonical_arg(z: Complex) -> f64 {
    let im = if z.im.abs() <= 1e-12 * z.norm().max(1e-300) { 0.0 } else { z.im };
    im.atan2(z.re)
}

/// Full eigendecomposition with a reconstruction-residual check.
pub fn eig(m: &ComplexMatrix) -> Result<Eigendecomposition> {
    require_square(m, "eig")?;
    if !m.is_finite() {
        return Err(Error::NonFinite("eig input".into()));
    }
    let n = m.rows();
    let evd = m
        .to_faer()
        .eigen()
        .map_err(|e| Error::DecompositionFailed(format!("{e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let raw: Vec<Complex> = (0..n).map(|i| s[i]).collect();
    let order = canonical_order(&raw);
    let lambdas: Vec<Complex> = order.iter().map(|&k| raw[k]).collect();
    let mut v = ComplexMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    for j in 0..n {
        let norm = (0..n).map(|i| v[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..n {
                v[(i, j)] /= norm;
            }
        }
    }
    let v_inv = ComplexMatrix::from_faer(v.to_faer().partial_piv_lu().inverse().as_ref());
    let mut dec = Eigendecomposition { v, lambdas, v_inv, residual: f64::INFINITY };
    let scale = m.frobenius_norm();
    let diff = (&dec.reconstruct() - m).frobenius_norm();
    let residual = if scale > 0.0 { diff / scale } else { diff };
    if !residual.is_finite() || !dec.v_inv.is_finite() || residual > EIG_RESIDUAL_MAX {
        return Err(Error::DecompositionFailed(format!("reconstruction residual {residual:e}")));
    }
    dec.residual = residual;
    Ok(dec)
}

/// Eigenvalues only, canonically ordered; no diagonalizability requirement.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<Complex>> {
    require_square(m, "eigenvalues")?;
    let raw = if m.is_real() {
        m.to_faer_real().eigenvalues()
    } else {
        m.to_faer().eigenvalues()
    }
    .map_err(|e| Error::DecompositionFailed(format!("{e:?}")))?;
    let order = canonical_order(&raw);
    Ok(order.into_iter().map(|k| raw[k]).collect())
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(Vec::new());
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("singular_values input".into()));
    }
    let sv = if m.is_real() {
        m.to_faer_real().singular_values()
    } else {
        m.to_faer().singular_values()
    };
    sv.map_err(|e| Error::DecompositionFailed(format!("svd: {e:?}")))
}

/// Thin SVD `m = U diag(s) Vᴴ`.
pub fn svd(m: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    let dec = m.to_faer().svd().map_err(|e| Error::DecompositionFailed(format!("svd: {e:?}")))?;
    let k = m.rows().min(m.cols());
    let s = dec.S().column_vector();
    let u = ComplexMatrix::from_faer(dec.U().as_ref());
    let v = ComplexMatrix::from_faer(dec.V().as_ref());
    Ok((u, (0..k).map(|i| s[i].re).collect(), v))
}

/// Counts singular values above `tol · σ_max`.
pub fn rank_with_tol(m: &ComplexMatrix, tol: f64) -> Result<SvdRank> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let sv = singular_values(m)?;
    Ok(rank_from_singular_values(&sv, tol))
}

pub fn rank_from_singular_values(sv: &[f64], tol: f64) -> SvdRank {
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let rank = if sigma_max > 0.0 { sv.iter().filter(|&&s| s > tol * sigma_max).count() } else { 0 };
    SvdRank { rank, sigma_min, sigma_max, tol_used: tol }
}

/// Orthonormal basis (as columns) of the numerical null space.
/// A singular value counts as zero when it is at most `max(tol · σ_max, abs_floor)`.
pub fn null_space(m: &ComplexMatrix, tol: f64, abs_floor: f64) -> Result<ComplexMatrix> {
    let n = m.cols();
    if m.rows() == 0 {
        return Ok(ComplexMatrix::identity(n));
    }
    let dec = m.to_faer().svd().map_err(|e| Error::DecompositionFailed(format!("svd: {e:?}")))?;
    let s = dec.S().column_vector();
    let k = m.rows().min(n);
    let sigma_max = if k > 0 { s[0].re } else { 0.0 };
    let thresh = (tol * sigma_max).max(abs_floor);
    let rank = (0..k).filter(|&i| s[i].re > thresh).count();
    let v = dec.V();
    Ok(ComplexMatrix::from_fn(n, n - rank, |i, j| v[(i, rank + j)]))
}

/// Inverse via LU, refusing numerically singular input (`σ_min ≤ 1e-14 σ_max`).
pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_square(m, "inverse")?;
    check_nonsingular(m, 1e-14)?;
    Ok(inverse_unchecked(m))
}

pub(crate) fn inverse_unchecked(m: &ComplexMatrix) -> ComplexMatrix {
    if m.is_real() {
        ComplexMatrix::from_faer_real(m.to_faer_real().partial_piv_lu().inverse().as_ref())
    } else {
        ComplexMatrix::from_faer(m.to_faer().partial_piv_lu().inverse().as_ref())
    }
}

/// Fails with `SingularInput` unless `σ_min > rel · σ_max`.
pub fn check_nonsingular(m: &ComplexMatrix, rel: f64) -> Result<()> {
    let sv = singular_values(m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if !(smin > rel * smax) {
        return Err(Error::SingularInput(format!("sigma_min {smin:e}, sigma_max {smax:e}")));
    }
    Ok(())
}

/// Solves `m x = rhs` for square nonsingular `m`.
pub fn solve(m: &ComplexMatrix, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_square(m, "solve")?;
    if m.rows() != rhs.rows() {
        return Err(Error::ShapeMismatch("solve rhs rows".into()));
    }
    check_nonsingular(m, 1e-14)?;
    Ok(solve_unchecked(m, rhs))
}

pub(crate) fn solve_unchecked(m: &ComplexMatrix, rhs: &ComplexMatrix) -> ComplexMatrix {
    if m.is_real() && rhs.is_real() {
        let x = m.to_faer_real().partial_piv_lu().solve(rhs.to_faer_real());
        ComplexMatrix::from_faer_real(x.as_ref())
    } else {
        let x = m.to_faer().partial_piv_lu().solve(rhs.to_faer());
        ComplexMatrix::from_faer(x.as_ref())
    }
}

pub fn determinant(m: &ComplexMatrix) -> Result<Complex> {
    require_square(m, "determinant")?;
    Ok(m.to_faer().determinant())
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    require_square(m, "hermitian_eigen")?;
    let n = m.rows();
    if m.is_real() {
        let e = m
            .to_faer_real()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::DecompositionFailed(format!("{e:?}")))?;
        let s = e.S().column_vector();
        Ok(((0..n).map(|i| s[i]).collect(), ComplexMatrix::from_faer_real(e.U().as_ref())))
    } else {
        let e = m
            .to_faer()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::DecompositionFailed(format!("{e:?}")))?;
        let s = e.S().column_vector();
        Ok(((0..n).map(|i| s[i].re).collect(), ComplexMatrix::from_faer(e.U().as_ref())))
    }
}

pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    require_square(m, "hermitian_eigenvalues")?;
    let r = if m.is_real() {
        m.to_faer_real().self_adjoint_eigenvalues(Side::Lower)
    } else {
        m.to_faer().self_adjoint_eigenvalues(Side::Lower).map(|v| v.into_iter().collect())
    };
    r.map_err(|e| Error::DecompositionFailed(format!("{e:?}")))
}
