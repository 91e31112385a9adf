use std::f64::consts::PI;

use super::decomp::{eig, eigenvalues, inverse_unchecked, solve_unchecked};
use super::{Complex, ComplexMatrix};
use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &ComplexMatrix) -> f64 {
    (0..m.cols()).map(|j| (0..m.rows()).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn axpy_sum(terms: &[(f64, &ComplexMatrix)]) -> ComplexMatrix {
    let (r, c) = terms[0].1.shape();
    ComplexMatrix::from_fn(r, c, |i, j| terms.iter().map(|(s, m)| m[(i, j)] * *s).sum())
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn mat_exp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch("mat_exp needs a square matrix".into()));
    }
    let n = m.rows();
    let norm = one_norm(m);
    if norm == 0.0 {
        return Ok(ComplexMatrix::identity(n));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = m.scale_real(0.5f64.powi(s));
    let id = ComplexMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let b = &PADE13;
    let inner_u = axpy_sum(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)]);
    let u = a.matmul(&(&a6.matmul(&inner_u) + &axpy_sum(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &id)])));
    let inner_v = axpy_sum(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)]);
    let v = &a6.matmul(&inner_v) + &axpy_sum(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &id)]);
    let mut r = solve_unchecked(&(&v - &u), &(&v + &u));
    for _ in 0..s {
        r = r.matmul(&r);
    }
    if !r.is_finite() {
        return Err(Error::NonFinite("mat_exp overflow".into()));
    }
    Ok(r)
}

/// Principal matrix logarithm.
///
/// Uses the eigendecomposition when it is well conditioned and inverse
/// scaling and squaring otherwise.
pub fn mat_log(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch("mat_log needs a square matrix".into()));
    }
    let lambdas = eigenvalues(m)?;
    let scale = lambdas.iter().fold(0.0f64, |a, l| a.max(l.norm()));
    for l in &lambdas {
        if l.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) || scale == 0.0 {
            return Err(Error::SingularInput(format!("eigenvalue {l}")));
        }
        if l.re < 0.0 && l.im.abs() <= 1e-12 * l.norm() {
            return Err(Error::BranchCut(format!("{l}")));
        }
    }
    if let Ok(dec) = eig(m) {
        let cond = dec.v.frobenius_norm() * dec.v_inv.frobenius_norm();
        if cond < 1e6 {
            return Ok(dec.apply(|z| z.ln()));
        }
    }
    log_inverse_scaling(m)
}

fn sqrtm_denman_beavers(x: &ComplexMatrix) -> ComplexMatrix {
    let n = x.rows();
    let mut y = x.clone();
    let mut z = ComplexMatrix::identity(n);
    for _ in 0..100 {
        let y_inv = inverse_unchecked(&y);
        let z_inv = inverse_unchecked(&z);
        let y_next = (&y + &z_inv).scale_real(0.5);
        let z_next = (&z + &y_inv).scale_real(0.5);
        let delta = (&y_next - &y).frobenius_norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.frobenius_norm() {
            break;
        }
    }
    y
}

fn log_inverse_scaling(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.rows();
    let id = ComplexMatrix::identity(n);
    let mut x = m.clone();
    let mut k = 0;
    while one_norm(&(&x - &id)) > 0.25 {
        x = sqrtm_denman_beavers(&x);
        k += 1;
        if k > 64 || !x.is_finite() {
            return Err(Error::DecompositionFailed("inverse scaling did not converge".into()));
        }
    }
    // log X = 2 artanh(Z), Z = (X − I)(X + I)⁻¹
    let z = solve_unchecked(&(&x + &id).transpose(), &(&x - &id).transpose()).transpose();
    let z2 = z.matmul(&z);
    let mut term = z.clone();
    let mut acc = z;
    for p in 1..40 {
        term = term.matmul(&z2);
        let add = term.scale_real(1.0 / (2 * p + 1) as f64);
        let size = add.frobenius_norm();
        acc = &acc + &add;
        if size <= 1e-18 * acc.frobenius_norm() {
            break;
        }
    }
    Ok(acc.scale_real(2.0 * 2f64.powi(k)))
}

/// Kronecker product with the standard block layout.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    ComplexMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// `e^{−2πi p/L}` for `p = 0..L`.
pub fn twiddles(big_l: usize) -> Vec<Complex> {
    (0..big_l).map(|p| Complex::from_polar(1.0, -2.0 * PI * p as f64 / big_l as f64)).collect()
}

/// `K̂_j = Σ_k K̄_k e^{−2πi jk/L}` for `j = 0..L`.
pub fn dft_sequence(ks: &[ComplexMatrix], big_l: usize) -> Result<Vec<ComplexMatrix>> {
    dft_with_sign(ks, big_l, false)
}

/// Inverse of [`dft_sequence`] (conjugate transform divided by `L`).
pub fn idft_sequence(ks: &[ComplexMatrix], big_l: usize) -> Result<Vec<ComplexMatrix>> {
    let out = dft_with_sign(ks, big_l, true)?;
    Ok(out.into_iter().map(|m| m.scale_real(1.0 / big_l as f64)).collect())
}

fn dft_with_sign(ks: &[ComplexMatrix], big_l: usize, conj: bool) -> Result<Vec<ComplexMatrix>> {
    if big_l == 0 || ks.len() != big_l {
        return Err(Error::ShapeMismatch(format!("expected {big_l} kernel blocks, got {}", ks.len())));
    }
    let shape = ks[0].shape();
    if ks.iter().any(|k| k.shape() != shape) {
        return Err(Error::ShapeMismatch("kernel blocks differ in shape".into()));
    }
    let mut w = twiddles(big_l);
    if conj {
        w.iter_mut().for_each(|z| *z = z.conj());
    }
    Ok((0..big_l)
        .map(|j| {
            ComplexMatrix::from_fn(shape.0, shape.1, |r, c| {
                (0..big_l).map(|k| ks[k][(r, c)] * w[(j * k) % big_l]).sum()
            })
        })
        .collect())
}
