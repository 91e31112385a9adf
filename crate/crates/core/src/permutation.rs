//! Permutation-structured state matrices: the root-of-unity matching loss,
//! a doubly-stochastic permutation certifier, nearest-permutation recovery
//! and the perturbed-permutation observability check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{eigenvalues, min_cost_assignment, min_cost_matching_distance, Complex, ComplexMatrix};
use crate::observability::{obs_matrix, obs_report, LossValue, ObservabilityReport};

/// `e^{−2πik/n}·scale`, `k = 0..n`.
pub fn roots_of_unity(n: usize, scale: f64) -> Vec<Complex> {
    (0..n)
        .map(|k| Complex::from_polar(scale, -std::f64::consts::TAU * k as f64 / n as f64))
        .collect()
}

/// Eigenvalue matching to (optionally `1/√n`-scaled) roots of unity plus
/// the column- and row-sum deviations from one.
pub fn loss_permutation(a: &ComplexMatrix, unit_modulus: bool) -> Result<LossValue> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!("A must be square, got {:?}", a.shape())));
    }
    let n = a.rows();
    let scale = if unit_modulus { 1.0 } else { 1.0 / (n as f64).sqrt() };
    let lambdas = eigenvalues(a)?;
    let (eig_term, _) = min_cost_matching_distance(&lambdas, &roots_of_unity(n, scale));
    let one = Complex::new(1.0, 0.0);
    let col: f64 = (0..n).map(|j| ((0..n).map(|i| a[(i, j)]).sum::<Complex>() - one).norm()).sum();
    let row: f64 = (0..n).map(|i| ((0..n).map(|j| a[(i, j)]).sum::<Complex>() - one).norm()).sum();
    Ok(LossValue::from_terms(vec![
        ("eigen_match".into(), eig_term),
        ("col_sums".into(), col),
        ("row_sums".into(), row),
    ]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationCertificate {
    pub is_permutation: bool,
    pub row_sum_residual: f64,
    pub col_sum_residual: f64,
    pub imag_residual: f64,
    pub min_entry: f64,
    /// Root-mean matching distance of the spectrum to the `n`-th roots of unity.
    pub eig_match_residual: f64,
    pub spectrum_matches: bool,
    pub nearest_perm: Option<ComplexMatrix>,
    /// `assignment[i] = j` means column `i` of the nearest permutation has its 1 in row `j`.
    pub assignment: Option<Vec<usize>>,
    pub xi_norm: f64,
    pub eps_sum: f64,
}

fn matrix_from_assignment(assign: &[usize]) -> ComplexMatrix {
    let n = assign.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (col, &row) in assign.iter().enumerate() {
        m[(row, col)] = Complex::new(1.0, 0.0);
    }
    m
}

/// Number of cycles of the permutation `i ↦ p[i]`.
pub fn cycle_count(p: &[usize]) -> usize {
    let mut seen = vec![false; p.len()];
    let mut count = 0;
    for start in 0..p.len() {
        if !seen[start] {
            count += 1;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = p[i];
            }
        }
    }
    count
}

fn build_certificate(q: &ComplexMatrix, tol: f64) -> Result<(PermutationCertificate, f64)> {
    if !q.is_square() {
        return Err(Error::ShapeMismatch(format!("expected a square matrix, got {:?}", q.shape())));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let n = q.rows();
    let one = Complex::new(1.0, 0.0);
    let row_sum_residual =
        (0..n).map(|i| ((0..n).map(|j| q[(i, j)]).sum::<Complex>() - one).norm()).fold(0.0, f64::max);
    let col_sum_residual =
        (0..n).map(|j| ((0..n).map(|i| q[(i, j)]).sum::<Complex>() - one).norm()).fold(0.0, f64::max);
    let imag_residual = q.max_imag();
    let min_entry = q.data().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);

    let lambdas = eigenvalues(q)?;
    let (to_roots, _) = min_cost_matching_distance(&lambdas, &roots_of_unity(n, 1.0));
    let eig_match_residual = (to_roots / n.max(1) as f64).sqrt();

    // Column i is assigned to the row holding its largest-magnitude mass.
    let cost: Vec<f64> = (0..n * n).map(|k| -q[(k % n, k / n)].norm()).collect();
    let assign = min_cost_assignment(&cost, n);
    let weight: f64 = assign.iter().enumerate().map(|(col, &row)| q[(row, col)].norm()).sum();
    let perm = matrix_from_assignment(&assign);
    let xi_norm = (q - &perm).frobenius_norm();
    let eps_sum = min_cost_matching_distance(&lambdas, &eigenvalues(&perm)?).0;
    let rounds_exactly = q.data().iter().zip(perm.data()).all(|(a, b)| (a - b).norm() <= tol);

    let is_permutation = imag_residual <= tol
        && row_sum_residual <= tol
        && col_sum_residual <= tol
        && min_entry >= -tol
        && rounds_exactly;
    let has_weight = weight > tol;
    Ok((
        PermutationCertificate {
            is_permutation,
            row_sum_residual,
            col_sum_residual,
            imag_residual,
            min_entry,
            eig_match_residual,
            spectrum_matches: eig_match_residual <= tol,
            nearest_perm: has_weight.then_some(perm),
            assignment: has_weight.then_some(assign),
            xi_norm,
            eps_sum,
        },
        weight,
    ))
}

/// Decides whether `q` is (numerically) a permutation matrix.
pub fn certify_permutation(q: &ComplexMatrix, tol: f64) -> Result<PermutationCertificate> {
    Ok(build_certificate(q, tol)?.0)
}

/// Closest permutation by maximum-weight matching on entry magnitudes,
/// with `‖P − Q‖_F` and the matched eigenvalue deviation `Σ εᵢ²`.
pub fn nearest_permutation(p: &ComplexMatrix, tol: f64) -> Result<PermutationCertificate> {
    let (cert, weight) = build_certificate(p, tol)?;
    if cert.nearest_perm.is_none() {
        return Err(Error::NoAssignment(format!("matched entries carry weight {weight:e}")));
    }
    Ok(cert)
}

/// Admissibility of `C` for the permutation observability theorem: no
/// nonzero column may be parallel to the sum of the other columns.
pub fn check_c_nonconstant(c: &ComplexMatrix, tol: f64) -> bool {
    let (m, n) = c.shape();
    if m < 2 || n == 0 {
        return false;
    }
    let cols: Vec<Vec<Complex>> = (0..n).map(|j| c.column(j)).collect();
    let norm = |v: &[Complex]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = c.frobenius_norm();
    (0..n).all(|k| {
        let psi = &cols[k];
        let psi_norm = norm(psi);
        if psi_norm <= 1e-14 * scale {
            return true;
        }
        let s: Vec<Complex> = (0..m)
            .map(|i| (0..n).filter(|&j| j != k).map(|j| cols[j][i]).sum())
            .collect();
        let s_norm = norm(&s);
        if s_norm <= 1e-14 * scale {
            return true;
        }
        let coef: Complex = s.iter().zip(psi).map(|(a, b)| a.conj() * b).sum::<Complex>() / (s_norm * s_norm);
        let resid: Vec<Complex> = psi.iter().zip(&s).map(|(p, q)| p - coef * q).collect();
        norm(&resid) / psi_norm > tol
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Check {
    pub report: ObservabilityReport,
    pub certificate: PermutationCertificate,
    /// `‖𝒪_Pᴴ𝒪_P − 𝒪_Qᴴ𝒪_Q‖_F`.
    pub gram_diff: f64,
    /// `Σ_i ‖(Pⁱ)ᴴCᴴCPⁱ − (Qⁱ)ᴴCᴴCQⁱ‖_F`, `i = 0..n`.
    pub premise_sum: f64,
    pub xi_norm: f64,
    pub eps_sum: f64,
    /// `eps_sum / ‖Ξ‖²_F`.
    pub eps_ratio: f64,
    /// `eps_sum / (n‖Ξ‖²_F)`.
    pub eps_ratio_n: f64,
}

/// Observability of `(C, P)` for `P` near a single-cycle permutation `Q`,
/// with the Gram-difference diagnostics the perturbation argument uses.
pub fn theorem2_check(c: &ComplexMatrix, p: &ComplexMatrix, xi_max: f64, tol: f64) -> Result<Theorem2Check> {
    if c.cols() != p.rows() {
        return Err(Error::ShapeMismatch(format!("C {:?} with P {:?}", c.shape(), p.shape())));
    }
    if !check_c_nonconstant(c, 1e-8) {
        return Err(Error::HypothesisFailed("C is constant among permutations".into()));
    }
    let cert = nearest_permutation(p, tol)?;
    let assign = cert.assignment.clone().expect("nearest_permutation sets the assignment");
    if cycle_count(&assign) != 1 {
        return Err(Error::HypothesisFailed(
            "nearest permutation is not a single cycle, so its roots of unity repeat".into(),
        ));
    }
    if cert.xi_norm > xi_max {
        return Err(Error::HypothesisFailed(format!("perturbation {} exceeds {xi_max}", cert.xi_norm)));
    }
    let q = cert.nearest_perm.clone().expect("set with the assignment");
    let report = obs_report(c, p, tol)?;
    let op = obs_matrix(c, p)?;
    let oq = obs_matrix(c, &q)?;
    let gram_diff = (&op.adjoint().matmul(&op) - &oq.adjoint().matmul(&oq)).frobenius_norm();
    let ctc = c.adjoint().matmul(c);
    let n = p.rows();
    let (mut pk, mut qk) = (ComplexMatrix::identity(n), ComplexMatrix::identity(n));
    let mut premise_sum = 0.0;
    for i in 0..n {
        if i > 0 {
            pk = pk.matmul(p);
            qk = qk.matmul(&q);
        }
        let dp = pk.adjoint().matmul(&ctc).matmul(&pk);
        let dq = qk.adjoint().matmul(&ctc).matmul(&qk);
        premise_sum += (&dp - &dq).frobenius_norm();
    }
    let xi2 = cert.xi_norm * cert.xi_norm;
    let ratio = |d: f64| if xi2 > 0.0 { cert.eps_sum / d } else { 0.0 };
    Ok(Theorem2Check {
        report,
        gram_diff,
        premise_sum,
        xi_norm: cert.xi_norm,
        eps_sum: cert.eps_sum,
        eps_ratio: ratio(xi2),
        eps_ratio_n: ratio(n as f64 * xi2),
        certificate: cert,
    })
}
