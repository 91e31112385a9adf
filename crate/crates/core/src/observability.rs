//! Observability matrix, rank reports and the determinant and Hautus losses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{eig, rank_from_singular_values, singular_values, ComplexMatrix};

/// Margin used by every loss when none is given.
pub const DEFAULT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub rank: usize,
    pub n: usize,
    pub sigma_min: f64,
    /// `log det(𝒪ᴴ𝒪)`; `-inf` (JSON `null`) when rank-deficient.
    #[serde(with = "nullable_f64")]
    pub gram_logdet: f64,
    pub observable: bool,
    pub tol: f64,
}

pub(crate) mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// A nonnegative loss split into named terms that sum to `total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub terms: Vec<(String, f64)>,
}

impl LossValue {
    pub fn from_terms(terms: Vec<(String, f64)>) -> Self {
        let total = terms.iter().map(|t| t.1).sum();
        Self { total, terms }
    }

    pub fn single(name: &str, value: f64) -> Self {
        Self::from_terms(vec![(name.to_string(), value)])
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == name).map(|t| t.1)
    }

    pub fn is_zero(&self) -> bool {
        self.total == 0.0
    }
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn check_pair(c: &ComplexMatrix, a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() || c.cols() != a.rows() {
        return Err(Error::ShapeMismatch(format!("C {:?} with A {:?}", c.shape(), a.shape())));
    }
    Ok(())
}

/// Row blocks `C, CA, …, CA^{n−1}`.
pub fn obs_matrix(c: &ComplexMatrix, a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_pair(c, a)?;
    let n = a.rows();
    let mut blocks = Vec::with_capacity(n);
    let mut cur = c.clone();
    for k in 0..n {
        if k > 0 {
            cur = cur.matmul(a);
        }
        blocks.push(cur.clone());
    }
    ComplexMatrix::vstack(&blocks)
}

fn logdet_from_sv(sv: &[f64], n: usize, full_rank: bool) -> f64 {
    if !full_rank || sv.len() < n {
        return f64::NEG_INFINITY;
    }
    2.0 * sv.iter().map(|s| s.ln()).sum::<f64>()
}

pub fn obs_report(c: &ComplexMatrix, a: &ComplexMatrix, tol: f64) -> Result<ObservabilityReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let o = obs_matrix(c, a)?;
    let n = a.rows();
    let sv = singular_values(&o)?;
    let r = rank_from_singular_values(&sv, tol);
    let observable = r.rank == n;
    Ok(ObservabilityReport {
        rank: r.rank,
        n,
        sigma_min: if sv.len() < n { 0.0 } else { r.sigma_min },
        gram_logdet: logdet_from_sv(&sv, n, observable),
        observable,
        tol,
    })
}

fn check_margin(margin: f64) -> Result<()> {
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
    }
    Ok(())
}

/// `det(𝒪ᴴ𝒪)` as the exponential of the log-determinant; underflow yields 0.
pub fn gram_det(c: &ComplexMatrix, a: &ComplexMatrix) -> Result<f64> {
    let sv = singular_values(&obs_matrix(c, a)?)?;
    let n = a.rows();
    if sv.len() < n || sv.contains(&0.0) {
        return Ok(0.0);
    }
    Ok(logdet_from_sv(&sv, n, true).exp())
}

/// `relu(margin − det(𝒪ᴴ𝒪))`.
pub fn loss_obs_det(c: &ComplexMatrix, a: &ComplexMatrix, margin: f64) -> Result<LossValue> {
    check_margin(margin)?;
    Ok(LossValue::single("det_gap", relu(margin - gram_det(c, a)?)))
}

/// `det((A−λI)ᴴ(A−λI) + CᴴC)`, computed as the squared product of the
/// singular values of the stacked pencil `[A − λI; C]`.
pub fn pencil_det(c: &ComplexMatrix, a: &ComplexMatrix, lambda: crate::Complex) -> Result<f64> {
    check_pair(c, a)?;
    let n = a.rows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let sv = singular_values(&ComplexMatrix::vstack(&[shifted, c.clone()])?)?;
    Ok(sv.iter().map(|s| s * s).product())
}

/// `Σ_j relu(margin − det((A−λ_jI)ᴴ(A−λ_jI) + CᴴC))` over the eigenvalues of `A`.
pub fn loss_hautus_pencil(c: &ComplexMatrix, a: &ComplexMatrix, margin: f64) -> Result<LossValue> {
    check_margin(margin)?;
    check_pair(c, a)?;
    let dec = eig(a)?;
    let terms = dec
        .lambdas
        .iter()
        .enumerate()
        .map(|(j, &l)| Ok((format!("pencil_{j}"), relu(margin - pencil_det(c, a, l)?))))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossValue::from_terms(terms))
}

/// `Σ_j relu(margin − ‖C v_j‖²)` with each column of `v` normalized first.
pub fn loss_hautus_eigvec(c: &ComplexMatrix, v: &ComplexMatrix, margin: f64) -> Result<LossValue> {
    check_margin(margin)?;
    if c.cols() != v.rows() {
        return Err(Error::ShapeMismatch(format!("C {:?} with V {:?}", c.shape(), v.shape())));
    }
    let terms = (0..v.cols())
        .map(|j| {
            let col = v.column(j);
            let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidArgument(format!("eigenvector column {j} is zero")));
            }
            let cv: f64 = c.matvec(&col).iter().map(|z| z.norm_sqr()).sum::<f64>() / (norm * norm);
            Ok((format!("eigvec_{j}"), relu(margin - cv)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LossValue::from_terms(terms))
}
