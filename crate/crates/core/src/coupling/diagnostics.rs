use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{hermitian_eigen, Complex, ComplexMatrix};

/// Fitted decay exponents at or below this classify a series as divergent.
pub const DIVERGENCE_EXPONENT: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesClass {
    DivergentLike,
    ConvergentLike,
}

/// Finite-`N` summary of `Σ xₖ^power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub power: f64,
    pub terms: usize,
    pub partial_sum: f64,
    /// `s` in a least-squares fit `tₖ ≈ c·k^{−s}` over the second half.
    pub decay_exponent: f64,
    /// Integral estimate of `Σ_{k>N} tₖ`; infinite when divergent-like.
    pub tail_estimate: f64,
    pub limit_estimate: Option<f64>,
    /// Fit of the partial sums against `a + b·ln k`.
    pub log_intercept: f64,
    pub log_slope: f64,
    pub log_r2: f64,
    pub class: SeriesClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobbinsMonroReport {
    pub q: f64,
    /// `Σ x^{1/2q}`, expected divergent.
    pub a_step: SeriesReport,
    /// `Σ x^{1/q}`, expected convergent.
    pub a_square: SeriesReport,
    /// `Σ x^{1/q}`, expected divergent.
    pub b_step: SeriesReport,
    /// `Σ x^{2/q}`, expected convergent.
    pub b_square: SeriesReport,
}

impl RobbinsMonroReport {
    pub fn a_satisfied(&self) -> bool {
        self.a_step.class == SeriesClass::DivergentLike && self.a_square.class == SeriesClass::ConvergentLike
    }

    pub fn b_satisfied(&self) -> bool {
        self.b_step.class == SeriesClass::DivergentLike && self.b_square.class == SeriesClass::ConvergentLike
    }
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (ys.first().copied().unwrap_or(0.0), 0.0, 0.0);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return (my, 0.0, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (my - slope * mx, slope, r2)
}

fn series_report(xs: &[f64], power: f64) -> SeriesReport {
    let terms: Vec<f64> = xs.iter().map(|x| x.max(0.0).powf(power)).collect();
    let n = terms.len();
    let mut partial = Vec::with_capacity(n);
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial.push(acc);
    }
    let half = n / 2;
    let (mut lk, mut lt) = (Vec::new(), Vec::new());
    for (i, t) in terms.iter().enumerate().skip(half) {
        if *t > 0.0 {
            lk.push(((i + 1) as f64).ln());
            lt.push(t.ln());
        }
    }
    let (ln_c, neg_s, _) = linear_fit(&lk, &lt);
    let s = if lk.len() >= 2 { -neg_s } else { 0.0 };
    let class = if s <= DIVERGENCE_EXPONENT { SeriesClass::DivergentLike } else { SeriesClass::ConvergentLike };
    let tail = match class {
        SeriesClass::DivergentLike => f64::INFINITY,
        SeriesClass::ConvergentLike => ln_c.exp() * (n as f64 + 0.5).powf(1.0 - s) / (s - 1.0),
    };
    let (mut lnk, mut sums) = (Vec::new(), Vec::new());
    for (i, s) in partial.iter().enumerate().skip(half) {
        lnk.push(((i + 1) as f64).ln());
        sums.push(*s);
    }
    let (a, b, r2) = linear_fit(&lnk, &sums);
    SeriesReport {
        power,
        terms: n,
        partial_sum: acc,
        decay_exponent: s,
        tail_estimate: tail,
        limit_estimate: (class == SeriesClass::ConvergentLike).then_some(acc + tail),
        log_intercept: a,
        log_slope: b,
        log_r2: r2,
        class,
    }
}

/// Classifies the step-size series built from the per-step norms `x_k`
/// (index `k` starting at 1).
pub fn robbins_monro_diagnostic(step_norms: &[f64], q: f64) -> RobbinsMonroReport {
    RobbinsMonroReport {
        q,
        a_step: series_report(step_norms, 1.0 / (2.0 * q)),
        a_square: series_report(step_norms, 1.0 / q),
        b_step: series_report(step_norms, 1.0 / q),
        b_square: series_report(step_norms, 2.0 / q),
    }
}

/// Derivative of `Eigen(B) = Q·diag(√λ)` with respect to each entry of `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigJacobian {
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub q: Vec<f64>,
    data: Vec<f64>,
}

impl EigJacobian {
    /// `∂A_ij / ∂B_kl`.
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Ascending eigenvalues and real orthonormal eigenvectors of a real
/// symmetric matrix, each column signed so its largest entry is positive.
pub fn eigen_factor(b: &ComplexMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if !b.is_square() {
        return Err(Error::ShapeMismatch(format!("expected square, got {:?}", b.shape())));
    }
    if !b.is_real() || b.max_abs_diff(&b.transpose()) > 1e-12 * b.max_abs().max(1.0) {
        return Err(Error::InvalidArgument("expected a real symmetric matrix".into()));
    }
    let n = b.rows();
    let (lambdas, v) = hermitian_eigen(b)?;
    let mut q = vec![0.0; n * n];
    for j in 0..n {
        let col = v.column(j);
        let pivot = col.iter().copied().fold(Complex::new(0.0, 0.0), |best, z| if z.norm() > best.norm() { z } else { best });
        let phase = pivot.conj() / pivot.norm();
        for i in 0..n {
            q[i * n + j] = (col[i] * phase).re;
        }
    }
    Ok((lambdas, q))
}

pub fn eig_jacobian(b: &ComplexMatrix) -> Result<EigJacobian> {
    let (lambdas, q) = eigen_factor(b)?;
    let n = lambdas.len();
    for w in lambdas.windows(2) {
        if w[1] - w[0] < 1e-8 {
            return Err(Error::DegenerateSpectrum(format!("eigenvalues {} and {} coincide", w[0], w[1])));
        }
    }
    if let Some(&bad) = lambdas.iter().find(|&&l| l <= 0.0) {
        return Err(Error::NonPositiveEigenvalue(bad));
    }
    let qa = |i: usize, j: usize| q[i * n + j];
    let mut data = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            let sj = lambdas[j].sqrt();
            for k in 0..n {
                for l in 0..n {
                    let mut dq = 0.0;
                    for p in 0..n {
                        if p != j {
                            dq += qa(i, p) * qa(k, p) * qa(l, j) / (lambdas[j] - lambdas[p]);
                        }
                    }
                    data[((i * n + j) * n + k) * n + l] = sj * dq + qa(i, j) * qa(k, j) * qa(l, j) / (2.0 * sj);
                }
            }
        }
    }
    Ok(EigJacobian { n, lambdas, q, data })
}

/// `√((n−1)/g²·Σλ) − √(Σ 1/(4λ))` with `g` the largest pairwise gap.
pub fn lipschitz_lower_bound(lambdas: &[f64]) -> Result<f64> {
    if let Some(&bad) = lambdas.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::NonPositiveEigenvalue(bad));
    }
    let hi = lambdas.iter().copied().fold(f64::MIN, f64::max);
    let lo = lambdas.iter().copied().fold(f64::MAX, f64::min);
    let gap = hi - lo;
    if lambdas.len() < 2 || gap <= 0.0 {
        return Err(Error::DegenerateSpectrum("needs at least two distinct eigenvalues".into()));
    }
    let n = lambdas.len() as f64;
    let sum: f64 = lambdas.iter().sum();
    let inv: f64 = lambdas.iter().map(|l| 0.25 / l).sum();
    Ok(((n - 1.0) / (gap * gap) * sum).sqrt() - inv.sqrt())
}
