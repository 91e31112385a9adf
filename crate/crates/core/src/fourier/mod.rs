//! Diagonal Fourier spectra of the sampled impulse response (`Φʲ`) and of
//! the bilinear convolution kernel (`Ψʲ`), the losses built on them, and the
//! kernel-vector construction that separates Fourier components.

pub mod experiments;

pub use experiments::{
    eig_trajectory, experiment_kernel_distinctness, experiment_rowspace_rank, kernels_equal, EigSampler,
    KernelMode, TrajectoryPoint,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{check_nonsingular, solve, Complex, ComplexMatrix};
use crate::observability::{relu, LossValue};

/// Modulus below which a denominator counts as a pole.
pub const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    PhiImpulse,
    PsiConv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagSpectrum {
    pub kind: SpectrumKind,
    pub j: usize,
    pub entries: Vec<Complex>,
    pub delta: f64,
    pub big_l: usize,
}

/// `e^{−2πij/L}`.
pub fn omega(j: usize, big_l: usize) -> Complex {
    Complex::from_polar(1.0, -std::f64::consts::TAU * j as f64 / big_l as f64)
}

fn check_params(delta: f64, big_l: usize) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if big_l < 2 {
        return Err(Error::InvalidArgument(format!("L must be at least 2, got {big_l}")));
    }
    Ok(())
}

fn guarded(den: Complex, index: usize) -> Result<Complex> {
    if den.norm() < POLE_TOL {
        return Err(Error::PoleHit { index, modulus: den.norm() });
    }
    Ok(den)
}

/// `1/(1 − e^{λΔ}ω_j)` for each eigenvalue.
pub fn resolvent_diag(j: usize, lambdas: &[Complex], delta: f64, big_l: usize) -> Result<Vec<Complex>> {
    check_params(delta, big_l)?;
    let w = omega(j, big_l);
    lambdas
        .iter()
        .enumerate()
        .map(|(k, &l)| Ok(1.0 / guarded(1.0 - (l * delta).exp() * w, k)?))
        .collect()
}

/// `Φʲ_kk = (1 − e^{λ_k LΔ}) / (1 − e^{λ_kΔ − 2πij/L})`.
pub fn phi_diag(j: usize, lambdas: &[Complex], delta: f64, big_l: usize) -> Result<DiagSpectrum> {
    let res = resolvent_diag(j, lambdas, delta, big_l)?;
    let entries = lambdas
        .iter()
        .zip(res)
        .map(|(&l, r)| (1.0 - (l * (delta * big_l as f64)).exp()) * r)
        .collect();
    Ok(DiagSpectrum { kind: SpectrumKind::PhiImpulse, j, entries, delta, big_l })
}

/// Bilinear eigenvalue `(1 + Δλ/2)/(1 − Δλ/2)`.
pub fn cayley(lambda: Complex, delta: f64) -> Complex {
    (1.0 + lambda * delta / 2.0) / (1.0 - lambda * delta / 2.0)
}

/// `Ψʲ_kk = (1 − r_k^L) / (1 − r_k ω_j)` with `r_k` the bilinear eigenvalue,
/// i.e. the `j`-th DFT coefficient of `r_k^0, …, r_k^{L−1}`.
pub fn psi_diag(j: usize, lambdas: &[Complex], delta: f64, big_l: usize) -> Result<DiagSpectrum> {
    check_params(delta, big_l)?;
    let w = omega(j, big_l);
    let entries = lambdas
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            guarded(1.0 - l * delta / 2.0, k)?;
            let r = cayley(l, delta);
            Ok((1.0 - r.powu(big_l as u32)) / guarded(1.0 - r * w, k)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagSpectrum { kind: SpectrumKind::PsiConv, j, entries, delta, big_l })
}

/// Three margins for the spectral losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub gap: f64,
    pub cross: f64,
    pub angle: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Self { gap: 0.05, cross: 0.05, angle: 0.05 }
    }
}

impl Margins {
    pub fn uniform(m: f64) -> Self {
        Self { gap: m, cross: m, angle: m }
    }

    /// One value applies to all three terms; three values apply in order.
    pub fn from_slice(ms: &[f64]) -> Result<Self> {
        let m = match ms {
            [] => Self::default(),
            [a] => Self::uniform(*a),
            [a, b, c] => Self { gap: *a, cross: *b, angle: *c },
            _ => return Err(Error::InvalidArgument(format!("expected 1 or 3 margins, got {}", ms.len()))),
        };
        if [m.gap, m.cross, m.angle].iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidArgument("margins must be positive".into()));
        }
        Ok(m)
    }
}

fn min_gap(xs: &[Complex]) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..xs.len() {
        for b in a + 1..xs.len() {
            best = best.min((xs[a] - xs[b]).norm());
        }
    }
    best
}

/// `|1/n Σ_k e^{iθ_k}|` with `θ_k` the principal argument.
pub fn angular_mean(lambdas: &[Complex]) -> f64 {
    if lambdas.is_empty() {
        return 0.0;
    }
    let s: Complex = lambdas.iter().map(|l| Complex::from_polar(1.0, l.arg())).sum();
    s.norm() / lambdas.len() as f64
}

fn cross_term(spectra: &[Vec<Complex>], margin: f64, squared: bool) -> f64 {
    let mut total = 0.0;
    for (a, sa) in spectra.iter().enumerate() {
        for (b, sb) in spectra.iter().enumerate() {
            if a == b {
                continue;
            }
            for (x, y) in sa.iter().zip(sb) {
                let d = (x - y).norm();
                total += relu(margin - if squared { d * d } else { d });
            }
        }
    }
    total
}

/// Loss whose zero set enforces distinct eigenvalues, distinct `Φʲ` across
/// `j ∈ 1..L`, and angular dispersion of the spectrum.
pub fn loss_thm3(lambdas: &[Complex], delta: f64, big_l: usize, margins: Margins) -> Result<LossValue> {
    let spectra = (1..big_l)
        .map(|j| Ok(phi_diag(j, lambdas, delta, big_l)?.entries))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossValue::from_terms(vec![
        ("eig_gap".into(), relu(margins.gap - min_gap(lambdas))),
        ("cross_j".into(), cross_term(&spectra, margins.cross, false)),
        ("angle".into(), relu(angular_mean(lambdas) - margins.angle)),
    ]))
}

/// Same structure with `Ψʲ`: per-`j` entry gaps, squared cross-`j` gaps,
/// and angular dispersion.
pub fn loss_thm4(lambdas: &[Complex], delta: f64, big_l: usize, margins: Margins) -> Result<LossValue> {
    let spectra = (1..big_l)
        .map(|j| Ok(psi_diag(j, lambdas, delta, big_l)?.entries))
        .collect::<Result<Vec<_>>>()?;
    let gap: f64 = spectra.iter().map(|s| relu(margins.gap - min_gap(s))).sum();
    Ok(LossValue::from_terms(vec![
        ("psi_gap".into(), gap),
        ("cross_j".into(), cross_term(&spectra, margins.cross, true)),
        ("angle".into(), relu(angular_mean(lambdas) - margins.angle)),
    ]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelVariant {
    Thm3,
    Thm4,
}

/// Diagonal used by the kernel construction at Fourier index `j`.
pub fn construction_diag(
    variant: KernelVariant,
    j: usize,
    lambdas: &[Complex],
    delta: f64,
    big_l: usize,
) -> Result<Vec<Complex>> {
    match variant {
        KernelVariant::Thm3 => resolvent_diag(j, lambdas, delta, big_l),
        KernelVariant::Thm4 => Ok(psi_diag(j, lambdas, delta, big_l)?.entries),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelVector {
    pub j1: usize,
    pub psi_tilde: Vec<Complex>,
    /// `‖C V D_{j1} ψ̃‖₂`.
    pub residual: f64,
    /// Set when `n = m`: the kernel is trivial and `psi_tilde` is zero.
    pub is_trivial: bool,
}

fn apply_diag_cols(m: &ComplexMatrix, d: &[Complex], x: &[Complex]) -> Vec<Complex> {
    let scaled: Vec<Complex> = d.iter().zip(x).map(|(a, b)| a * b).collect();
    m.matvec(&scaled)
}

fn norm2(v: &[Complex]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Builds `ψ̃` with `C V D_{j1} ψ̃ = 0` by fixing the trailing `n − m`
/// entries to one and solving the leading `m × m` system.
pub fn kernel_vector(
    variant: KernelVariant,
    j1: usize,
    c: &ComplexMatrix,
    v: &ComplexMatrix,
    lambdas: &[Complex],
    delta: f64,
    big_l: usize,
) -> Result<KernelVector> {
    let cv = c.try_matmul(v)?;
    kernel_vector_cv(variant, j1, &cv, lambdas, delta, big_l)
}

fn kernel_vector_cv(
    variant: KernelVariant,
    j1: usize,
    cv: &ComplexMatrix,
    lambdas: &[Complex],
    delta: f64,
    big_l: usize,
) -> Result<KernelVector> {
    let (m, n) = cv.shape();
    if lambdas.len() != n {
        return Err(Error::ShapeMismatch(format!("{} eigenvalues for {n} columns", lambdas.len())));
    }
    if m > n {
        return Err(Error::ShapeMismatch(format!("C V is {m}x{n}, expected m <= n")));
    }
    let d = construction_diag(variant, j1, lambdas, delta, big_l)?;
    if m == n {
        return Ok(KernelVector { j1, psi_tilde: vec![Complex::new(0.0, 0.0); n], residual: 0.0, is_trivial: true });
    }
    let q = ComplexMatrix::from_fn(m, m, |l, k| cv[(l, k)] * d[k]);
    let p_tilde = ComplexMatrix::from_fn(m, 1, |l, _| (m..n).map(|k| cv[(l, k)] * d[k]).sum());
    check_nonsingular(&q, 1e-10).map_err(|_| Error::SingularQ(j1))?;
    let head = solve(&q, &p_tilde.scale_real(-1.0)).map_err(|_| Error::SingularQ(j1))?;
    let mut psi_tilde = head.column(0);
    psi_tilde.extend(std::iter::repeat_n(Complex::new(1.0, 0.0), n - m));
    let residual = norm2(&apply_diag_cols(cv, &d, &psi_tilde));
    Ok(KernelVector { j1, psi_tilde, residual, is_trivial: false })
}

/// Kernel-separation loss with the indices where the construction failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDistinctLoss {
    pub loss: LossValue,
    pub skipped: Vec<usize>,
}

/// `Σ_{j1} Σ_{j2≠j1} relu(margin − ‖CV D_{j1}ψ̃_{j1} − CV D_{j2}ψ̃_{j1}‖²)`
/// over `j1, j2 ∈ 1..L`.
#[allow(clippy::too_many_arguments)]
pub fn loss_kernel_distinct(
    variant: KernelVariant,
    c: &ComplexMatrix,
    v: &ComplexMatrix,
    lambdas: &[Complex],
    delta: f64,
    big_l: usize,
    margin: f64,
) -> Result<KernelDistinctLoss> {
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
    }
    let cv = c.try_matmul(v)?;
    let diags = (1..big_l)
        .map(|j| construction_diag(variant, j, lambdas, delta, big_l))
        .collect::<Result<Vec<_>>>()?;
    let mut terms = Vec::new();
    let mut skipped = Vec::new();
    for j1 in 1..big_l {
        let kv = match kernel_vector_cv(variant, j1, &cv, lambdas, delta, big_l) {
            Ok(kv) => kv,
            Err(Error::SingularQ(_)) => {
                skipped.push(j1);
                continue;
            }
            Err(e) => return Err(e),
        };
        let own = apply_diag_cols(&cv, &diags[j1 - 1], &kv.psi_tilde);
        let mut total = 0.0;
        for j2 in (1..big_l).filter(|&j2| j2 != j1) {
            let other = apply_diag_cols(&cv, &diags[j2 - 1], &kv.psi_tilde);
            let diff: f64 = own.iter().zip(&other).map(|(a, b)| (a - b).norm_sqr()).sum();
            total += relu(margin - diff);
        }
        terms.push((format!("j{j1}"), total));
    }
    Ok(KernelDistinctLoss { loss: LossValue::from_terms(terms), skipped })
}

/// `C V diag(d) V⁻¹ B`.
pub fn diag_sandwich(
    c: &ComplexMatrix,
    v: &ComplexMatrix,
    d: &[Complex],
    v_inv: &ComplexMatrix,
    b: &ComplexMatrix,
) -> ComplexMatrix {
    c.matmul(v).matmul(&ComplexMatrix::from_diag(d)).matmul(&v_inv.matmul(b))
}

/// Whether `I − e^{ALΔ}` is numerically invertible, judged on its spectrum.
pub fn impulse_factor_full_rank(lambdas: &[Complex], delta: f64, big_l: usize, tol: f64) -> bool {
    lambdas.iter().all(|&l| (1.0 - (l * (delta * big_l as f64)).exp()).norm() > tol)
}
