use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::psi_diag;
use crate::error::{Error, Result};
use crate::matcore::{inverse, null_space, rank_with_tol, singular_values, Complex, ComplexMatrix};
use crate::sampling::{complex_gaussian_matrix, disc_eigenvalues, gaussian_matrix, log_uniform_eigenvalues, normal, rng_for_trial, SimRng};

/// Eigenvalue distributions for the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EigSampler {
    /// Moduli log-uniform in `[lo, hi]`, uniform arguments.
    LogUniform { lo: f64, hi: f64 },
    /// Moduli uniform in `[rho_lo, rho_hi]`, uniform arguments.
    Disc { rho_lo: f64, rho_hi: f64 },
    /// Moduli log-uniform in `[lo, hi]`, arguments uniform over the open
    /// left half-plane.
    StableLogUniform { lo: f64, hi: f64 },
    /// `scale·(x + i|y|)` with standard normal `x, y`.
    UpperHalf { scale: f64 },
}

impl EigSampler {
    /// Tiny eigenvalues, moduli between `1e-5` and `1e-4`.
    pub fn decaying() -> Self {
        Self::LogUniform { lo: 1e-5, hi: 1e-4 }
    }

    /// Stable eigenvalues with moduli of order `1e-1`.
    pub fn tenth() -> Self {
        Self::StableLogUniform { lo: 0.05, hi: 0.2 }
    }

    pub fn sample(&self, rng: &mut SimRng, n: usize) -> Vec<Complex> {
        match *self {
            Self::LogUniform { lo, hi } => log_uniform_eigenvalues(rng, n, lo, hi),
            Self::Disc { rho_lo, rho_hi } => disc_eigenvalues(rng, n, rho_lo, rho_hi),
            Self::StableLogUniform { lo, hi } => log_uniform_eigenvalues(rng, n, lo, hi)
                .into_iter()
                .map(|l| if l.re > 0.0 { Complex::new(-l.re, l.im) } else { l })
                .collect(),
            Self::UpperHalf { scale } => (0..n)
                .map(|_| {
                    let (x, y) = (normal(rng), normal(rng));
                    Complex::new(scale * x, scale * y.abs())
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelMode {
    /// `C V Ψʲ V⁻¹`, `j = 1..L`.
    PsiJ,
    /// `C V Λᵏ V⁻¹`, `k = 1..L`.
    LambdaPow,
}

impl KernelMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PsiJ => "psi",
            Self::LambdaPow => "power",
        }
    }
}

/// Relative tolerance for null spaces and subspace comparison.
const KERNEL_TOL: f64 = 1e-8;

struct Instance {
    cv: ComplexMatrix,
    v_inv: ComplexMatrix,
    lambdas: Vec<Complex>,
}

fn sample_instance(rng: &mut SimRng, n: usize, m: usize, sampler: &EigSampler) -> Instance {
    let c = gaussian_matrix(rng, m, n, 1.0);
    let (v, v_inv) = loop {
        let v = complex_gaussian_matrix(rng, n, n, 1.0);
        if let Ok(inv) = inverse(&v) {
            break (v, inv);
        }
    };
    let lambdas = sampler.sample(rng, n);
    Instance { cv: c.matmul(&v), v_inv, lambdas }
}

fn diag_for(mode: KernelMode, idx: usize, lambdas: &[Complex], delta: f64, big_l: usize) -> Result<Vec<Complex>> {
    match mode {
        KernelMode::PsiJ => Ok(psi_diag(idx, lambdas, delta, big_l)?.entries),
        KernelMode::LambdaPow => Ok(lambdas.iter().map(|l| l.powu(idx as u32)).collect()),
    }
}

fn sandwich(inst: &Instance, d: &[Complex]) -> ComplexMatrix {
    let scaled = ComplexMatrix::from_fn(inst.cv.rows(), inst.cv.cols(), |i, k| inst.cv[(i, k)] * d[k]);
    scaled.matmul(&inst.v_inv)
}

/// Whether two orthonormal bases span the same subspace (mutual containment).
pub fn kernels_equal(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    if a.cols() != b.cols() {
        return false;
    }
    if a.cols() == 0 {
        return true;
    }
    let leak = |x: &ComplexMatrix, y: &ComplexMatrix| {
        let proj = y.matmul(&y.adjoint().matmul(x));
        (x - &proj).max_abs()
    };
    leak(a, b) <= tol && leak(b, a) <= tol
}

fn spectral_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

fn distinct_pairs(inst: &Instance, mode: KernelMode, delta: f64, big_l: usize) -> Result<usize> {
    let n = inst.cv.cols();
    let floor = KERNEL_TOL * spectral_norm(&inst.cv)? * spectral_norm(&inst.v_inv)?;
    let kernels = (1..big_l)
        .map(|idx| {
            let map = sandwich(inst, &diag_for(mode, idx, &inst.lambdas, delta, big_l)?);
            if spectral_norm(&map)? <= floor {
                Ok(ComplexMatrix::identity(n))
            } else {
                null_space(&map, KERNEL_TOL, 0.0)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut count = 0;
    for a in 0..kernels.len() {
        for b in a + 1..kernels.len() {
            if !kernels_equal(&kernels[a], &kernels[b], KERNEL_TOL) {
                count += 1;
            }
        }
    }
    Ok(count)
}

fn check_dims(n: usize, m: usize, trials: usize, big_l: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("need n >= m >= 1, got n = {n}, m = {m}")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if big_l < 2 {
        return Err(Error::InvalidArgument(format!("L must be at least 2, got {big_l}")));
    }
    Ok(())
}

/// Per trial, the number of unordered index pairs in `1..L` whose maps have
/// different kernels. Trial `t` draws `C`, `V` and `λ` from stream `t`, so
/// both modes see identical instances.
#[allow(clippy::too_many_arguments)]
pub fn experiment_kernel_distinctness(
    n: usize,
    m: usize,
    trials: usize,
    mode: KernelMode,
    sampler: EigSampler,
    delta: f64,
    big_l: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    check_dims(n, m, trials, big_l)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for_trial(seed, t as u64);
            let inst = sample_instance(&mut rng, n, m, &sampler);
            distinct_pairs(&inst, mode, delta, big_l)
        })
        .collect()
}

/// Per trial, the numerical rank of `C V Ψʲ V⁻¹` stacked over `j = 1..L`.
#[allow(clippy::too_many_arguments)]
pub fn experiment_rowspace_rank(
    n: usize,
    m: usize,
    trials: usize,
    sampler: EigSampler,
    tol: f64,
    delta: f64,
    big_l: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    check_dims(n, m, trials, big_l)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for_trial(seed, t as u64);
            let inst = sample_instance(&mut rng, n, m, &sampler);
            let blocks = (1..big_l)
                .map(|j| Ok(sandwich(&inst, &psi_diag(j, &inst.lambdas, delta, big_l)?.entries)))
                .collect::<Result<Vec<_>>>()?;
            Ok(rank_with_tol(&ComplexMatrix::vstack(&blocks)?, tol)?.rank)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub mode: String,
    pub element: usize,
    pub index: usize,
    pub re: f64,
    pub im: f64,
}

/// `Ψʲ_kk` over `j = 1..L` next to `λ_kᵏ` over the same range, for each
/// requested diagonal element `k`.
pub fn eig_trajectory(
    lambdas: &[Complex],
    elements: &[usize],
    delta: f64,
    big_l: usize,
) -> Result<Vec<TrajectoryPoint>> {
    if let Some(&bad) = elements.iter().find(|&&k| k >= lambdas.len()) {
        return Err(Error::InvalidArgument(format!("element {bad} out of range")));
    }
    let mut out = Vec::new();
    for mode in [KernelMode::PsiJ, KernelMode::LambdaPow] {
        for idx in 1..big_l {
            let d = diag_for(mode, idx, lambdas, delta, big_l)?;
            for &k in elements {
                out.push(TrajectoryPoint { mode: mode.name().into(), element: k, index: idx, re: d[k].re, im: d[k].im });
            }
        }
    }
    Ok(out)
}

/// Picks `count` distinct element indices below `n`.
pub fn pick_elements(rng: &mut SimRng, n: usize, count: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::new();
    while picked.len() < count.min(n) {
        let k = rng.random_range(0..n);
        if !picked.contains(&k) {
            picked.push(k);
        }
    }
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng_from_seed;

    #[test]
    fn square_c_gives_no_distinct_pairs() {
        for mode in [KernelMode::PsiJ, KernelMode::LambdaPow] {
            let counts = experiment_kernel_distinctness(4, 4, 3, mode, EigSampler::tenth(), 1.0, 8, 1).unwrap();
            assert_eq!(counts, vec![0, 0, 0]);
        }
    }

    #[test]
    fn psi_separates_more_than_powers() {
        let psi = experiment_kernel_distinctness(8, 5, 4, KernelMode::PsiJ, EigSampler::decaying(), 1.0, 16, 3).unwrap();
        let pow = experiment_kernel_distinctness(8, 5, 4, KernelMode::LambdaPow, EigSampler::decaying(), 1.0, 16, 3).unwrap();
        let max = 15 * 14 / 2;
        assert!(psi.iter().all(|&c| c >= max * 9 / 10), "{psi:?}");
        assert!(pow.iter().all(|&c| c <= max / 5), "{pow:?}");
    }

    #[test]
    fn rowspace_rank_small() {
        let ranks = experiment_rowspace_rank(8, 6, 20, EigSampler::tenth(), 1e-5, 0.3, 64, 5).unwrap();
        assert!(ranks.iter().all(|&r| r == 8), "{ranks:?}");
        let same = Instance {
            cv: gaussian_matrix(&mut rng_from_seed(1), 3, 6, 1.0),
            v_inv: ComplexMatrix::identity(6),
            lambdas: vec![Complex::new(-0.1, 0.0); 6],
        };
        let blocks: Vec<_> = (1..8).map(|j| sandwich(&same, &psi_diag(j, &same.lambdas, 1.0, 8).unwrap().entries)).collect();
        assert_eq!(rank_with_tol(&ComplexMatrix::vstack(&blocks).unwrap(), 1e-5).unwrap().rank, 3);
    }

    #[test]
    fn kernels_equal_cases() {
        let e = ComplexMatrix::identity(3);
        let a = e.select_columns(&[0, 1]);
        let b = e.select_columns(&[1, 0]);
        let c = e.select_columns(&[0, 2]);
        assert!(kernels_equal(&a, &b, 1e-8));
        assert!(!kernels_equal(&a, &c, 1e-8));
        assert!(!kernels_equal(&a, &e, 1e-8));
    }

    #[test]
    fn trajectory_shape() {
        let lam = EigSampler::tenth().sample(&mut rng_from_seed(2), 5);
        let els = pick_elements(&mut rng_from_seed(3), 5, 3);
        let pts = eig_trajectory(&lam, &els, 1.0, 16).unwrap();
        assert_eq!(pts.len(), 2 * 15 * 3);
        assert!(eig_trajectory(&lam, &[9], 1.0, 16).is_err());
    }

    #[test]
    fn half_plane_samplers() {
        let lam = EigSampler::UpperHalf { scale: 0.5 }.sample(&mut rng_from_seed(4), 100);
        assert!(lam.iter().all(|l| l.im >= 0.0));
        let lam = EigSampler::tenth().sample(&mut rng_from_seed(4), 100);
        assert!(lam.iter().all(|l| l.re <= 0.0 && (0.05..=0.2 + 1e-12).contains(&l.norm())));
    }
}
