//! Seeded random sampling of matrices, spectra and permutations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matcore::{svd, Complex, ComplexMatrix};

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for trial `trial` under a shared seed.
pub fn rng_for_trial(seed: u64, trial: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn normal(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Real matrix with i.i.d. `N(0, scale²)` entries.
pub fn gaussian_matrix(rng: &mut SimRng, rows: usize, cols: usize, scale: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex::new(scale * normal(rng), 0.0))
}

/// Complex matrix whose real and imaginary parts are i.i.d. `N(0, scale²/2)`.
pub fn complex_gaussian_matrix(rng: &mut SimRng, rows: usize, cols: usize, scale: f64) -> ComplexMatrix {
    let s = scale / 2f64.sqrt();
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex::new(s * normal(rng), s * normal(rng)))
}

fn polar_factor(m: &ComplexMatrix) -> ComplexMatrix {
    let (u, _, v) = svd(m).expect("svd of a finite gaussian matrix");
    u.matmul(&v.adjoint())
}

/// Haar-like random unitary.
pub fn random_unitary(rng: &mut SimRng, n: usize) -> ComplexMatrix {
    polar_factor(&complex_gaussian_matrix(rng, n, n, 1.0))
}

/// Random real orthogonal matrix.
pub fn random_orthogonal(rng: &mut SimRng, n: usize) -> ComplexMatrix {
    polar_factor(&gaussian_matrix(rng, n, n, 1.0))
}

/// Eigenvalues `ρ e^{iθ}` with `ρ` uniform in `[rho_lo, rho_hi]` and `θ` uniform.
pub fn disc_eigenvalues(rng: &mut SimRng, n: usize, rho_lo: f64, rho_hi: f64) -> Vec<Complex> {
    (0..n)
        .map(|_| {
            let rho = rng.random_range(rho_lo..=rho_hi);
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            Complex::from_polar(rho, theta)
        })
        .collect()
}

/// Eigenvalues with log-uniform moduli in `[lo, hi]` and uniform arguments.
pub fn log_uniform_eigenvalues(rng: &mut SimRng, n: usize, lo: f64, hi: f64) -> Vec<Complex> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|_| {
            let rho = rng.random_range(a..=b).exp();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            Complex::from_polar(rho, theta)
        })
        .collect()
}

/// Continuous-time eigenvalues in the open left half-plane:
/// real part in `[-re_hi, -re_lo]`, imaginary part in `[-im_hi, im_hi]`.
pub fn stable_eigenvalues(rng: &mut SimRng, n: usize, re_lo: f64, re_hi: f64, im_hi: f64) -> Vec<Complex> {
    (0..n)
        .map(|_| Complex::new(-rng.random_range(re_lo..=re_hi), rng.random_range(-im_hi..=im_hi)))
        .collect()
}

/// `V diag(λ) V⁻¹` with a random complex `V`; returns `(A, V)`.
pub fn diagonalizable_with(rng: &mut SimRng, lambdas: &[Complex]) -> (ComplexMatrix, ComplexMatrix) {
    let n = lambdas.len();
    loop {
        let v = complex_gaussian_matrix(rng, n, n, 1.0);
        let sv = crate::matcore::singular_values(&v).expect("finite input");
        if sv[n - 1] > 1e-3 * sv[0] {
            let vinv = crate::matcore::inverse(&v).expect("well conditioned");
            return (v.matmul(&ComplexMatrix::from_diag(lambdas)).matmul(&vinv), v);
        }
    }
}

/// Uniformly random permutation as `perm[i] = image of i`.
pub fn random_permutation(rng: &mut SimRng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Uniformly random single `n`-cycle.
pub fn random_n_cycle(rng: &mut SimRng, n: usize) -> Vec<usize> {
    let order = random_permutation(rng, n);
    let mut p = vec![0; n];
    for i in 0..n {
        p[order[i]] = order[(i + 1) % n];
    }
    p
}

/// Permutation matrix with `P e_i = e_{perm[i]}`.
pub fn permutation_matrix(perm: &[usize]) -> ComplexMatrix {
    let n = perm.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        m[(j, i)] = Complex::new(1.0, 0.0);
    }
    m
}
