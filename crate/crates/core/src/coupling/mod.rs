//! Shared-parameter construction of the state and input matrices.
//!
//! With `n = p·m` and `W = (U ⊗ I_p)(Q ⊗ I_p)`, the state matrix is
//! `A = Wᴴ diag(λ) W` and the input matrix is `B = f(Λ)^{1/2}(U ⊗ I_p)S`,
//! where `S` selects `m` columns. Because `W` is unitary, `Aᵏ` only needs
//! `λᵏ`. Conjugate transposes are used throughout so complex unitary `Q`
//! and `U` are supported; for real orthogonal factors they reduce to
//! transposes.

mod diagnostics;
mod train;

pub use diagnostics::{
    eig_jacobian, eigen_factor, lipschitz_lower_bound, robbins_monro_diagnostic, EigJacobian, RobbinsMonroReport,
    SeriesClass, SeriesReport, DIVERGENCE_EXPONENT,
};
pub use train::{
    sinusoid_loss, train_coupled, train_vanilla, CoupledState, Optimizer, Realized, TrainConfig, TrainRecord,
    TrainTrace, VanillaState,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{svd, Complex, ComplexMatrix};

/// Largest entry of `XᴴX − I` tolerated by the constructors.
pub const ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledParams {
    pub q: ComplexMatrix,
    pub u: ComplexMatrix,
    pub lambdas: Vec<Complex>,
    /// Row selected by each column of `S`.
    pub sel: Vec<usize>,
    pub p: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FMode {
    /// `f(λ) = |λ|`.
    #[default]
    Modulus,
    /// `f(λ) = λ` with the principal square root.
    Identity,
}

pub fn unitarity_residual(x: &ComplexMatrix) -> f64 {
    x.adjoint().matmul(x).max_abs_diff(&ComplexMatrix::identity(x.rows()))
}

impl CoupledParams {
    /// Checks shapes, the selection and unitarity of `Q` and `U`.
    pub fn new(q: ComplexMatrix, u: ComplexMatrix, lambdas: Vec<Complex>, sel: Vec<usize>, p: usize) -> Result<Self> {
        let params = Self::unconstrained(q, u, lambdas, sel, p)?;
        params.check_unitary()?;
        Ok(params)
    }

    /// Same checks without unitarity.
    pub fn unconstrained(
        q: ComplexMatrix,
        u: ComplexMatrix,
        lambdas: Vec<Complex>,
        sel: Vec<usize>,
        p: usize,
    ) -> Result<Self> {
        let m = q.rows();
        if !q.is_square() || u.shape() != q.shape() || m == 0 || p == 0 {
            return Err(Error::ShapeMismatch(format!("Q {:?}, U {:?}, p = {p}", q.shape(), u.shape())));
        }
        if lambdas.len() != m * p {
            return Err(Error::ShapeMismatch(format!("{} eigenvalues for n = {}", lambdas.len(), m * p)));
        }
        if sel.len() != m {
            return Err(Error::ShapeMismatch(format!("selection has {} entries for m = {m}", sel.len())));
        }
        let mut seen = vec![false; m * p];
        for &s in &sel {
            if s >= m * p || seen[s] {
                return Err(Error::InvalidArgument(format!("selection {sel:?} must be distinct and below {}", m * p)));
            }
            seen[s] = true;
        }
        Ok(Self { q, u, lambdas, sel, p })
    }

    pub fn check_unitary(&self) -> Result<()> {
        let r = unitarity_residual(&self.q).max(unitarity_residual(&self.u));
        if r > ORTHO_TOL {
            return Err(Error::OrthogonalityViolated(r));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.q.rows()
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }
}

/// `(M ⊗ I_p)ᴴ diag(d) (M ⊗ I_p)`, assembled one `m × m` block per offset.
pub(crate) fn kron_sandwich(mix: &ComplexMatrix, d: &[Complex], p: usize) -> ComplexMatrix {
    let m = mix.rows();
    let n = m * p;
    let mix_h = mix.adjoint();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..p {
        let scaled = ComplexMatrix::from_fn(m, m, |c, b| d[c * p + i] * mix[(c, b)]);
        let block = mix_h.matmul(&scaled);
        for a in 0..m {
            for b in 0..m {
                out[(a * p + i, b * p + i)] = block[(a, b)];
            }
        }
    }
    out
}

pub(crate) fn a_unchecked(params: &CoupledParams) -> ComplexMatrix {
    kron_sandwich(&params.u.matmul(&params.q), &params.lambdas, params.p)
}

pub fn build_a(params: &CoupledParams) -> Result<ComplexMatrix> {
    params.check_unitary()?;
    Ok(a_unchecked(params))
}

/// `Aᵏ` from `λᵏ`.
pub fn coupled_power(params: &CoupledParams, k: usize) -> Result<ComplexMatrix> {
    params.check_unitary()?;
    let pow: Vec<Complex> = params.lambdas.iter().map(|l| l.powu(k as u32)).collect();
    Ok(kron_sandwich(&params.u.matmul(&params.q), &pow, params.p))
}

pub fn f_sqrt(lambdas: &[Complex], f_mode: FMode) -> Result<Vec<Complex>> {
    lambdas
        .iter()
        .enumerate()
        .map(|(k, l)| match f_mode {
            FMode::Modulus => Ok(Complex::new(l.norm().sqrt(), 0.0)),
            FMode::Identity if l.im == 0.0 && l.re < 0.0 => Err(Error::BadF(k)),
            FMode::Identity => Ok(l.sqrt()),
        })
        .collect()
}

/// `f(Λ)^{1/2}(U ⊗ I_p)S` for an arbitrary (possibly relaxed) `S`.
pub(crate) fn b_with_s(u: &ComplexMatrix, roots: &[Complex], p: usize, s: &ComplexMatrix) -> ComplexMatrix {
    let m = u.rows();
    let n = m * p;
    let mut out = ComplexMatrix::zeros(n, s.cols());
    for j in 0..s.cols() {
        for c in 0..m {
            for i in 0..p {
                let w = s[(c * p + i, j)];
                if w.re == 0.0 && w.im == 0.0 {
                    continue;
                }
                for a in 0..m {
                    out[(a * p + i, j)] += roots[a * p + i] * u[(a, c)] * w;
                }
            }
        }
    }
    out
}

pub(crate) fn b_unchecked(params: &CoupledParams, f_mode: FMode) -> Result<ComplexMatrix> {
    let roots = f_sqrt(&params.lambdas, f_mode)?;
    let (m, p) = (params.m(), params.p);
    Ok(ComplexMatrix::from_fn(m * p, m, |row, j| {
        let (c, i) = (params.sel[j] / p, params.sel[j] % p);
        if row % p == i {
            roots[row] * params.u[(row / p, c)]
        } else {
            Complex::new(0.0, 0.0)
        }
    }))
}

pub fn build_b(params: &CoupledParams, f_mode: FMode) -> Result<ComplexMatrix> {
    params.check_unitary()?;
    b_unchecked(params, f_mode)
}

/// One-hot `n × m` selection matrix.
pub fn selection_matrix(sel: &[usize], n: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(n, sel.len());
    for (j, &i) in sel.iter().enumerate() {
        s[(i, j)] = Complex::new(1.0, 0.0);
    }
    s
}

/// Polar factor `P(PᴴP)^{−1/2}`; real input gives a real result.
pub fn orthogonalize(p_raw: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !p_raw.is_square() {
        return Err(Error::ShapeMismatch(format!("expected square, got {:?}", p_raw.shape())));
    }
    let (u, s, v) = svd(p_raw)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if s.last().is_none_or(|&smin| smin <= 1e-12 * smax) {
        return Err(Error::RankDeficient);
    }
    let polar = u.matmul(&v.adjoint());
    Ok(if p_raw.is_real() { polar.map(|z| Complex::new(z.re, 0.0)) } else { polar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{eigenvalues, kron, min_cost_matching_distance};
    use crate::sampling::{
        complex_gaussian_matrix, disc_eigenvalues, gaussian_matrix, random_orthogonal, random_permutation,
        random_unitary, rng_from_seed, SimRng,
    };
    use proptest::prelude::*;

    fn random_params(rng: &mut SimRng, m: usize, p: usize, complex: bool) -> CoupledParams {
        let (q, u) = if complex {
            (random_unitary(rng, m), random_unitary(rng, m))
        } else {
            (random_orthogonal(rng, m), random_orthogonal(rng, m))
        };
        let lambdas = disc_eigenvalues(rng, m * p, 0.3, 1.0);
        let sel = random_permutation(rng, m * p)[..m].to_vec();
        CoupledParams::new(q, u, lambdas, sel, p).unwrap()
    }

    fn dense_w(pr: &CoupledParams, x: &ComplexMatrix) -> ComplexMatrix {
        kron(x, &ComplexMatrix::identity(pr.p))
    }

    fn dense_a(pr: &CoupledParams) -> ComplexMatrix {
        let w = dense_w(pr, &pr.u).matmul(&dense_w(pr, &pr.q));
        w.adjoint().matmul(&ComplexMatrix::from_diag(&pr.lambdas)).matmul(&w)
    }

    #[test]
    fn identity_factors_give_diagonal() {
        let lam = vec![Complex::new(0.5, 0.1), Complex::new(-0.2, 0.0), Complex::new(0.9, -0.3), Complex::new(0.1, 0.0)];
        let pr = CoupledParams::new(ComplexMatrix::identity(2), ComplexMatrix::identity(2), lam.clone(), vec![0, 1], 2)
            .unwrap();
        assert_eq!(build_a(&pr).unwrap(), ComplexMatrix::from_diag(&lam));
    }

    #[test]
    fn structured_a_matches_kron_formula() {
        let mut rng = rng_from_seed(11);
        for (m, p) in [(3, 1), (2, 3), (4, 2)] {
            let pr = random_params(&mut rng, m, p, true);
            let a = build_a(&pr).unwrap();
            assert!(a.max_abs_diff(&dense_a(&pr)) < 1e-12);
            if p == 1 {
                let direct = pr.q.adjoint().matmul(&pr.u.adjoint()).matmul(&ComplexMatrix::from_diag(&pr.lambdas));
                assert!(a.max_abs_diff(&direct.matmul(&pr.u).matmul(&pr.q)) < 1e-12);
            }
        }
    }

    #[test]
    fn non_unitary_rejected() {
        let q = ComplexMatrix::identity(2).scale_real(1.1);
        let err = CoupledParams::new(q, ComplexMatrix::identity(2), vec![Complex::new(1.0, 0.0); 2], vec![0, 1], 1);
        assert!(matches!(err, Err(Error::OrthogonalityViolated(_))));
        let dup = CoupledParams::new(
            ComplexMatrix::identity(2),
            ComplexMatrix::identity(2),
            vec![Complex::new(1.0, 0.0); 4],
            vec![1, 1],
            2,
        );
        assert!(dup.is_err());
    }

    #[test]
    fn b_examples() {
        let lam: Vec<Complex> = [1.0, 4.0, 9.0, 16.0].iter().map(|&x| Complex::new(x, 0.0)).collect();
        let pr = CoupledParams::new(ComplexMatrix::identity(2), ComplexMatrix::identity(2), lam.clone(), vec![0, 1], 2)
            .unwrap();
        let b = build_b(&pr, FMode::Identity).unwrap();
        let roots: Vec<Complex> = [1.0, 2.0, 3.0, 4.0].iter().map(|&x| Complex::new(x, 0.0)).collect();
        assert_eq!(b, ComplexMatrix::from_diag(&roots).select_columns(&[0, 1]));

        let mut rng = rng_from_seed(5);
        let pr = random_params(&mut rng, 3, 2, true);
        for mode in [FMode::Modulus, FMode::Identity] {
            let b = build_b(&pr, mode).unwrap();
            let roots = f_sqrt(&pr.lambdas, mode).unwrap();
            let oracle = ComplexMatrix::from_diag(&roots)
                .matmul(&dense_w(&pr, &pr.u))
                .matmul(&selection_matrix(&pr.sel, pr.n()));
            assert!(b.max_abs_diff(&oracle) < 1e-12);
            assert!(b.max_abs_diff(&b_with_s(&pr.u, &roots, pr.p, &selection_matrix(&pr.sel, pr.n()))) < 1e-12);
            let mut swapped = pr.clone();
            swapped.sel.swap(0, 2);
            let b2 = build_b(&swapped, mode).unwrap();
            assert_eq!(b2.select_columns(&[2, 1, 0]), b);
        }
        let mut neg = pr.clone();
        neg.lambdas[4] = Complex::new(-0.5, 0.0);
        assert!(matches!(build_b(&neg, FMode::Identity), Err(Error::BadF(4))));
        assert!(build_b(&neg, FMode::Modulus).is_ok());
    }

    #[test]
    fn orthogonalize_examples() {
        let mut rng = rng_from_seed(9);
        let o = random_orthogonal(&mut rng, 5);
        assert!(orthogonalize(&o).unwrap().max_abs_diff(&o) < 1e-12);
        assert!(orthogonalize(&ComplexMatrix::identity(3).scale_real(2.0))
            .unwrap()
            .max_abs_diff(&ComplexMatrix::identity(3))
            < 1e-12);
        for _ in 0..20 {
            let r = orthogonalize(&gaussian_matrix(&mut rng, 6, 6, 1.0)).unwrap();
            assert!(r.is_real());
            assert!(unitarity_residual(&r) < 1e-10);
            let c = orthogonalize(&complex_gaussian_matrix(&mut rng, 4, 4, 1.0)).unwrap();
            assert!(unitarity_residual(&c) < 1e-10);
        }
        let singular = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert_eq!(orthogonalize(&singular), Err(Error::RankDeficient));
    }

    #[test]
    fn power_examples() {
        let mut rng = rng_from_seed(13);
        let pr = random_params(&mut rng, 3, 2, true);
        let a = build_a(&pr).unwrap();
        assert!(coupled_power(&pr, 0).unwrap().max_abs_diff(&ComplexMatrix::identity(6)) < 1e-12);
        assert!(coupled_power(&pr, 2).unwrap().max_abs_diff(&a.matmul(&a)) < 1e-10);
    }

    #[test]
    fn orthogonality_sandwich() {
        let mut rng = rng_from_seed(21);
        let spectral = |x: &ComplexMatrix| crate::matcore::singular_values(x).unwrap()[0];
        for t in 0..50 {
            let n = 2 + t % 5;
            let a1 = random_orthogonal(&mut rng, n);
            let theta = 0.1 * (t as f64 + 1.0) / 50.0;
            let g = gaussian_matrix(&mut rng, n, n, 1.0);
            let skew = (&g - &g.transpose()).scale_real(0.5);
            let skew = skew.scale_real(theta / spectral(&skew));
            let a2 = a1.matmul(&crate::matcore::mat_exp(&skew).unwrap());
            let d = spectral(&(&a1 - &a2));
            let lhs = spectral(&(&a2.transpose().matmul(&a1) - &ComplexMatrix::identity(n)));
            assert!(0.5 * d * d <= lhs + 1e-12);
        }
        for t in 0..20 {
            let n = 2 + t % 5;
            let a1 = random_orthogonal(&mut rng, n);
            let v = random_orthogonal(&mut rng, n);
            let signs: Vec<Complex> = (0..n).map(|i| Complex::new(if i <= t % n { -1.0 } else { 1.0 }, 0.0)).collect();
            let r = v.matmul(&ComplexMatrix::from_diag(&signs)).matmul(&v.transpose());
            let a2 = a1.matmul(&r);
            let sym = a2.transpose().matmul(&a1);
            assert!(sym.max_abs_diff(&sym.transpose()) < 1e-12);
            let d = spectral(&(&a1 - &a2));
            let lhs = spectral(&(&sym - &ComplexMatrix::identity(n)));
            assert!(0.5 * d * d <= lhs + 1e-12);
            assert!(lhs / (d * d) <= 1.0 + 1e-3);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spectrum_is_preserved(seed in 0u64..10_000, m in 1usize..=4, p in 1usize..=3, complex in any::<bool>()) {
            let mut rng = rng_from_seed(seed);
            let pr = random_params(&mut rng, m, p, complex);
            let eig = eigenvalues(&build_a(&pr).unwrap()).unwrap();
            let (d, _) = min_cost_matching_distance(&eig, &pr.lambdas);
            prop_assert!(d.sqrt() <= 1e-8);
        }

        #[test]
        fn power_matches_repeated_product(seed in 0u64..10_000, m in 1usize..=8, p in 1usize..=8, k in 0usize..=64) {
            let mut rng = rng_from_seed(seed);
            let pr = random_params(&mut rng, m, p, seed % 2 == 0);
            let fast = coupled_power(&pr, k).unwrap();
            let slow = build_a(&pr).unwrap().powi(k);
            prop_assert!(fast.rel_diff(&slow) <= 1e-8 || (&fast - &slow).frobenius_norm() <= 1e-12);
        }
    }
}
