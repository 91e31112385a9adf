//! Row-scaled Vandermonde matrices built from `C̃ = CV` and the spectrum,
//! the eigenvalue-gap/entry-magnitude loss, and the Kronecker independence
//! check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{kron, rank_with_tol, Complex, ComplexMatrix};
use crate::observability::{relu, LossValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GammaKind {
    /// `c_j e^{kΔλ_j}`.
    Exp,
    /// `c_j λ_jᵏ`.
    #[default]
    Poly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    pub entries: ComplexMatrix,
    pub kind: GammaKind,
    pub c_row: Vec<Complex>,
    pub lambdas: Vec<Complex>,
    pub delta: f64,
}

pub fn c_tilde(c: &ComplexMatrix, v: &ComplexMatrix) -> Result<ComplexMatrix> {
    c.try_matmul(v)
}

/// `Γ[k][j] = c_row[j]·node_jᵏ`, `k = 0..n`, with `node_j = e^{Δλ_j}` or `λ_j`.
pub fn gamma_matrix(c_row: &[Complex], lambdas: &[Complex], delta: f64, kind: GammaKind) -> Result<GammaMatrix> {
    if c_row.len() != lambdas.len() {
        return Err(Error::ShapeMismatch(format!("{} scalings for {} eigenvalues", c_row.len(), lambdas.len())));
    }
    let n = lambdas.len();
    let nodes: Vec<Complex> = match kind {
        GammaKind::Exp => lambdas.iter().map(|l| (l * delta).exp()).collect(),
        GammaKind::Poly => lambdas.to_vec(),
    };
    let entries = ComplexMatrix::from_fn(n, n, |k, j| c_row[j] * nodes[j].powu(k as u32));
    Ok(GammaMatrix { entries, kind, c_row: c_row.to_vec(), lambdas: lambdas.to_vec(), delta })
}

/// Which rows of `C̃` enter the magnitude term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RowSelection {
    #[default]
    All,
    First,
}

/// `relu(m_gap − min_{k1≠k2}|λ_k1 − λ_k2|) + Σ relu(m_entry − |C̃_ij|)` over
/// the selected rows.
pub fn loss_thm5(
    lambdas: &[Complex],
    c_tilde: &ComplexMatrix,
    rows: RowSelection,
    gap_margin: f64,
    entry_margin: f64,
) -> Result<LossValue> {
    if !(gap_margin > 0.0) || !(entry_margin > 0.0) {
        return Err(Error::InvalidArgument("margins must be positive".into()));
    }
    if c_tilde.cols() != lambdas.len() {
        return Err(Error::ShapeMismatch(format!("C̃ has {} columns for {} eigenvalues", c_tilde.cols(), lambdas.len())));
    }
    let mut gap = f64::INFINITY;
    for a in 0..lambdas.len() {
        for b in a + 1..lambdas.len() {
            gap = gap.min((lambdas[a] - lambdas[b]).norm());
        }
    }
    let row_count = match rows {
        RowSelection::All => c_tilde.rows(),
        RowSelection::First => c_tilde.rows().min(1),
    };
    let entries: f64 = (0..row_count)
        .flat_map(|i| (0..c_tilde.cols()).map(move |j| (i, j)))
        .map(|(i, j)| relu(entry_margin - c_tilde[(i, j)].norm()))
        .sum();
    Ok(LossValue::from_terms(vec![
        ("eig_gap".into(), relu(gap_margin - gap)),
        ("entries".into(), entries),
    ]))
}

/// Whether `{vᵢ ⊗ cᵢ}` is linearly independent (rank `n` at relative `tol`).
pub fn kron_independence_check(vs: &[Vec<Complex>], cs: &[Vec<Complex>], tol: f64) -> Result<bool> {
    if vs.len() != cs.len() || vs.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} vectors v against {} vectors c", vs.len(), cs.len())));
    }
    if let Some(i) = cs.iter().position(|c| c.iter().all(|z| z.norm() == 0.0)) {
        return Err(Error::PreconditionViolated(format!("c_{i} is zero")));
    }
    let cols = vs
        .iter()
        .zip(cs)
        .map(|(v, c)| kron(&ComplexMatrix::column_vector(v), &ComplexMatrix::column_vector(c)))
        .collect::<Vec<_>>();
    let stacked = ComplexMatrix::hstack(&cols)?;
    Ok(rank_with_tol(&stacked, tol)?.rank == vs.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{determinant, inverse, mat_exp};
    use crate::observability::{obs_matrix, obs_report};
    use crate::sampling::{complex_gaussian_matrix, disc_eigenvalues, gaussian_matrix, random_orthogonal, rng_from_seed};
    use proptest::prelude::*;

    fn r(x: f64) -> Complex {
        Complex::new(x, 0.0)
    }

    #[test]
    fn c_tilde_examples() {
        let mut rng = rng_from_seed(1);
        let c = gaussian_matrix(&mut rng, 2, 3, 1.0);
        assert_eq!(c_tilde(&c, &ComplexMatrix::identity(3)).unwrap(), c);
        let v = ComplexMatrix::from_real_rows(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, 1.0], &[0.0, 0.0, 1.0]]).unwrap();
        let killer = ComplexMatrix::from_real_rows(&[&[1.0, 1.0, -3.0]]).unwrap();
        assert_eq!(c_tilde(&killer, &v).unwrap()[(0, 2)], r(0.0));
        let v = complex_gaussian_matrix(&mut rng, 3, 3, 1.0);
        let got = c_tilde(&c, &v).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let want: Complex = (0..3).map(|k| c[(i, k)] * v[(k, j)]).sum();
                assert!((got[(i, j)] - want).norm() < 1e-12);
            }
        }
        assert!(c_tilde(&c, &ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_matrix(&[r(1.0), r(1.0)], &[r(0.0), r(2f64.ln())], 1.0, GammaKind::Exp).unwrap();
        let want = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 2.0]]).unwrap();
        assert!(g.entries.max_abs_diff(&want) < 1e-15);
        assert!((determinant(&g.entries).unwrap() - r(1.0)).norm() < 1e-14);
        let g = gamma_matrix(&[r(1.0), r(0.0), r(2.0)], &[r(0.1), r(0.2), r(0.3)], 1.0, GammaKind::Poly).unwrap();
        assert!(g.entries.column(1).iter().all(|z| z.norm() == 0.0));
        let g = gamma_matrix(&[r(1.0), r(2.0), r(3.0)], &[r(0.5), r(0.5), r(0.1)], 1.0, GammaKind::Poly).unwrap();
        assert!(rank_with_tol(&g.entries, 1e-10).unwrap().rank <= 2);
        assert!(gamma_matrix(&[r(1.0)], &[r(0.5), r(0.2)], 1.0, GammaKind::Poly).is_err());
    }

    #[test]
    fn loss_examples() {
        let ct = ComplexMatrix::from_real_rows(&[&[1.0, 1.0, 1.0], &[0.5, -0.5, 2.0]]).unwrap();
        let lam = [r(0.1), r(0.5), r(0.9)];
        assert_eq!(loss_thm5(&lam, &ct, RowSelection::All, 0.05, 0.05).unwrap().total, 0.0);
        let rep = [r(0.1), r(0.1), r(0.9)];
        assert_eq!(loss_thm5(&rep, &ct, RowSelection::All, 0.05, 0.05).unwrap().term("eig_gap"), Some(0.05));
        let mut zero = ct.clone();
        zero[(0, 0)] = r(0.0);
        assert_eq!(loss_thm5(&lam, &zero, RowSelection::First, 0.05, 0.05).unwrap().term("entries"), Some(0.05));
        let mut second = ct.clone();
        second[(1, 1)] = r(0.0);
        assert_eq!(loss_thm5(&lam, &second, RowSelection::First, 0.05, 0.05).unwrap().total, 0.0);
        assert!(loss_thm5(&lam, &second, RowSelection::All, 0.05, 0.05).unwrap().total > 0.0);
    }

    #[test]
    fn zero_loss_instance_is_observable() {
        let mut rng = rng_from_seed(3);
        let (n, m) = (15, 10);
        let v = random_orthogonal(&mut rng, n);
        let c = gaussian_matrix(&mut rng, m, n, 1.0);
        let lam = disc_eigenvalues(&mut rng, n, 0.5, 1.0);
        let ct = c_tilde(&c, &v).unwrap();
        let l = loss_thm5(&lam, &ct, RowSelection::All, 1e-3, 1e-3).unwrap();
        let a = v.matmul(&ComplexMatrix::from_diag(&lam)).matmul(&v.transpose());
        if l.is_zero() {
            assert!(obs_report(&c, &a, 1e-10).unwrap().observable);
        }
    }

    #[test]
    fn kron_examples() {
        let e = |i: usize| (0..3).map(|k| r(if k == i { 1.0 } else { 0.0 })).collect::<Vec<_>>();
        let ones = vec![r(1.0), r(1.0)];
        assert!(kron_independence_check(&[e(0), e(1), e(2)], &[ones.clone(), ones.clone(), ones.clone()], 1e-10).unwrap());
        let mut rng = rng_from_seed(8);
        for t in 0..200 {
            let n = 1 + t % 8;
            let v = complex_gaussian_matrix(&mut rng, n, n, 1.0);
            let c = complex_gaussian_matrix(&mut rng, 3, n, 1.0);
            let vs: Vec<_> = (0..n).map(|i| v.column(i)).collect();
            let cs: Vec<_> = (0..n).map(|i| c.column(i)).collect();
            assert!(kron_independence_check(&vs, &cs, 1e-10).unwrap());
        }
        let zero = vec![r(0.0), r(0.0)];
        assert!(matches!(
            kron_independence_check(&[e(0), e(1)], &[ones, zero], 1e-10),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn gamma_rows_slice_obs_matrix() {
        let mut rng = rng_from_seed(5);
        let (n, m, delta) = (5, 3, 0.4);
        let ct = complex_gaussian_matrix(&mut rng, m, n, 1.0);
        let lam = disc_eigenvalues(&mut rng, n, 0.2, 1.0);
        let nodes: Vec<Complex> = lam.iter().map(|l| (l * delta).exp()).collect();
        let o = obs_matrix(&ct, &ComplexMatrix::from_diag(&nodes)).unwrap();
        for i in 0..m {
            let g = gamma_matrix(&ct.row(i), &lam, delta, GammaKind::Exp).unwrap();
            let slice = ComplexMatrix::from_fn(n, n, |k, j| o[(k * m + i, j)]);
            assert!(g.entries.max_abs_diff(&slice) < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gamma_determinant_factorizes(seed in 0u64..10_000, n in 1usize..=6, delta in 0.1f64..1.0) {
            let mut rng = rng_from_seed(seed);
            let lam = disc_eigenvalues(&mut rng, n, 0.2, 1.5);
            let c = complex_gaussian_matrix(&mut rng, 1, n, 1.0).row(0);
            let g = gamma_matrix(&c, &lam, delta, GammaKind::Exp).unwrap();
            let x: Vec<Complex> = lam.iter().map(|l| (l * delta).exp()).collect();
            let mut want: Complex = c.iter().product();
            for a in 0..n {
                for b in a + 1..n {
                    want *= x[b] - x[a];
                }
            }
            let got = determinant(&g.entries).unwrap();
            prop_assert!((got - want).norm() <= 1e-9 * want.norm().max(1e-300));
        }

        #[test]
        fn zero_loss_implies_observable(seed in 0u64..10_000, n in 2usize..=12, mfrac in 0.2f64..1.0) {
            let m = ((n as f64 * mfrac) as usize).clamp(1, n - 1);
            let mut rng = rng_from_seed(seed);
            let v = complex_gaussian_matrix(&mut rng, n, n, 1.0);
            let c = gaussian_matrix(&mut rng, m, n, 1.0);
            let lam = disc_eigenvalues(&mut rng, n, 0.3, 1.0);
            let ct = c_tilde(&c, &v).unwrap();
            if loss_thm5(&lam, &ct, RowSelection::All, 0.05, 0.05).unwrap().is_zero() {
                let a = v.matmul(&ComplexMatrix::from_diag(&lam)).matmul(&inverse(&v).unwrap());
                prop_assert!(obs_report(&c, &a, 1e-10).unwrap().observable);
                if 2 * m >= n {
                    let ea = mat_exp(&a).unwrap();
                    prop_assert!(obs_report(&c, &ea, 1e-10).unwrap().observable);
                }
            }
        }
    }
}
