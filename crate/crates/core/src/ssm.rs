//! Continuous and discrete linear state-space systems, bilinear and
//! zero-order-hold discretization, and convolution kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{check_nonsingular, mat_exp, mat_log, solve, Complex, ComplexMatrix};

/// `h' = A h + B x`, `y = C h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSystem {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub c: ComplexMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Bilinear,
    Zoh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub a_bar: ComplexMatrix,
    pub b_bar: ComplexMatrix,
    pub c: ComplexMatrix,
    pub delta: f64,
    pub scheme: Scheme,
}

/// Impulse-response blocks `C Ā^k B̄`, `k = 0..L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub blocks: Vec<ComplexMatrix>,
}

impl ContinuousSystem {
    pub fn new(a: ComplexMatrix, b: ComplexMatrix, c: ComplexMatrix) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || b.rows() != n || c.cols() != n {
            return Err(Error::ShapeMismatch(format!(
                "A {:?}, B {:?}, C {:?}",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        let m = c.rows();
        if m == 0 || m > n {
            return Err(Error::ShapeMismatch(format!("need n >= m >= 1, got n = {n}, m = {m}")));
        }
        Ok(Self { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.c.rows()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

/// Tustin transform: `Ā = (I − Δ/2 A)⁻¹(I + Δ/2 A)`, `B̄ = (I − Δ/2 A)⁻¹ Δ B`.
pub fn bilinear_discretize(sys: &ContinuousSystem, delta: f64) -> Result<DiscreteSystem> {
    check_delta(delta)?;
    let n = sys.n();
    let id = ComplexMatrix::identity(n);
    let half = sys.a.scale_real(delta / 2.0);
    let resolvent = &id - &half;
    check_nonsingular(&resolvent, 1e-12).map_err(|_| Error::SingularResolvent)?;
    let a_bar = solve(&resolvent, &(&id + &half)).map_err(|_| Error::SingularResolvent)?;
    let b_bar = solve(&resolvent, &sys.b.scale_real(delta)).map_err(|_| Error::SingularResolvent)?;
    Ok(DiscreteSystem { a_bar, b_bar, c: sys.c.clone(), delta, scheme: Scheme::Bilinear })
}

/// `φ₁(Z) = Σ_{k≥0} Z^k/(k+1)!`, i.e. `Z⁻¹(e^Z − I)` when `Z` is invertible.
pub fn phi1(z: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = z.rows();
    if z.max_abs() * n as f64 <= 1e-4 {
        let mut term = ComplexMatrix::identity(n);
        let mut acc = term.clone();
        for k in 1..=10 {
            term = term.matmul(z).scale_real(1.0 / (k + 1) as f64);
            acc = &acc + &term;
        }
        return Ok(acc);
    }
    // exp([[Z, I], [0, 0]]) carries φ₁(Z) in its upper-right block.
    let aug = ComplexMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => z[(i, j)],
        (true, false) if j - n == i => Complex::new(1.0, 0.0),
        _ => Complex::new(0.0, 0.0),
    });
    Ok(mat_exp(&aug)?.submatrix(0, n, n, 2 * n))
}

/// `Ā = e^{ΔA}`, `B̄ = φ₁(ΔA) Δ B`.
pub fn zoh_discretize(sys: &ContinuousSystem, delta: f64) -> Result<DiscreteSystem> {
    check_delta(delta)?;
    let za = sys.a.scale_real(delta);
    let a_bar = mat_exp(&za)?;
    let b_bar = phi1(&za)?.matmul(&sys.b.scale_real(delta));
    Ok(DiscreteSystem { a_bar, b_bar, c: sys.c.clone(), delta, scheme: Scheme::Zoh })
}

/// Recovers `A = log(Ā)/Δ` and `B = (e^{ΔA} − I)⁻¹ A B̄`.
pub fn zoh_invert(disc: &DiscreteSystem) -> Result<ContinuousSystem> {
    if disc.scheme != Scheme::Zoh {
        return Err(Error::InvalidArgument("zoh_invert needs a ZOH system".into()));
    }
    check_delta(disc.delta)?;
    let a = mat_log(&disc.a_bar)?.scale_real(1.0 / disc.delta);
    let n = a.rows();
    let factor = &mat_exp(&a.scale_real(disc.delta))? - &ComplexMatrix::identity(n);
    check_nonsingular(&factor, 1e-12).map_err(|_| Error::SingularFactor)?;
    let b = solve(&factor, &a.matmul(&disc.b_bar)).map_err(|_| Error::SingularFactor)?;
    ContinuousSystem::new(a, b, disc.c.clone())
}

/// `C Ā^k B̄` for `k = 0..L`, by repeated multiplication.
pub fn conv_kernel(disc: &DiscreteSystem, big_l: usize) -> Result<ConvKernel> {
    if big_l == 0 {
        return Err(Error::InvalidArgument("kernel length must be at least 1".into()));
    }
    let mut x = disc.b_bar.clone();
    let mut blocks = Vec::with_capacity(big_l);
    for k in 0..big_l {
        blocks.push(disc.c.try_matmul(&x)?);
        if k + 1 < big_l {
            x = disc.a_bar.try_matmul(&x)?;
        }
    }
    Ok(ConvKernel { blocks })
}

/// Causal convolution `y_t = Σ_{i≤t} K_i x_{t−i}`.
pub fn apply_kernel(k: &ConvKernel, xs: &[Vec<Complex>]) -> Result<Vec<Vec<Complex>>> {
    if xs.len() > k.blocks.len() {
        return Err(Error::ShapeMismatch(format!("{} inputs for a kernel of length {}", xs.len(), k.blocks.len())));
    }
    let cols = k.blocks.first().map_or(0, |b| b.cols());
    if let Some(bad) = xs.iter().position(|x| x.len() != cols) {
        return Err(Error::ShapeMismatch(format!("input {bad} has wrong length")));
    }
    let rows = k.blocks.first().map_or(0, |b| b.rows());
    Ok((0..xs.len())
        .map(|t| {
            let mut y = vec![Complex::new(0.0, 0.0); rows];
            for i in 0..=t {
                for (acc, v) in y.iter_mut().zip(k.blocks[i].matvec(&xs[t - i])) {
                    *acc += v;
                }
            }
            y
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{eig, inverse};
    use crate::sampling::{gaussian_matrix, rng_from_seed};

    fn r(x: f64) -> Complex {
        Complex::new(x, 0.0)
    }

    fn scalar(a: f64, b: f64) -> ContinuousSystem {
        let m = |x| ComplexMatrix::from_real(1, 1, &[x]).unwrap();
        ContinuousSystem::new(m(a), m(b), m(1.0)).unwrap()
    }

    fn random_system(n: usize, m: usize, seed: u64) -> ContinuousSystem {
        let mut rng = rng_from_seed(seed);
        ContinuousSystem::new(
            gaussian_matrix(&mut rng, n, n, 1.0 / (n as f64).sqrt()),
            gaussian_matrix(&mut rng, n, m, 1.0),
            gaussian_matrix(&mut rng, m, n, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn system_shape_validation() {
        let z = ComplexMatrix::zeros;
        assert!(ContinuousSystem::new(z(2, 2), z(2, 1), z(1, 2)).is_ok());
        assert!(ContinuousSystem::new(z(2, 2), z(3, 1), z(1, 2)).is_err());
        assert!(ContinuousSystem::new(z(2, 2), z(2, 3), z(3, 2)).is_err());
    }

    #[test]
    fn bilinear_zero_and_scalar() {
        let sys = ContinuousSystem::new(ComplexMatrix::zeros(2, 2), ComplexMatrix::identity(2), ComplexMatrix::identity(2)).unwrap();
        let d = bilinear_discretize(&sys, 0.3).unwrap();
        assert_eq!(d.a_bar, ComplexMatrix::identity(2));
        assert_eq!(d.b_bar, ComplexMatrix::identity(2).scale_real(0.3));
        let d = bilinear_discretize(&scalar(-0.7, 1.0), 0.2).unwrap();
        let want = (1.0 - 0.07) / (1.0 + 0.07);
        assert!((d.a_bar[(0, 0)] - r(want)).norm() < 1e-15);
        assert!(matches!(bilinear_discretize(&scalar(2.0, 1.0), 1.0), Err(Error::SingularResolvent)));
    }

    #[test]
    fn bilinear_matches_explicit_inverse() {
        let sys = random_system(4, 2, 11);
        let d = bilinear_discretize(&sys, 0.1).unwrap();
        let id = ComplexMatrix::identity(4);
        let inv = inverse(&(&id - &sys.a.scale_real(0.05))).unwrap();
        assert!(d.a_bar.max_abs_diff(&inv.matmul(&(&id + &sys.a.scale_real(0.05)))) < 1e-12);
        assert!(d.b_bar.max_abs_diff(&inv.matmul(&sys.b.scale_real(0.1))) < 1e-12);
    }

    #[test]
    fn zoh_zero_and_scalar() {
        let d = zoh_discretize(&scalar(0.0, 1.0), 0.5).unwrap();
        assert_eq!(d.a_bar[(0, 0)], r(1.0));
        assert!((d.b_bar[(0, 0)] - r(0.5)).norm() < 1e-16);
        let d = zoh_discretize(&scalar(2f64.ln(), 1.0), 1.0).unwrap();
        assert!((d.a_bar[(0, 0)] - r(2.0)).norm() < 1e-14);
        assert!((d.b_bar[(0, 0)] - r(1.0 / 2f64.ln())).norm() < 1e-14);
    }

    #[test]
    fn zoh_matches_spectral_oracle() {
        let sys = random_system(4, 2, 5);
        let delta = 0.4;
        let d = zoh_discretize(&sys, delta).unwrap();
        let dec = eig(&sys.a).unwrap();
        let phi = dec.apply(|l| {
            let z = l * delta;
            (z.exp() - 1.0) / z
        });
        let want = phi.matmul(&sys.b.scale_real(delta));
        assert!(d.b_bar.rel_diff(&want) < 1e-10);
    }

    #[test]
    fn phi1_is_continuous_at_zero() {
        let at0 = zoh_discretize(&scalar(0.0, 1.0), 1.0).unwrap().b_bar;
        let near = zoh_discretize(&scalar(1e-6, 1.0), 1.0).unwrap().b_bar;
        assert!(at0.max_abs_diff(&near) < 1e-5);
        let mid = zoh_discretize(&scalar(2e-4, 1.0), 1.0).unwrap().b_bar;
        let want = (2e-4f64).exp_m1() / 2e-4;
        assert!((mid[(0, 0)] - r(want)).norm() < 1e-14);
    }

    #[test]
    fn zoh_invert_cases() {
        let disc = DiscreteSystem {
            a_bar: ComplexMatrix::identity(2),
            b_bar: ComplexMatrix::identity(2),
            c: ComplexMatrix::identity(2),
            delta: 1.0,
            scheme: Scheme::Zoh,
        };
        assert!(matches!(zoh_invert(&disc), Err(Error::SingularFactor)));
        let m = |x| ComplexMatrix::from_real(1, 1, &[x]).unwrap();
        let disc = DiscreteSystem { a_bar: m(2.0), b_bar: m(1.0), c: m(1.0), delta: 1.0, scheme: Scheme::Zoh };
        let back = zoh_invert(&disc).unwrap();
        assert!((back.a[(0, 0)] - r(2f64.ln())).norm() < 1e-15);
        let sys = random_system(4, 2, 8);
        let d = zoh_discretize(&sys, 0.3).unwrap();
        let again = zoh_discretize(&zoh_invert(&d).unwrap(), 0.3).unwrap();
        assert!(again.a_bar.rel_diff(&d.a_bar) < 1e-8 && again.b_bar.rel_diff(&d.b_bar) < 1e-8);
    }

    #[test]
    fn kernel_examples() {
        let sys = random_system(4, 2, 3);
        let d = bilinear_discretize(&sys, 0.1).unwrap();
        let k = conv_kernel(&d, 1).unwrap();
        assert_eq!(k.blocks, vec![d.c.matmul(&d.b_bar)]);
        let k = conv_kernel(&d, 8).unwrap();
        for (i, blk) in k.blocks.iter().enumerate() {
            let want = d.c.matmul(&d.a_bar.powi(i)).matmul(&d.b_bar);
            assert!(blk.max_abs_diff(&want) < 1e-10);
        }
        let ident = DiscreteSystem { a_bar: ComplexMatrix::identity(4), ..d.clone() };
        let k = conv_kernel(&ident, 4).unwrap();
        assert!(k.blocks.iter().all(|b| b == &k.blocks[0]));
    }

    #[test]
    fn apply_kernel_cases() {
        let sys = random_system(4, 2, 4);
        let d = bilinear_discretize(&sys, 0.1).unwrap();
        let k = conv_kernel(&d, 6).unwrap();
        let mut xs = vec![vec![r(0.0); 2]; 6];
        xs[0][1] = r(1.0);
        let ys = apply_kernel(&k, &xs).unwrap();
        for t in 0..6 {
            assert_eq!(ys[t], k.blocks[t].column(1));
        }
        let zeros = apply_kernel(&k, &vec![vec![r(0.0); 2]; 6]).unwrap();
        assert!(zeros.iter().flatten().all(|z| z.norm() == 0.0));
        assert!(apply_kernel(&k, &vec![vec![r(0.0); 2]; 7]).is_err());
        assert!(apply_kernel(&k, &[vec![r(0.0); 3]]).is_err());
    }

    #[test]
    fn apply_kernel_matches_block_toeplitz() {
        let sys = random_system(3, 2, 21);
        let d = zoh_discretize(&sys, 0.2).unwrap();
        let k = conv_kernel(&d, 6).unwrap();
        let mut rng = rng_from_seed(77);
        let x = gaussian_matrix(&mut rng, 12, 1, 1.0);
        let xs: Vec<Vec<Complex>> = (0..6).map(|t| vec![x[(2 * t, 0)], x[(2 * t + 1, 0)]]).collect();
        let toeplitz = ComplexMatrix::from_fn(12, 12, |i, j| {
            let (t, s) = (i / 2, j / 2);
            if s <= t { k.blocks[t - s][(i % 2, j % 2)] } else { r(0.0) }
        });
        let dense = toeplitz.matmul(&x);
        let ys = apply_kernel(&k, &xs).unwrap();
        for t in 0..6 {
            for q in 0..2 {
                assert!((ys[t][q] - dense[(2 * t + q, 0)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cayley_preserves_eigenvectors() {
        let sys = random_system(5, 2, 31);
        let delta = 0.1;
        let d = bilinear_discretize(&sys, delta).unwrap();
        let dec = eig(&sys.a).unwrap();
        for (j, &l) in dec.lambdas.iter().enumerate() {
            let v = dec.v.column(j);
            let mu = (1.0 + l * delta / 2.0) / (1.0 - l * delta / 2.0);
            let av = d.a_bar.matvec(&v);
            let err: f64 = av.iter().zip(&v).map(|(a, x)| (a - mu * x).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-9);
        }
    }
}
