// Eigenvector-free Hautus loss through scaled Vandermonde matrices.

use ssmobs::matcore::{rank_with_tol, Complex, ComplexMatrix};
use ssmobs::observability::obs_report;
use ssmobs::sampling::{disc_eigenvalues, gaussian_matrix, random_orthogonal, rng_from_seed};
use ssmobs::vandermonde::{c_tilde, gamma_matrix, kron_independence_check, loss_thm5, GammaKind, RowSelection};

pub fn run_example() {
    let mut rng = rng_from_seed(5);
    let (n, m) = (6, 3);
    let lambdas = disc_eigenvalues(&mut rng, n, 0.5, 1.0);
    let v = random_orthogonal(&mut rng, n);
    let c = gaussian_matrix(&mut rng, m, n, 1.0);
    let ct = c_tilde(&c, &v).unwrap();

    let gamma = gamma_matrix(&ct.row(0), &lambdas, 1.0, GammaKind::Poly).unwrap();
    println!("Gamma rank {}", rank_with_tol(&gamma.entries, 1e-10).unwrap().rank);

    let loss = loss_thm5(&lambdas, &ct, RowSelection::All, 1e-2, 1e-3).unwrap();
    let a = v.matmul(&ComplexMatrix::from_diag(&lambdas)).matmul(&v.transpose());
    let report = obs_report(&c, &a, 1e-10).unwrap();
    println!("loss {:.2e}, observable {}", loss.total, report.observable);
    if loss.total == 0.0 {
        assert!(report.observable);
    }

    let vs: Vec<Vec<Complex>> = (0..n).map(|i| v.column(i)).collect();
    let cs: Vec<Vec<Complex>> = (0..n).map(|i| ct.column(i)).collect();
    println!("Kronecker columns independent: {}", kron_independence_check(&vs, &cs, 1e-10).unwrap());
}

#[allow(dead_code)]
fn main() {
    run_example();
}
