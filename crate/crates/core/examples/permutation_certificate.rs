// Root-of-unity loss, permutation certification and near-permutation observability.

use ssmobs::permutation::{certify_permutation, check_c_nonconstant, loss_permutation, nearest_permutation, theorem2_check};
use ssmobs::sampling::{gaussian_matrix, permutation_matrix, random_n_cycle, rng_from_seed};

pub fn run_example() {
    let mut rng = rng_from_seed(3);
    let n = 6;
    let q = permutation_matrix(&random_n_cycle(&mut rng, n));
    let loss = loss_permutation(&q, true).unwrap();
    let cert = certify_permutation(&q, 1e-9).unwrap();
    println!("{n}-cycle: loss {:.1e}, certified {}", loss.total, cert.is_permutation);
    assert!(cert.is_permutation && loss.total < 1e-9);

    let xi = gaussian_matrix(&mut rng, n, n, 1.0);
    let p = &q + &xi.scale_real(0.05 / xi.frobenius_norm());
    let near = nearest_permutation(&p, 1e-9).unwrap();
    println!("perturbed: recovered {}, |Xi|_F {:.3}", near.nearest_perm.as_ref() == Some(&q), near.xi_norm);
    assert_eq!(near.nearest_perm.as_ref(), Some(&q));

    let c = gaussian_matrix(&mut rng, n - 2, n, 1.0);
    assert!(check_c_nonconstant(&c, 1e-8));
    let check = theorem2_check(&c, &p, 0.1, 1e-10).unwrap();
    println!("perturbed system observable {}, gram diff {:.2e}", check.report.observable, check.gram_diff);
    assert!(check.report.observable);
}

#[allow(dead_code)]
fn main() {
    run_example();
}
