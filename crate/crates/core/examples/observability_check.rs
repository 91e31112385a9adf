// Rank test, Hautus losses and the eigenvector-loss counterexample.

use ssmobs::observability::{loss_hautus_eigvec, loss_hautus_pencil, loss_obs_det, obs_report, DEFAULT_MARGIN};
use ssmobs::sampling::{gaussian_matrix, rng_from_seed};
use ssmobs::ComplexMatrix;

pub fn run_example() {
    let c = ComplexMatrix::from_real_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]).unwrap();
    let a = ComplexMatrix::identity(3);
    let report = obs_report(&c, &a, 1e-10).unwrap();
    let eigvec = loss_hautus_eigvec(&c, &ComplexMatrix::identity(3), DEFAULT_MARGIN).unwrap();
    let pencil = loss_hautus_pencil(&c, &a, DEFAULT_MARGIN).unwrap();
    println!("A = I3: rank {} of {}, eigvec loss {}, pencil loss {:.3}", report.rank, report.n, eigvec.total, pencil.total);
    assert!(!report.observable && eigvec.total == 0.0 && pencil.total > 0.0);

    let mut rng = rng_from_seed(1);
    let a = gaussian_matrix(&mut rng, 4, 4, 0.5);
    let c = gaussian_matrix(&mut rng, 2, 4, 1.0);
    let report = obs_report(&c, &a, 1e-10).unwrap();
    let det = loss_obs_det(&c, &a, 1e-6).unwrap();
    println!("random 4x4: observable {}, log det gram {:.3}, det loss {}", report.observable, report.gram_logdet, det.total);
    assert!(report.observable);
}

#[allow(dead_code)]
fn main() {
    run_example();
}
