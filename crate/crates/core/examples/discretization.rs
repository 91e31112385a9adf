// Bilinear and zero-order-hold discretization, inversion and the convolution kernel.

use ssmobs::fourier::cayley;
use ssmobs::matcore::eigenvalues;
use ssmobs::sampling::{diagonalizable_with, gaussian_matrix, rng_from_seed, stable_eigenvalues};
use ssmobs::ssm::{bilinear_discretize, conv_kernel, zoh_discretize, zoh_invert, ContinuousSystem};

pub fn run_example() {
    let mut rng = rng_from_seed(2);
    let lambdas = stable_eigenvalues(&mut rng, 4, 0.1, 1.0, 1.0);
    let (a, _) = diagonalizable_with(&mut rng, &lambdas);
    let b = gaussian_matrix(&mut rng, 4, 1, 1.0);
    let c = gaussian_matrix(&mut rng, 1, 4, 1.0);
    let sys = ContinuousSystem::new(a.clone(), b.clone(), c).unwrap();
    let delta = 0.5;

    let zoh = zoh_discretize(&sys, delta).unwrap();
    let back = zoh_invert(&zoh).unwrap();
    println!("zoh round trip: |dA| {:.1e}, |dB| {:.1e}", back.a.rel_diff(&a), back.b.rel_diff(&b));
    assert!(back.a.rel_diff(&a) < 1e-8 && back.b.rel_diff(&b) < 1e-8);

    let bil = bilinear_discretize(&sys, delta).unwrap();
    let mut got: Vec<_> = eigenvalues(&bil.a_bar).unwrap();
    let mut want: Vec<_> = lambdas.iter().map(|&l| cayley(l, delta)).collect();
    got.sort_by(|x, y| x.re.total_cmp(&y.re));
    want.sort_by(|x, y| x.re.total_cmp(&y.re));
    let err = got.iter().zip(&want).map(|(g, w)| (g - w).norm()).fold(0.0, f64::max);
    println!("bilinear spectrum matches the Cayley map within {err:.1e}");
    assert!(err < 1e-9);

    let kernel = conv_kernel(&bil, 8).unwrap();
    println!("kernel has {} blocks", kernel.blocks.len());
}

#[allow(dead_code)]
fn main() {
    run_example();
}
