// Frequency-domain kernel losses, the kernel-vector construction and the distinctness experiment.

use ssmobs::fourier::{
    experiment_kernel_distinctness, kernel_vector, loss_thm3, loss_thm4, psi_diag, EigSampler, KernelMode, KernelVariant,
    Margins,
};
use ssmobs::sampling::{gaussian_matrix, random_orthogonal, rng_from_seed, stable_eigenvalues};

pub fn run_example() {
    let mut rng = rng_from_seed(4);
    let (n, m, delta, big_l) = (6, 3, 1.0, 16);
    let lambdas = stable_eigenvalues(&mut rng, n, 0.05, 0.5, 2.0);
    let psi = psi_diag(1, &lambdas, delta, big_l).unwrap();
    println!("first Psi entry at j = 1: {:.4}", psi.entries[0]);

    let margins = Margins::uniform(0.05);
    let l3 = loss_thm3(&lambdas, delta, big_l, margins).unwrap();
    let l4 = loss_thm4(&lambdas, delta, big_l, margins).unwrap();
    println!("impulse loss {:.4}, convolution loss {:.4}", l3.total, l4.total);

    let c = gaussian_matrix(&mut rng, m, n, 1.0);
    let v = random_orthogonal(&mut rng, n);
    let kv = kernel_vector(KernelVariant::Thm4, 1, &c, &v, &lambdas, delta, big_l).unwrap();
    println!("kernel vector residual {:.1e}", kv.residual);
    assert!(!kv.is_trivial && kv.residual < 1e-9);

    let sampler = EigSampler::decaying();
    let psi = experiment_kernel_distinctness(10, 6, 3, KernelMode::PsiJ, sampler, delta, big_l, 0).unwrap();
    let pow = experiment_kernel_distinctness(10, 6, 3, KernelMode::LambdaPow, sampler, delta, big_l, 0).unwrap();
    println!("distinct kernel pairs: psi {psi:?}, powers {pow:?}");
    assert!(psi.iter().zip(&pow).all(|(a, b)| a > b));
}

#[allow(dead_code)]
fn main() {
    run_example();
}
