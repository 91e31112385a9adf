// Shared-parameter construction, fast powers and the two training rules.

use ssmobs::coupling::{
    build_a, coupled_power, lipschitz_lower_bound, robbins_monro_diagnostic, train_coupled, train_vanilla, CoupledState,
    Optimizer, Realized, TrainConfig, VanillaState,
};
use ssmobs::sampling::{disc_eigenvalues, gaussian_matrix, rng_from_seed};
use ssmobs::Complex;

pub fn run_example() {
    let mut rng = rng_from_seed(6);
    let (m, p) = (3, 2);
    let n = m * p;
    let lambdas = disc_eigenvalues(&mut rng, n, 0.4, 0.9);
    let state = CoupledState::random(&mut rng, m, p, lambdas.clone()).unwrap();
    let params = state.params().unwrap();
    let a = build_a(&params).unwrap();
    let err = coupled_power(&params, 10).unwrap().rel_diff(&a.powi(10));
    println!("fast power vs dense: {err:.1e}");
    assert!(err < 1e-10);

    let target = gaussian_matrix(&mut rng, n, n, 0.5);
    let loss = |r: &Realized<'_>| (r.a - &target).frobenius_norm().powi(2);
    let q = 0.75;
    let cfg = TrainConfig {
        steps: 60,
        learning_rate: 0.05,
        lr_decay: q,
        optimizer: Optimizer::Normalized,
        q_exponent: q,
        ..TrainConfig::default()
    };
    let trace = train_coupled(&state, &loss, &cfg).unwrap();
    let losses = trace.losses();
    println!("coupled: loss {:.3} -> {:.3}", losses[0], losses[losses.len() - 1]);
    let rm = robbins_monro_diagnostic(&trace.d_b_norms()[1..], q);
    println!("B step sums satisfied: {}", rm.b_satisfied());

    let linear: Vec<Complex> = (1..=n).map(|k| Complex::new(k as f64, 0.0)).collect();
    let real: Vec<f64> = linear.iter().map(|l| l.re).collect();
    println!("eigendecomposition Lipschitz bound {:.3}", lipschitz_lower_bound(&real).unwrap());
    let vanilla = VanillaState::random(&mut rng, m, p, linear).unwrap();
    let cfg = TrainConfig { steps: 3, learning_rate: 1e-4, ..TrainConfig::default() };
    let trace = train_vanilla(&vanilla, &loss, &cfg).unwrap();
    let ratios: Vec<f64> = trace.records.iter().map(|r| r.expansion_ratio).collect();
    println!("vanilla expansion ratios {ratios:.2?}");
}

#[allow(dead_code)]
fn main() {
    run_example();
}
