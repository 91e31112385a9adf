// Driving each enforcement loss to zero with finite-difference gradient descent.

use ssmobs::enforce::{enforce, EnforceConfig, LossName};

pub fn run_example() {
    for (loss, n, m) in [(LossName::Hautus, 5, 2), (LossName::Thm5, 8, 5), (LossName::Thm4, 6, 3)] {
        let mut cfg = EnforceConfig::new(loss, n, m);
        cfg.gd.seed = 1;
        cfg.track_gram = true;
        let out = enforce(&cfg).unwrap();
        println!(
            "{loss}: loss {:.2e} after {} steps, observable {}, sigma_min {:.2e}",
            out.final_loss.total,
            out.result.trace.len(),
            out.report.observable,
            out.report.sigma_min
        );
        assert_ne!(out.zero_implies_observable(), Some(false));
    }
}

#[allow(dead_code)]
fn main() {
    run_example();
}
