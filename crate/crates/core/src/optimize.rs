//! Flat parameter vectors, finite-difference gradients and a fixed-step
//! gradient-descent driver shared by every loss in the crate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{Complex, ComplexMatrix};
pub use crate::observability::relu;

/// How a slot of the flat vector is read back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    Real { rows: usize, cols: usize },
    /// Row-major `(re, im)` pairs.
    Complex { rows: usize, cols: usize },
}

impl SlotKind {
    pub fn len(&self) -> usize {
        match *self {
            SlotKind::Real { rows, cols } => rows * cols,
            SlotKind::Complex { rows, cols } => 2 * rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub offset: usize,
    pub kind: SlotKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub manifest: Vec<Slot>,
}

impl ParamVector {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_slot(&mut self, name: &str, kind: SlotKind) -> Result<()> {
        if self.slot(name).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate slot {name}")));
        }
        self.manifest.push(Slot { name: name.to_string(), offset: self.values.len(), kind });
        Ok(())
    }

    /// Stores the real parts of `m`; rejects matrices with imaginary content.
    pub fn push_real(&mut self, name: &str, m: &ComplexMatrix) -> Result<()> {
        if !m.is_real() {
            return Err(Error::InvalidArgument(format!("slot {name} expects a real matrix")));
        }
        self.push_slot(name, SlotKind::Real { rows: m.rows(), cols: m.cols() })?;
        self.values.extend(m.data().iter().map(|z| z.re));
        Ok(())
    }

    pub fn push_complex(&mut self, name: &str, m: &ComplexMatrix) -> Result<()> {
        self.push_slot(name, SlotKind::Complex { rows: m.rows(), cols: m.cols() })?;
        self.values.extend(m.data().iter().flat_map(|z| [z.re, z.im]));
        Ok(())
    }

    pub fn push_complex_vec(&mut self, name: &str, v: &[Complex]) -> Result<()> {
        self.push_complex(name, &ComplexMatrix::column_vector(v))
    }

    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.manifest.iter().find(|s| s.name == name)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks that the slots tile the vector exactly, in order.
    pub fn validate(&self) -> Result<()> {
        let mut at = 0;
        for s in &self.manifest {
            if s.offset != at {
                return Err(Error::InvalidArgument(format!("slot {} starts at {} instead of {at}", s.name, s.offset)));
            }
            at += s.kind.len();
        }
        if at != self.values.len() {
            return Err(Error::InvalidArgument(format!("manifest covers {at} of {} values", self.values.len())));
        }
        Ok(())
    }

    /// Reads slot `name` out of an arbitrary flat vector laid out like `self`.
    pub fn matrix_in(&self, values: &[f64], name: &str) -> Result<ComplexMatrix> {
        let s = self.slot(name).ok_or_else(|| Error::InvalidArgument(format!("no slot {name}")))?;
        let chunk = values
            .get(s.offset..s.offset + s.kind.len())
            .ok_or_else(|| Error::ShapeMismatch(format!("vector too short for slot {name}")))?;
        Ok(match s.kind {
            SlotKind::Real { rows, cols } => ComplexMatrix::from_real(rows, cols, chunk)?,
            SlotKind::Complex { rows, cols } => {
                let data = chunk.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect();
                ComplexMatrix::new(rows, cols, data)?
            }
        })
    }

    pub fn matrix(&self, name: &str) -> Result<ComplexMatrix> {
        self.matrix_in(&self.values, name)
    }

    pub fn complex_vec_in(&self, values: &[f64], name: &str) -> Result<Vec<Complex>> {
        Ok(self.matrix_in(values, name)?.into_data())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub fd_step: f64,
    pub seed: u64,
    pub clip: Option<f64>,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, steps: 1000, fd_step: 1e-6, seed: 0, clip: None }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::InvalidArgument(format!("fd step {}", self.fd_step)));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::InvalidArgument(format!("clip {c}")));
            }
        }
        Ok(())
    }
}

/// Central differences with `hᵢ = h_rel·(1 + |xᵢ|)`.
///
/// When the stencil straddles a kink (the two one-sided slopes differ by more
/// than `1e3·h`) and both slopes agree in sign, the steeper one-sided slope is
/// used so hinge losses can be driven past their kink to an exact zero.
pub fn fd_gradient<F>(loss: &F, x: &[f64], h_rel: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let f0 = loss(x);
    if !f0.is_finite() {
        return Err(Error::NonFinite("loss at the base point".into()));
    }
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let h = h_rel * (1.0 + x[i].abs());
            let mut xp = x.to_vec();
            xp[i] = x[i] + h;
            let fp = loss(&xp);
            xp[i] = x[i] - h;
            let fm = loss(&xp);
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFinite(format!("loss near coordinate {i}")));
            }
            let fwd = (fp - f0) / h;
            let bwd = (f0 - fm) / h;
            if (fwd - bwd).abs() > 1e3 * h && fwd * bwd > 0.0 {
                Ok(if fwd.abs() > bwd.abs() { fwd } else { bwd })
            } else {
                Ok((fp - fm) / (2.0 * h))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdStep {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdResult {
    pub x: Vec<f64>,
    pub trace: Vec<GdStep>,
    pub final_loss: f64,
    pub reached_zero: bool,
}

/// Fixed-step descent. `observer` sees every iterate before its update.
/// Stops early once the loss is exactly zero.
pub fn gd_run<F, O>(loss: &F, x0: &[f64], cfg: &GdConfig, mut observer: O) -> Result<GdResult>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
    O: FnMut(usize, &[f64], f64),
{
    cfg.validate()?;
    let mut x = x0.to_vec();
    let mut trace = Vec::with_capacity(cfg.steps.min(1 << 16));
    let initial = loss(&x);
    let ceiling = 1e6 * initial.abs().max(f64::MIN_POSITIVE);
    for step in 0..cfg.steps {
        let value = loss(&x);
        if !value.is_finite() || value > ceiling {
            return Err(Error::DivergenceDetected { step, loss: value });
        }
        observer(step, &x, value);
        if value == 0.0 {
            trace.push(GdStep { step, loss: 0.0, grad_norm: 0.0 });
            return Ok(GdResult { x, trace, final_loss: 0.0, reached_zero: true });
        }
        let mut g = fd_gradient(loss, &x, cfg.fd_step)?;
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        trace.push(GdStep { step, loss: value, grad_norm: norm });
        let scale = match cfg.clip {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        for (xi, gi) in x.iter_mut().zip(g.iter_mut()) {
            *xi -= cfg.learning_rate * scale * *gi;
        }
    }
    let final_loss = loss(&x);
    if !final_loss.is_finite() {
        return Err(Error::DivergenceDetected { step: cfg.steps, loss: final_loss });
    }
    Ok(GdResult { x, trace, final_loss, reached_zero: final_loss == 0.0 })
}

pub fn gd_minimize<F>(loss: &F, x0: &[f64], cfg: &GdConfig) -> Result<GdResult>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    gd_run(loss, x0, cfg, |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{loss_thm4, Margins};
    use crate::permutation::loss_permutation;
    use crate::sampling::{gaussian_matrix, permutation_matrix, random_n_cycle, rng_from_seed};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn relu_examples() {
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu(0.0), 0.0);
        assert_eq!(relu(0.3), 0.3);
    }

    #[test]
    fn manifest_round_trip() {
        let mut rng = rng_from_seed(2);
        let c = gaussian_matrix(&mut rng, 2, 3, 1.0);
        let lam = vec![Complex::new(0.5, -0.25), Complex::new(1.0, 2.0)];
        let mut p = ParamVector::new();
        p.push_real("C", &c).unwrap();
        p.push_complex_vec("lambda", &lam).unwrap();
        p.validate().unwrap();
        assert_eq!(p.len(), 6 + 4);
        assert_eq!(p.matrix("C").unwrap(), c);
        assert_eq!(p.complex_vec_in(&p.values, "lambda").unwrap(), lam);
        assert!(p.push_real("C", &c).is_err());
        let mut broken = p.clone();
        broken.values.pop();
        assert!(broken.validate().is_err());
    }

    #[test]
    fn fd_examples() {
        let half_sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() / 2.0;
        let x = [0.3, -1.2, 4.0];
        let g = fd_gradient(&half_sq, &x, 1e-6).unwrap();
        for (gi, xi) in g.iter().zip(x) {
            assert!((gi - xi).abs() < 1e-8);
        }
        let hinge = |x: &[f64]| relu(0.5 - x[0]);
        assert_eq!(fd_gradient(&hinge, &[0.9], 1e-6).unwrap(), vec![0.0]);
        let nan = |_: &[f64]| f64::NAN;
        assert!(matches!(fd_gradient(&nan, &[0.0], 1e-6), Err(Error::NonFinite(_))));
    }

    #[test]
    fn kink_straddle_takes_the_active_slope() {
        let hinge = |x: &[f64]| relu(0.5 - x[0]);
        let g = fd_gradient(&hinge, &[0.5 - 1e-8], 1e-6).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-6);
        let vee = |x: &[f64]| x[0].abs();
        assert!(fd_gradient(&vee, &[0.0], 1e-6).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn quadratic_converges() {
        let target = [1.0, -2.0, 0.5];
        let loss = |x: &[f64]| x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 2.0;
        let cfg = GdConfig { learning_rate: 0.1, steps: 2000, ..Default::default() };
        let r = gd_minimize(&loss, &[0.0; 3], &cfg).unwrap();
        for (a, b) in r.x.iter().zip(target) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(r.trace.len(), 2000);
    }

    #[test]
    fn determinism_and_early_stop() {
        let loss = |x: &[f64]| relu(1.0 - x[0]) + relu(2.0 - x[1]);
        let cfg = GdConfig { learning_rate: 0.05, steps: 500, ..Default::default() };
        let a = gd_minimize(&loss, &[0.0, 0.0], &cfg).unwrap();
        let b = gd_minimize(&loss, &[0.0, 0.0], &cfg).unwrap();
        assert!(a.reached_zero);
        assert!(a.trace.len() < 500);
        assert_eq!(a.x, b.x);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn divergence_is_reported() {
        let loss = |x: &[f64]| -x[0] * x[0] + 10.0;
        let grow = |x: &[f64]| x[0] * x[0];
        let cfg = GdConfig { learning_rate: 1.5, steps: 200, ..Default::default() };
        assert!(matches!(gd_minimize(&grow, &[1.0], &cfg), Err(Error::DivergenceDetected { .. })));
        let cfg = GdConfig { learning_rate: 0.1, steps: 5, ..Default::default() };
        assert!(gd_minimize(&loss, &[1.0], &cfg).is_ok());
        assert!(GdConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn thm4_reaches_zero() {
        let (n, big_l, delta) = (12, 16, 1.0);
        let mut rng = rng_from_seed(4);
        let lam: Vec<Complex> = (0..n)
            .map(|k| {
                let y: f64 = rng.random_range(0.3..3.0);
                Complex::new(rng.random_range(-0.05..0.05), if k % 2 == 0 { y } else { -y })
            })
            .collect();
        let mut p = ParamVector::new();
        p.push_complex_vec("lambda", &lam).unwrap();
        let layout = p.clone();
        let loss = move |x: &[f64]| {
            let l = layout.complex_vec_in(x, "lambda").unwrap();
            loss_thm4(&l, delta, big_l, Margins::uniform(0.05)).map(|v| v.total).unwrap_or(f64::INFINITY)
        };
        let cfg = GdConfig { learning_rate: 1e-3, steps: 5000, ..Default::default() };
        let r = gd_minimize(&loss, &p.values, &cfg).unwrap();
        assert!(r.reached_zero, "final loss {}", r.final_loss);
    }

    #[test]
    fn permutation_loss_from_near_shift() {
        let mut rng = rng_from_seed(6);
        let n = 5;
        let shift = permutation_matrix(&random_n_cycle(&mut rng, n));
        let a0 = &shift + &gaussian_matrix(&mut rng, n, n, 0.02);
        let mut p = ParamVector::new();
        p.push_real("A", &a0).unwrap();
        let layout = p.clone();
        let loss = move |x: &[f64]| loss_permutation(&layout.matrix_in(x, "A").unwrap(), true).unwrap().total;
        let coarse = GdConfig { learning_rate: 2e-3, steps: 2000, fd_step: 1e-2, ..Default::default() };
        let fine = GdConfig { learning_rate: 2e-4, steps: 2000, fd_step: 1e-3, ..Default::default() };
        let r = gd_minimize(&loss, &p.values, &coarse).unwrap();
        let r = gd_minimize(&loss, &r.x, &fine).unwrap();
        assert!(r.final_loss <= 1e-8, "final loss {}", r.final_loss);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn fd_matches_polynomial_gradient(coef in proptest::collection::vec(-2.0f64..2.0, 6), x in proptest::collection::vec(-1.5f64..1.5, 3)) {
            let c = coef.clone();
            let loss = move |v: &[f64]| {
                c[0] * v[0].powi(3) + c[1] * v[0] * v[1] + c[2] * v[1].powi(2) * v[2]
                    + c[3] * v[2].powi(4) + c[4] * v[0] + c[5]
            };
            let g = fd_gradient(&loss, &x, 1e-6).unwrap();
            let want = [
                3.0 * coef[0] * x[0].powi(2) + coef[1] * x[1] + coef[4],
                coef[1] * x[0] + 2.0 * coef[2] * x[1] * x[2],
                coef[2] * x[1].powi(2) + 4.0 * coef[3] * x[2].powi(3),
            ];
            for (a, b) in g.iter().zip(want) {
                prop_assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
            }
        }
    }
}
