use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{a_unchecked, b_unchecked, b_with_s, f_sqrt, orthogonalize, selection_matrix, CoupledParams, FMode};
use crate::error::{Error, Result};
use crate::matcore::{Complex, ComplexMatrix};
use crate::optimize::fd_gradient;
use crate::sampling::{gaussian_matrix, random_orthogonal, random_permutation, rng_for_trial, SimRng};

/// The matrices a training loss sees at one iterate.
pub struct Realized<'a> {
    pub params: &'a CoupledParams,
    pub a: &'a ComplexMatrix,
    pub b: &'a ComplexMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// `θ ← θ − ηₖ∇L`.
    #[default]
    Plain,
    /// `θ ← θ − ηₖ∇L/‖∇L‖`, so `‖Δθ‖ = ηₖ` exactly.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// `ηₖ = η/(k+1)^decay`.
    pub lr_decay: f64,
    pub optimizer: Optimizer,
    pub fd_step: f64,
    pub q_exponent: f64,
    pub f_mode: FMode,
    /// `Aₖ₊₁ = Aₖ + sₖ𝒜ₖ` when true, else `(1 − sₖ)Aₖ + sₖ𝒜ₖ` with `sₖ ≤ 1`.
    pub literal_update: bool,
    /// Steps at which the eigenbases of `Q`, `U` and the selection `S` are refreshed.
    pub checkpoints: Vec<usize>,
    pub v_learning_rate: f64,
    pub probe_grad_b: bool,
    pub probe_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            learning_rate: 1e-2,
            lr_decay: 0.0,
            optimizer: Optimizer::Plain,
            fd_step: 1e-6,
            q_exponent: 0.75,
            f_mode: FMode::Modulus,
            literal_update: true,
            checkpoints: Vec::new(),
            v_learning_rate: 1e-2,
            probe_grad_b: false,
            probe_eps: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.q_exponent) {
            return Err(Error::InvalidArgument(format!("q = {} outside [1/2, 1]", self.q_exponent)));
        }
        if !(self.learning_rate > 0.0) || !(self.fd_step > 0.0) || !(self.probe_eps > 0.0) {
            return Err(Error::InvalidArgument("learning rate, fd step and probe size must be positive".into()));
        }
        if !(self.lr_decay >= 0.0) {
            return Err(Error::InvalidArgument(format!("lr decay {}", self.lr_decay)));
        }
        Ok(())
    }

    fn lr_at(&self, k: usize) -> f64 {
        self.learning_rate / ((k + 1) as f64).powf(self.lr_decay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub loss: f64,
    #[serde(rename = "dA_norm")]
    pub d_a_norm: f64,
    #[serde(rename = "dB_norm")]
    pub d_b_norm: f64,
    #[serde(rename = "stepA")]
    pub step_a: f64,
    #[serde(rename = "stepB")]
    pub step_b: f64,
    #[serde(rename = "gradQ_norm")]
    pub grad_q_norm: f64,
    #[serde(rename = "gradU_norm")]
    pub grad_u_norm: f64,
    /// `‖∇_B L‖`, NaN unless probed.
    #[serde(rename = "gradB_norm")]
    pub grad_b_norm: f64,
    /// `stepB·‖∇_B L‖` for the coupled rule, `‖∇_B L‖` for the vanilla one.
    #[serde(rename = "scaled_gradB")]
    pub scaled_grad_b: f64,
    /// Paired-perturbation ratio; NaN for the coupled rule.
    pub expansion_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub final_params: CoupledParams,
}

impl TrainTrace {
    pub fn d_a_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d_a_norm).collect()
    }

    pub fn d_b_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d_b_norm).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }
}

fn norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lambdas_from(theta: &[f64]) -> Vec<Complex> {
    theta.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect()
}

fn push_lambdas(theta: &mut Vec<f64>, lambdas: &[Complex]) {
    theta.extend(lambdas.iter().flat_map(|l| [l.re, l.im]));
}

fn realize(params: CoupledParams, f_mode: FMode) -> Result<(CoupledParams, ComplexMatrix, ComplexMatrix)> {
    let a = a_unchecked(&params);
    let b = b_unchecked(&params, f_mode)?;
    Ok((params, a, b))
}

fn eval<L>(loss: &L, r: Result<(CoupledParams, ComplexMatrix, ComplexMatrix)>) -> f64
where
    L: Fn(&Realized<'_>) -> f64 + Sync,
{
    match r {
        Ok((params, a, b)) => loss(&Realized { params: &params, a: &a, b: &b }),
        Err(_) => f64::INFINITY,
    }
}

fn grad_b_norm<L>(loss: &L, params: &CoupledParams, a: &ComplexMatrix, b: &ComplexMatrix, h: f64) -> Result<f64>
where
    L: Fn(&Realized<'_>) -> f64 + Sync,
{
    let (rows, cols) = b.shape();
    let flat: Vec<f64> = b.data().iter().flat_map(|z| [z.re, z.im]).collect();
    let f = |x: &[f64]| {
        let data = x.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect();
        let bb = ComplexMatrix::new(rows, cols, data).expect("shape preserved");
        loss(&Realized { params, a, b: &bb })
    };
    Ok(norm(&fd_gradient(&f, &flat, h)?))
}

fn step_direction(grad: &[f64], opt: Optimizer) -> Vec<f64> {
    match opt {
        Optimizer::Plain => grad.to_vec(),
        Optimizer::Normalized => {
            let g = norm(grad);
            if g > 0.0 {
                grad.iter().map(|x| x / g).collect()
            } else {
                vec![0.0; grad.len()]
            }
        }
    }
}

fn check_divergence(step: usize, value: f64, initial: f64) -> Result<()> {
    if !value.is_finite() || value > 1e6 * initial.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::DivergenceDetected { step, loss: value });
    }
    Ok(())
}

/// `Q = V diag(e^{iφ}) Vᵀ` with `V` real orthogonal: unitary and complex symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub v_q: ComplexMatrix,
    pub phi_q: Vec<f64>,
    pub v_u: ComplexMatrix,
    pub phi_u: Vec<f64>,
    pub lambdas: Vec<Complex>,
    pub sel: Vec<usize>,
    pub p: usize,
}

impl CoupledState {
    pub fn random(rng: &mut SimRng, m: usize, p: usize, lambdas: Vec<Complex>) -> Result<Self> {
        let phase = |rng: &mut SimRng| (0..m).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
        let v_q = random_orthogonal(rng, m);
        let phi_q = phase(rng);
        let v_u = random_orthogonal(rng, m);
        let phi_u = phase(rng);
        let sel = random_permutation(rng, m * p)[..m].to_vec();
        let state = Self { v_q, phi_q, v_u, phi_u, lambdas, sel, p };
        state.params()?;
        Ok(state)
    }

    pub fn symmetric_unitary(v: &ComplexMatrix, phi: &[f64]) -> ComplexMatrix {
        let d: Vec<Complex> = phi.iter().map(|&t| Complex::from_polar(1.0, t)).collect();
        v.matmul(&ComplexMatrix::from_diag(&d)).matmul(&v.transpose())
    }

    fn params_unchecked(&self) -> Result<CoupledParams> {
        CoupledParams::unconstrained(
            Self::symmetric_unitary(&self.v_q, &self.phi_q),
            Self::symmetric_unitary(&self.v_u, &self.phi_u),
            self.lambdas.clone(),
            self.sel.clone(),
            self.p,
        )
    }

    pub fn params(&self) -> Result<CoupledParams> {
        let p = self.params_unchecked()?;
        p.check_unitary()?;
        Ok(p)
    }

    fn theta(&self) -> Vec<f64> {
        let mut t = [self.phi_q.as_slice(), self.phi_u.as_slice()].concat();
        push_lambdas(&mut t, &self.lambdas);
        t
    }

    fn with_theta(&self, theta: &[f64]) -> Self {
        let m = self.phi_q.len();
        Self {
            phi_q: theta[..m].to_vec(),
            phi_u: theta[m..2 * m].to_vec(),
            lambdas: lambdas_from(&theta[2 * m..]),
            ..self.clone()
        }
    }

    fn refresh_bases<L>(&mut self, loss: &L, cfg: &TrainConfig) -> Result<()>
    where
        L: Fn(&Realized<'_>) -> f64 + Sync,
    {
        let m = self.phi_q.len();
        for which in 0..2 {
            let base = if which == 0 { &self.v_q } else { &self.v_u };
            let flat: Vec<f64> = base.data().iter().map(|z| z.re).collect();
            let f = |x: &[f64]| {
                let v = ComplexMatrix::from_real(m, m, x).expect("square");
                let mut s = self.clone();
                if which == 0 {
                    s.v_q = v;
                } else {
                    s.v_u = v;
                }
                eval(loss, s.params_unchecked().and_then(|p| realize(p, cfg.f_mode)))
            };
            let g = fd_gradient(&f, &flat, cfg.fd_step)?;
            let stepped: Vec<f64> = flat.iter().zip(&g).map(|(x, gi)| x - cfg.v_learning_rate * gi).collect();
            let v = orthogonalize(&ComplexMatrix::from_real(m, m, &stepped)?)?;
            if which == 0 {
                self.v_q = v;
            } else {
                self.v_u = v;
            }
        }
        Ok(())
    }

    /// Greedy re-selection: each column moves to the unused row whose relaxed
    /// selection weight has the most negative loss gradient.
    fn reselect<L>(&mut self, loss: &L, cfg: &TrainConfig) -> Result<()>
    where
        L: Fn(&Realized<'_>) -> f64 + Sync,
    {
        let params = self.params()?;
        let a = a_unchecked(&params);
        let roots = f_sqrt(&params.lambdas, cfg.f_mode)?;
        let (n, m) = (params.n(), params.m());
        let s0: Vec<f64> = selection_matrix(&params.sel, n).data().iter().map(|z| z.re).collect();
        let f = |x: &[f64]| {
            let s = ComplexMatrix::from_real(n, m, x).expect("shape preserved");
            let b = b_with_s(&params.u, &roots, params.p, &s);
            loss(&Realized { params: &params, a: &a, b: &b })
        };
        let g = fd_gradient(&f, &s0, cfg.fd_step)?;
        let mut used = vec![false; n];
        let mut sel = Vec::with_capacity(m);
        for j in 0..m {
            let cur = params.sel[j];
            let mut best = if used[cur] { None } else { Some(cur) };
            for i in 0..n {
                if used[i] {
                    continue;
                }
                if best.is_none_or(|b| g[i * m + j] < g[b * m + j]) {
                    best = Some(i);
                }
            }
            let pick = best.expect("n ≥ m leaves a free row");
            used[pick] = true;
            sel.push(pick);
        }
        self.sel = sel;
        Ok(())
    }
}

/// Additive-blend training of the coupled parameterization.
pub fn train_coupled<L>(state0: &CoupledState, loss: &L, cfg: &TrainConfig) -> Result<TrainTrace>
where
    L: Fn(&Realized<'_>) -> f64 + Sync,
{
    cfg.validate()?;
    let mut state = state0.clone();
    let (params, a0, b0) = realize(state.params()?, cfg.f_mode)?;
    let initial = loss(&Realized { params: &params, a: &a0, b: &b0 });
    check_divergence(0, initial, initial)?;
    let (mut run_a, mut run_b) = (a0.clone(), b0.clone());
    let (mut prev_a, mut prev_b) = (a0, b0);
    let m = state.phi_q.len();
    let q = cfg.q_exponent;
    let mut records = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let (params, a_k, b_k) = realize(state.params()?, cfg.f_mode)?;
        let d_a = (&a_k - &prev_a).frobenius_norm();
        let d_b = (&b_k - &prev_b).frobenius_norm();
        let (step_a, step_b) = (d_a.powf(1.0 / (2.0 * q)), d_b.powf(1.0 / q));
        if cfg.literal_update {
            run_a = &run_a + &a_k.scale_real(step_a);
            run_b = &run_b + &b_k.scale_real(step_b);
        } else {
            let (sa, sb) = (step_a.min(1.0), step_b.min(1.0));
            run_a = &run_a.scale_real(1.0 - sa) + &a_k.scale_real(sa);
            run_b = &run_b.scale_real(1.0 - sb) + &b_k.scale_real(sb);
        }
        let value = loss(&Realized { params: &params, a: &a_k, b: &b_k });
        check_divergence(k, value, initial)?;
        let theta = state.theta();
        let f = |t: &[f64]| eval(loss, state.with_theta(t).params_unchecked().and_then(|p| realize(p, cfg.f_mode)));
        let grad = fd_gradient(&f, &theta, cfg.fd_step)?;
        let grad_b = if cfg.probe_grad_b { grad_b_norm(loss, &params, &a_k, &b_k, cfg.fd_step)? } else { f64::NAN };
        records.push(TrainRecord {
            step: k,
            loss: value,
            d_a_norm: d_a,
            d_b_norm: d_b,
            step_a,
            step_b,
            grad_q_norm: norm(&grad[..m]),
            grad_u_norm: norm(&grad[m..2 * m]),
            grad_b_norm: grad_b,
            scaled_grad_b: step_b * grad_b,
            expansion_ratio: f64::NAN,
        });
        let lr = cfg.lr_at(k);
        let dir = step_direction(&grad, cfg.optimizer);
        let next: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t - lr * d).collect();
        state = state.with_theta(&next);
        if cfg.checkpoints.contains(&k) {
            state.refresh_bases(loss, cfg)?;
            state.reselect(loss, cfg)?;
        }
        prev_a = a_k;
        prev_b = b_k;
    }
    Ok(TrainTrace { records, a: run_a, b: run_b, final_params: state.params()? })
}

/// Unconstrained real `Q`, `U` for the direct-reassignment rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanillaState {
    pub q: ComplexMatrix,
    pub u: ComplexMatrix,
    pub lambdas: Vec<Complex>,
    pub sel: Vec<usize>,
    pub p: usize,
}

impl VanillaState {
    pub fn random(rng: &mut SimRng, m: usize, p: usize, lambdas: Vec<Complex>) -> Result<Self> {
        let q = random_orthogonal(rng, m);
        let u = random_orthogonal(rng, m);
        let sel = random_permutation(rng, m * p)[..m].to_vec();
        let s = Self { q, u, lambdas, sel, p };
        s.params()?;
        Ok(s)
    }

    pub fn params(&self) -> Result<CoupledParams> {
        CoupledParams::unconstrained(self.q.clone(), self.u.clone(), self.lambdas.clone(), self.sel.clone(), self.p)
    }

    fn theta(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.q.data().iter().chain(self.u.data()).map(|z| z.re).collect();
        push_lambdas(&mut t, &self.lambdas);
        t
    }

    fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        let m = self.q.rows();
        Ok(Self {
            q: ComplexMatrix::from_real(m, m, &theta[..m * m])?,
            u: ComplexMatrix::from_real(m, m, &theta[m * m..2 * m * m])?,
            lambdas: lambdas_from(&theta[2 * m * m..]),
            ..self.clone()
        })
    }
}

fn expansion_ratio(state: &VanillaState, f_mode: FMode, eps: f64, rng: &mut SimRng) -> Result<f64> {
    let m = state.q.rows();
    let scale = eps / (2.0 * m as f64).sqrt();
    let eq = gaussian_matrix(rng, m, m, scale);
    let eu = gaussian_matrix(rng, m, m, scale);
    let (_, a1, b1) = realize(state.params()?, f_mode)?;
    let moved = VanillaState { q: &state.q + &eq, u: &state.u + &eu, ..state.clone() };
    let (_, a2, b2) = realize(moved.params()?, f_mode)?;
    let num = ((&a1 - &a2).frobenius_norm().powi(2) + (&b1 - &b2).frobenius_norm().powi(2)).sqrt();
    let den = (eq.frobenius_norm().powi(2) + eu.frobenius_norm().powi(2)).sqrt();
    Ok(num / den)
}

/// Direct reassignment `A ← 𝒜(Q, U, Λ)`, `B ← ℬ(Λ, U, S)` with unconstrained factors.
pub fn train_vanilla<L>(state0: &VanillaState, loss: &L, cfg: &TrainConfig) -> Result<TrainTrace>
where
    L: Fn(&Realized<'_>) -> f64 + Sync,
{
    cfg.validate()?;
    let mut state = state0.clone();
    let (params, a0, b0) = realize(state.params()?, cfg.f_mode)?;
    let initial = loss(&Realized { params: &params, a: &a0, b: &b0 });
    check_divergence(0, initial, initial)?;
    let (mut prev_a, mut prev_b) = (a0.clone(), b0.clone());
    let (mut run_a, mut run_b) = (a0, b0);
    let mm = state.q.rows() * state.q.rows();
    let mut records = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let (params, a_k, b_k) = realize(state.params()?, cfg.f_mode)?;
        let d_a = (&a_k - &prev_a).frobenius_norm();
        let d_b = (&b_k - &prev_b).frobenius_norm();
        let value = loss(&Realized { params: &params, a: &a_k, b: &b_k });
        check_divergence(k, value, initial)?;
        let theta = state.theta();
        let f = |t: &[f64]| match state.with_theta(t) {
            Ok(s) => eval(loss, s.params().and_then(|p| realize(p, cfg.f_mode))),
            Err(_) => f64::INFINITY,
        };
        let grad = fd_gradient(&f, &theta, cfg.fd_step)?;
        let grad_b = if cfg.probe_grad_b { grad_b_norm(loss, &params, &a_k, &b_k, cfg.fd_step)? } else { f64::NAN };
        let mut rng = rng_for_trial(cfg.seed, k as u64);
        records.push(TrainRecord {
            step: k,
            loss: value,
            d_a_norm: d_a,
            d_b_norm: d_b,
            step_a: 1.0,
            step_b: 1.0,
            grad_q_norm: norm(&grad[..mm]),
            grad_u_norm: norm(&grad[mm..2 * mm]),
            grad_b_norm: grad_b,
            scaled_grad_b: grad_b,
            expansion_ratio: expansion_ratio(&state, cfg.f_mode, cfg.probe_eps, &mut rng)?,
        });
        let lr = cfg.lr_at(k);
        let dir = step_direction(&grad, cfg.optimizer);
        let next: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t - lr * d).collect();
        state = state.with_theta(&next)?;
        run_a = a_k.clone();
        run_b = b_k.clone();
        prev_a = a_k;
        prev_b = b_k;
    }
    Ok(TrainTrace { records, a: run_a, b: run_b, final_params: state.params()? })
}

/// Mean squared error of a toy sequence model driven by phase-shifted
/// sinusoids: `x_{t+1} = A x_t + B u_t`, `y_t = Re(1ᵀx_t)/√n`, target
/// `0.5·sin(ωt + 0.4)`.
pub fn sinusoid_loss(horizon: usize, omega: f64) -> impl Fn(&Realized<'_>) -> f64 + Sync {
    move |r: &Realized<'_>| {
        let (n, m) = r.b.shape();
        let mut x = vec![Complex::new(0.0, 0.0); n];
        let mut err = 0.0;
        for t in 0..horizon {
            let u: Vec<Complex> = (0..m).map(|j| Complex::new((omega * t as f64 + 0.7 * j as f64).sin(), 0.0)).collect();
            let ax = r.a.matvec(&x);
            let bu = r.b.matvec(&u);
            for i in 0..n {
                x[i] = ax[i] + bu[i];
            }
            let y = x.iter().map(|z| z.re).sum::<f64>() / (n as f64).sqrt();
            let target = 0.5 * (omega * (t + 1) as f64 + 0.4).sin();
            err += (y - target).powi(2);
        }
        err / horizon as f64
    }
}
