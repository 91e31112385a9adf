//! Ready-made minimization problems, one per observability loss, with a
//! post-hoc rank check on the system each run ends at.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{cayley, loss_kernel_distinct, loss_thm3, loss_thm4, KernelVariant, Margins};
use crate::matcore::{Complex, ComplexMatrix};
use crate::observability::{
    loss_hautus_eigvec, loss_hautus_pencil, loss_obs_det, obs_report, LossValue, ObservabilityReport, DEFAULT_MARGIN,
};
use crate::optimize::{gd_run, GdConfig, GdResult, ParamVector};
use crate::permutation::{check_c_nonconstant, loss_permutation};
use crate::sampling::{
    disc_eigenvalues, gaussian_matrix, permutation_matrix, random_n_cycle, random_orthogonal, rng_from_seed, SimRng,
};
use crate::vandermonde::{c_tilde, loss_thm5, RowSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossName {
    ObsDet,
    Hautus,
    HautusEigvec,
    Permutation,
    Thm3,
    Thm4,
    Thm5,
    KernelDistinct,
}

impl LossName {
    pub const ALL: [LossName; 8] = [
        Self::ObsDet,
        Self::Hautus,
        Self::HautusEigvec,
        Self::Permutation,
        Self::Thm3,
        Self::Thm4,
        Self::Thm5,
        Self::KernelDistinct,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::ObsDet => "obs-det",
            Self::Hautus => "hautus",
            Self::HautusEigvec => "hautus-eigvec",
            Self::Permutation => "permutation",
            Self::Thm3 => "thm3",
            Self::Thm4 => "thm4",
            Self::Thm5 => "thm5",
            Self::KernelDistinct => "kernel-distinct",
        }
    }

    /// Descent settings that reach zero on the default problem sizes.
    pub fn default_gd(&self) -> GdConfig {
        match self {
            Self::Thm3 | Self::Thm4 => GdConfig { learning_rate: 1e-3, steps: 5000, ..Default::default() },
            Self::ObsDet => GdConfig { learning_rate: 0.1, steps: 5000, ..Default::default() },
            Self::Permutation => GdConfig { learning_rate: 2e-3, steps: 2000, fd_step: 1e-2, ..Default::default() },
            _ => GdConfig { learning_rate: 1e-2, steps: 5000, ..Default::default() },
        }
    }
}

impl fmt::Display for LossName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnforceConfig {
    pub loss: LossName,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "L")]
    pub big_l: usize,
    pub delta: f64,
    /// Empty means the default margin everywhere.
    pub margins: Vec<f64>,
    pub tol: f64,
    pub gd: GdConfig,
    /// Record `log det(𝒪ᴴ𝒪)` of the current system at every step.
    pub track_gram: bool,
}

impl EnforceConfig {
    pub fn new(loss: LossName, n: usize, m: usize) -> Self {
        Self {
            loss,
            n,
            m,
            big_l: 16,
            delta: 1.0,
            margins: Vec::new(),
            tol: 1e-10,
            gd: loss.default_gd(),
            track_gram: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.m > self.n {
            return Err(Error::InvalidArgument(format!("need n >= m >= 1, got n = {}, m = {}", self.n, self.m)));
        }
        if self.big_l < 2 {
            return Err(Error::InvalidArgument(format!("L must be at least 2, got {}", self.big_l)));
        }
        if !(self.delta > 0.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("delta and tol must be positive".into()));
        }
        if self.margins.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidArgument("margins must be positive".into()));
        }
        let allowed: &[usize] = match self.loss {
            LossName::Permutation => &[0],
            LossName::Thm3 | LossName::Thm4 => &[0, 1, 3],
            LossName::Thm5 => &[0, 1, 2],
            _ => &[0, 1],
        };
        if !allowed.contains(&self.margins.len()) {
            return Err(Error::InvalidArgument(format!(
                "{} takes {allowed:?} margins, got {}",
                self.loss,
                self.margins.len()
            )));
        }
        self.gd.validate()
    }

    fn single_margin(&self) -> Result<f64> {
        match self.margins.as_slice() {
            [] => Ok(DEFAULT_MARGIN),
            [m] => Ok(*m),
            ms => Err(Error::InvalidArgument(format!("{} takes one margin, got {}", self.loss, ms.len()))),
        }
    }

    fn pair_margins(&self) -> Result<(f64, f64)> {
        match self.margins.as_slice() {
            [] => Ok((DEFAULT_MARGIN, DEFAULT_MARGIN)),
            [m] => Ok((*m, *m)),
            [a, b] => Ok((*a, *b)),
            ms => Err(Error::InvalidArgument(format!("thm5 takes one or two margins, got {}", ms.len()))),
        }
    }
}

/// A loss over a flat parameter vector plus whatever stays fixed.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: EnforceConfig,
    pub layout: ParamVector,
    v: ComplexMatrix,
    lambdas: Vec<Complex>,
    c: ComplexMatrix,
}

/// Eigenvalues whose unit directions sum to roughly zero: conjugate-sign
/// pairs hugging the imaginary axis, plus a 120°-spaced triple when `n` is odd.
fn spread_eigenvalues(rng: &mut SimRng, n: usize) -> Vec<Complex> {
    let pairs = if n % 2 == 1 { n - 3 } else { n };
    let mut out: Vec<Complex> = (0..pairs)
        .map(|k| {
            let y: f64 = rng.random_range(0.3..3.0);
            Complex::new(rng.random_range(-0.05..0.05), if k % 2 == 0 { y } else { -y })
        })
        .collect();
    if n % 2 == 1 {
        let deg = std::f64::consts::PI / 180.0;
        out.push(Complex::from_polar(rng.random_range(0.3..3.0), 90.0 * deg));
        out.push(Complex::from_polar(0.3, 210.0 * deg));
        out.push(Complex::from_polar(rng.random_range(0.3..3.0), 330.0 * deg));
    }
    out
}

fn admissible_c(rng: &mut SimRng, m: usize, n: usize) -> ComplexMatrix {
    loop {
        let c = gaussian_matrix(rng, m, n, 1.0);
        if check_c_nonconstant(&c, 1e-6) {
            return c;
        }
    }
}

impl Problem {
    /// Samples the initial point and the fixed factors from `config.gd.seed`.
    pub fn sample(config: &EnforceConfig) -> Result<Self> {
        config.validate()?;
        let (n, m) = (config.n, config.m);
        let mut rng = rng_from_seed(config.gd.seed);
        let mut layout = ParamVector::new();
        let mut v = ComplexMatrix::identity(n);
        let mut lambdas = Vec::new();
        let mut c = ComplexMatrix::zeros(m, n);
        let scale = 1.0 / (n as f64).sqrt();
        match config.loss {
            LossName::ObsDet | LossName::Hautus => {
                layout.push_real("A", &gaussian_matrix(&mut rng, n, n, scale))?;
                layout.push_real("C", &gaussian_matrix(&mut rng, m, n, 0.3 * scale))?;
            }
            LossName::HautusEigvec => {
                v = random_orthogonal(&mut rng, n);
                lambdas = (0..n).map(|k| Complex::new(-0.5 - k as f64 / n as f64, 0.0)).collect();
                layout.push_real("C", &gaussian_matrix(&mut rng, m, n, 0.01))?;
            }
            LossName::Permutation => {
                c = admissible_c(&mut rng, m, n);
                let shift = permutation_matrix(&random_n_cycle(&mut rng, n));
                layout.push_real("A", &(&shift + &gaussian_matrix(&mut rng, n, n, 0.02)))?;
            }
            LossName::Thm3 | LossName::Thm4 => {
                v = random_orthogonal(&mut rng, n);
                c = gaussian_matrix(&mut rng, m, n, 1.0);
                layout.push_complex_vec("lambda", &spread_eigenvalues(&mut rng, n))?;
            }
            LossName::Thm5 => {
                v = random_orthogonal(&mut rng, n);
                layout.push_complex_vec("lambda", &disc_eigenvalues(&mut rng, n, 0.5, 1.0))?;
                layout.push_real("C", &gaussian_matrix(&mut rng, m, n, 0.01))?;
            }
            LossName::KernelDistinct => {
                v = random_orthogonal(&mut rng, n);
                lambdas = spread_eigenvalues(&mut rng, n);
                layout.push_real("C", &gaussian_matrix(&mut rng, m, n, 1.0))?;
            }
        }
        Ok(Self { config: config.clone(), layout, v, lambdas, c })
    }

    pub fn x0(&self) -> &[f64] {
        &self.layout.values
    }

    fn lambdas_at(&self, x: &[f64]) -> Result<Vec<Complex>> {
        match self.layout.slot("lambda") {
            Some(_) => self.layout.complex_vec_in(x, "lambda"),
            None => Ok(self.lambdas.clone()),
        }
    }

    fn c_at(&self, x: &[f64]) -> Result<ComplexMatrix> {
        match self.layout.slot("C") {
            Some(_) => self.layout.matrix_in(x, "C"),
            None => Ok(self.c.clone()),
        }
    }

    /// `(C, A)` at `x`. For `thm4` the state matrix is the bilinear `Ā`,
    /// which shares eigenvectors with `A`.
    pub fn system(&self, x: &[f64]) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let c = self.c_at(x)?;
        let a = match self.layout.slot("A") {
            Some(_) => self.layout.matrix_in(x, "A")?,
            None => {
                let mut lam = self.lambdas_at(x)?;
                if self.config.loss == LossName::Thm4 {
                    lam = lam.iter().map(|&l| cayley(l, self.config.delta)).collect();
                }
                self.v.matmul(&ComplexMatrix::from_diag(&lam)).matmul(&self.v.transpose())
            }
        };
        Ok((c, a))
    }

    pub fn loss_value(&self, x: &[f64]) -> Result<LossValue> {
        let cfg = &self.config;
        match cfg.loss {
            LossName::ObsDet => {
                let (c, a) = self.system(x)?;
                loss_obs_det(&c, &a, cfg.single_margin()?)
            }
            LossName::Hautus => {
                let (c, a) = self.system(x)?;
                loss_hautus_pencil(&c, &a, cfg.single_margin()?)
            }
            LossName::HautusEigvec => loss_hautus_eigvec(&self.c_at(x)?, &self.v, cfg.single_margin()?),
            LossName::Permutation => loss_permutation(&self.layout.matrix_in(x, "A")?, true),
            LossName::Thm3 => loss_thm3(&self.lambdas_at(x)?, cfg.delta, cfg.big_l, Margins::from_slice(&cfg.margins)?),
            LossName::Thm4 => loss_thm4(&self.lambdas_at(x)?, cfg.delta, cfg.big_l, Margins::from_slice(&cfg.margins)?),
            LossName::Thm5 => {
                let (gap, entry) = cfg.pair_margins()?;
                loss_thm5(&self.lambdas_at(x)?, &c_tilde(&self.c_at(x)?, &self.v)?, RowSelection::All, gap, entry)
            }
            LossName::KernelDistinct => Ok(loss_kernel_distinct(
                KernelVariant::Thm4,
                &self.c_at(x)?,
                &self.v,
                &self.lambdas,
                cfg.delta,
                cfg.big_l,
                cfg.single_margin()?,
            )?
            .loss),
        }
    }

    /// Loss total, with `+inf` wherever the loss cannot be evaluated.
    pub fn total(&self, x: &[f64]) -> f64 {
        self.loss_value(x).map(|v| v.total).unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnforceOutcome {
    pub loss: LossName,
    pub result: GdResult,
    pub final_loss: LossValue,
    pub c: ComplexMatrix,
    pub a: ComplexMatrix,
    pub report: ObservabilityReport,
    /// Per-step `log det(𝒪ᴴ𝒪)` when tracked, aligned with `result.trace`.
    pub gram_logdets: Vec<f64>,
}

impl EnforceOutcome {
    /// Whether a zero loss came with an observable system. `None` when the
    /// loss never reached zero.
    pub fn zero_implies_observable(&self) -> Option<bool> {
        self.final_loss.is_zero().then_some(self.report.observable)
    }
}

pub fn run_problem(problem: &Problem) -> Result<EnforceOutcome> {
    let cfg = &problem.config;
    let loss = |x: &[f64]| problem.total(x);
    let mut gram_logdets = Vec::new();
    let result = gd_run(&loss, problem.x0(), &cfg.gd, |_, x, _| {
        if cfg.track_gram {
            let ld = problem
                .system(x)
                .and_then(|(c, a)| obs_report(&c, &a, cfg.tol))
                .map(|r| r.gram_logdet)
                .unwrap_or(f64::NAN);
            gram_logdets.push(ld);
        }
    })?;
    let final_loss = problem.loss_value(&result.x)?;
    let (c, a) = problem.system(&result.x)?;
    let report = obs_report(&c, &a, cfg.tol)?;
    Ok(EnforceOutcome { loss: cfg.loss, result, final_loss, c, a, report, gram_logdets })
}

/// Samples the problem described by `config`, minimizes it, and checks the result.
pub fn enforce(config: &EnforceConfig) -> Result<EnforceOutcome> {
    run_problem(&Problem::sample(config)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for l in LossName::ALL {
            assert_eq!(l.name().parse::<LossName>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{}\"", l.name()));
        }
        assert!("thm9".parse::<LossName>().is_err());
    }

    #[test]
    fn every_problem_evaluates_at_its_start() {
        for l in LossName::ALL {
            let mut cfg = EnforceConfig::new(l, 5, 3);
            cfg.big_l = 6;
            let p = Problem::sample(&cfg).unwrap();
            assert!(p.total(p.x0()).is_finite(), "{l}");
            let (c, a) = p.system(p.x0()).unwrap();
            assert_eq!((c.shape(), a.shape()), ((3, 5), (5, 5)));
        }
    }

    #[test]
    fn margin_counts_are_checked() {
        let mut cfg = EnforceConfig::new(LossName::ObsDet, 4, 2);
        cfg.margins = vec![0.1, 0.2];
        assert!(Problem::sample(&cfg).is_err());
        cfg.loss = LossName::Thm5;
        assert!(Problem::sample(&cfg).is_ok());
        cfg.margins = vec![-1.0];
        assert!(Problem::sample(&cfg).is_err());
    }

    #[test]
    fn thm5_reaches_zero_and_is_observable() {
        let mut cfg = EnforceConfig::new(LossName::Thm5, 8, 5);
        cfg.gd.seed = 3;
        let out = enforce(&cfg).unwrap();
        assert_eq!(out.zero_implies_observable(), Some(true), "final loss {}", out.final_loss.total);
    }

    #[test]
    fn hautus_eigvec_zero_is_observable() {
        let out = enforce(&EnforceConfig::new(LossName::HautusEigvec, 5, 2)).unwrap();
        assert_eq!(out.zero_implies_observable(), Some(true));
    }

    #[test]
    fn gram_tracking_follows_trace() {
        let mut cfg = EnforceConfig::new(LossName::Thm5, 4, 2);
        cfg.track_gram = true;
        let out = enforce(&cfg).unwrap();
        assert_eq!(out.gram_logdets.len(), out.result.trace.len());
    }
}
