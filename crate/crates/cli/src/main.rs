use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ssmobs::coupling::{
    lipschitz_lower_bound, robbins_monro_diagnostic, sinusoid_loss, train_coupled, train_vanilla, CoupledState, FMode,
    Optimizer, Realized, TrainConfig, TrainTrace, VanillaState,
};
use ssmobs::enforce::{run_problem, EnforceConfig, LossName, Problem};
use ssmobs::fourier::experiments::{
    eig_trajectory, experiment_kernel_distinctness, experiment_rowspace_rank, pick_elements, EigSampler, KernelMode,
};
use ssmobs::io::{read_system, write_csv, write_json};
use ssmobs::observability::obs_report;
use ssmobs::sampling::{disc_eigenvalues, gaussian_matrix, rng_from_seed};
use ssmobs::{Complex, Error};

const EXIT_ERROR: u8 = 1;
const EXIT_NEGATIVE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "ssmobs", version, about = "Observability checks, losses and experiments for state-space models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank test on a system JSON file; exit 0 observable, 2 not observable.
    Check {
        system: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Minimize one observability loss and check the resulting system.
    Enforce(EnforceArgs),
    /// Kernel and rank experiments written as tidy CSV.
    Experiment(ExperimentArgs),
    /// Coupled or vanilla training with step-size diagnostics.
    Train(TrainArgs),
}

#[derive(Args)]
struct EnforceArgs {
    #[arg(value_parser = parse_loss)]
    loss: LossName,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long = "L", default_value_t = 16)]
    big_l: usize,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Repeat to set per-term margins.
    #[arg(long)]
    margin: Vec<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentName {
    KernelDistinct,
    RowspaceRank,
    EigTrajectory,
    PsiVsPower,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Psi,
    Power,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    /// Moduli log-uniform in [1e-5, 1e-4].
    Decaying,
    /// Left half-plane, moduli in [0.05, 0.2].
    Tenth,
    /// Moduli uniform in [0.5, 1].
    Disc,
    /// 0.5 times a standard normal, reflected into the upper half-plane.
    UpperHalf,
}

impl SamplerArg {
    fn sampler(self) -> EigSampler {
        match self {
            Self::Decaying => EigSampler::decaying(),
            Self::Tenth => EigSampler::tenth(),
            Self::Disc => EigSampler::Disc { rho_lo: 0.5, rho_hi: 1.0 },
            Self::UpperHalf => EigSampler::UpperHalf { scale: 0.5 },
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Decaying => "decaying",
            Self::Tenth => "tenth",
            Self::Disc => "disc",
            Self::UpperHalf => "upper-half",
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    name: ExperimentName,
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long = "L", default_value_t = 64)]
    big_l: usize,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    /// Diagonal elements traced by eig-trajectory.
    #[arg(long, default_value_t = 3)]
    elements: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainMode {
    Coupled,
    Vanilla,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    /// Squared distance of A to a fixed random target.
    Target,
    /// Sinusoid regression with a linear recurrence.
    Sinusoid,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EigInit {
    /// Moduli uniform in [0.4, 0.9].
    Disc,
    /// λ = 1, 2, …, n.
    Linear,
}

#[derive(Args)]
struct TrainArgs {
    mode: TrainMode,
    /// Config JSON; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "target")]
    task: Task,
    #[arg(long, value_enum, default_value = "disc")]
    eigs: EigInit,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// The file form of a training run's settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct TrainFileConfig {
    n: Option<usize>,
    m: usize,
    p: usize,
    q: f64,
    steps: usize,
    lr: f64,
    f_mode: FMode,
    sel: Option<Vec<usize>>,
    seed: u64,
    literal_update: bool,
}

impl Default for TrainFileConfig {
    fn default() -> Self {
        Self { n: None, m: 3, p: 2, q: 0.75, steps: 200, lr: 0.05, f_mode: FMode::Modulus, sel: None, seed: 0, literal_update: true }
    }
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    config: Value,
    seed: u64,
    version: &'static str,
    outputs: Vec<PathBuf>,
    wall_clock_secs: f64,
}

struct Outcome {
    code: u8,
    summary: Value,
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Lib(e) => write!(f, "{e}"),
            Self::Usage(s) => f.write_str(s),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn parse_loss(s: &str) -> std::result::Result<LossName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Lib(Error::Io(format!("{}: {e}", dir.display()))))
}

fn finish(command: &str, config: Value, seed: u64, out: &Path, mut outputs: Vec<PathBuf>, start: Instant) -> CliResult<()> {
    let path = out.join("manifest.json");
    outputs.push(path.clone());
    let manifest = RunManifest {
        command: command.into(),
        config,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        outputs,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&path, &manifest)?;
    Ok(())
}

fn cmd_check(system: &Path, tol: f64) -> CliResult<Outcome> {
    let file = read_system(system)?;
    let report = obs_report(&file.c, &file.a, tol)?;
    let code = if report.observable { 0 } else { EXIT_NEGATIVE };
    Ok(Outcome { code, summary: serde_json::to_value(&report).expect("report serializes") })
}

fn cmd_enforce(args: &EnforceArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    let mut cfg = EnforceConfig::new(args.loss, args.n, args.m);
    cfg.big_l = args.big_l;
    cfg.delta = args.delta;
    cfg.margins = args.margin.clone();
    cfg.tol = args.tol;
    cfg.gd.seed = args.seed;
    cfg.gd.clip = args.clip;
    if let Some(s) = args.steps {
        cfg.gd.steps = s;
    }
    if let Some(lr) = args.lr {
        cfg.gd.learning_rate = lr;
    }
    if let Some(h) = args.fd_step {
        cfg.gd.fd_step = h;
    }
    let problem = Problem::sample(&cfg)?;
    let outcome = run_problem(&problem)?;
    prepare_out(&args.out)?;
    let trace_path = args.out.join("trace.csv");
    write_csv(&trace_path, &outcome.result.trace, &["step", "loss", "grad_norm"])?;
    let params_path = args.out.join("params.json");
    write_json(
        &params_path,
        &json!({
            "loss": args.loss,
            "x": outcome.result.x,
            "manifest": problem.layout.manifest,
            "C": outcome.c,
            "A": outcome.a,
        }),
    )?;
    let summary = json!({
        "loss": args.loss,
        "steps_run": outcome.result.trace.len(),
        "final_loss": outcome.final_loss,
        "reached_zero": outcome.final_loss.is_zero(),
        "report": outcome.report,
        "zero_implies_observable": outcome.zero_implies_observable(),
    });
    let report_path = args.out.join("report.json");
    write_json(&report_path, &summary)?;
    let config = serde_json::to_value(&cfg).expect("config serializes");
    finish("enforce", config, args.seed, &args.out, vec![trace_path, params_path, report_path], start)?;
    let code = if outcome.report.observable { 0 } else { EXIT_NEGATIVE };
    Ok(Outcome { code, summary })
}

#[derive(Serialize)]
struct CountRow<'a> {
    trial: usize,
    sampler: &'a str,
    mode: &'a str,
    n: usize,
    m: usize,
    #[serde(rename = "L")]
    big_l: usize,
    delta: f64,
    distinct_pairs: usize,
    seed: u64,
}

#[derive(Serialize)]
struct RankRow<'a> {
    trial: usize,
    sampler: &'a str,
    mode: &'a str,
    n: usize,
    m: usize,
    #[serde(rename = "L")]
    big_l: usize,
    delta: f64,
    rank: usize,
    seed: u64,
}

#[derive(Serialize)]
struct TrajectoryRow {
    mode: String,
    element: usize,
    index: usize,
    re: f64,
    im: f64,
    n: usize,
    #[serde(rename = "L")]
    big_l: usize,
    delta: f64,
    seed: u64,
}

fn median(xs: &[usize]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_unstable();
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k] as f64
    } else {
        (v[k - 1] + v[k]) as f64 / 2.0
    }
}

fn modes(arg: ModeArg) -> Vec<KernelMode> {
    match arg {
        ModeArg::Psi => vec![KernelMode::PsiJ],
        ModeArg::Power => vec![KernelMode::LambdaPow],
        ModeArg::Both => vec![KernelMode::PsiJ, KernelMode::LambdaPow],
    }
}

fn count_rows(
    a: &ExperimentArgs,
    sampler: SamplerArg,
    kernel_modes: &[KernelMode],
    delta: f64,
    rows: &mut Vec<CountRow<'static>>,
    summary: &mut serde_json::Map<String, Value>,
) -> CliResult<()> {
    for &mode in kernel_modes {
        let counts =
            experiment_kernel_distinctness(a.n, a.m, a.trials, mode, sampler.sampler(), delta, a.big_l, a.seed)?;
        summary.insert(format!("{}/{}_median", sampler.name(), mode.name()), json!(median(&counts)));
        rows.extend(counts.iter().enumerate().map(|(trial, &c)| CountRow {
            trial,
            sampler: sampler.name(),
            mode: mode.name(),
            n: a.n,
            m: a.m,
            big_l: a.big_l,
            delta,
            distinct_pairs: c,
            seed: a.seed,
        }));
    }
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    prepare_out(&a.out)?;
    let mut summary = serde_json::Map::new();
    let max_pairs = a.big_l.saturating_sub(1) * a.big_l.saturating_sub(2) / 2;
    let (file, delta) = match a.name {
        ExperimentName::KernelDistinct => {
            let sampler = a.sampler.unwrap_or(SamplerArg::Decaying);
            let delta = a.delta.unwrap_or(1.0);
            let mut rows = Vec::new();
            count_rows(a, sampler, &modes(a.mode), delta, &mut rows, &mut summary)?;
            summary.insert("max_pairs".into(), json!(max_pairs));
            let path = a.out.join("kernel_distinct.csv");
            write_csv(&path, &rows, &["trial", "sampler", "mode", "n", "m", "L", "delta", "distinct_pairs", "seed"])?;
            (path, delta)
        }
        ExperimentName::PsiVsPower => {
            let delta = a.delta.unwrap_or(1.0);
            let samplers = match a.sampler {
                Some(s) => vec![s],
                None => vec![SamplerArg::Decaying, SamplerArg::Disc, SamplerArg::UpperHalf, SamplerArg::Tenth],
            };
            let mut rows = Vec::new();
            for s in samplers {
                count_rows(a, s, &modes(ModeArg::Both), delta, &mut rows, &mut summary)?;
            }
            summary.insert("max_pairs".into(), json!(max_pairs));
            let path = a.out.join("psi_vs_power.csv");
            write_csv(&path, &rows, &["trial", "sampler", "mode", "n", "m", "L", "delta", "distinct_pairs", "seed"])?;
            (path, delta)
        }
        ExperimentName::RowspaceRank => {
            let sampler = a.sampler.unwrap_or(SamplerArg::Tenth);
            let delta = a.delta.unwrap_or(0.3);
            let ranks = experiment_rowspace_rank(a.n, a.m, a.trials, sampler.sampler(), a.tol, delta, a.big_l, a.seed)?;
            summary.insert("full_rank_trials".into(), json!(ranks.iter().filter(|&&r| r == a.n).count()));
            summary.insert("trials".into(), json!(a.trials));
            let rows: Vec<RankRow> = ranks
                .iter()
                .enumerate()
                .map(|(trial, &rank)| RankRow {
                    trial,
                    sampler: sampler.name(),
                    mode: KernelMode::PsiJ.name(),
                    n: a.n,
                    m: a.m,
                    big_l: a.big_l,
                    delta,
                    rank,
                    seed: a.seed,
                })
                .collect();
            let path = a.out.join("rowspace_rank.csv");
            write_csv(&path, &rows, &["trial", "sampler", "mode", "n", "m", "L", "delta", "rank", "seed"])?;
            (path, delta)
        }
        ExperimentName::EigTrajectory => {
            let sampler = a.sampler.unwrap_or(SamplerArg::Tenth);
            let delta = a.delta.unwrap_or(1.0);
            let mut rng = rng_from_seed(a.seed);
            let lambdas = sampler.sampler().sample(&mut rng, a.n);
            let elements = pick_elements(&mut rng, a.n, a.elements);
            let rows: Vec<TrajectoryRow> = eig_trajectory(&lambdas, &elements, delta, a.big_l)?
                .into_iter()
                .map(|p| TrajectoryRow {
                    mode: p.mode,
                    element: p.element,
                    index: p.index,
                    re: p.re,
                    im: p.im,
                    n: a.n,
                    big_l: a.big_l,
                    delta,
                    seed: a.seed,
                })
                .collect();
            summary.insert("elements".into(), json!(elements));
            summary.insert("points".into(), json!(rows.len()));
            let path = a.out.join("eig_trajectory.csv");
            write_csv(&path, &rows, &["mode", "element", "index", "re", "im", "n", "L", "delta", "seed"])?;
            (path, delta)
        }
    };
    let name = a.name.to_possible_value().expect("named variant").get_name().to_string();
    summary.insert("experiment".into(), json!(name));
    summary.insert("csv".into(), json!(file));
    let config = json!({
        "name": name, "n": a.n, "m": a.m, "L": a.big_l, "delta": delta, "trials": a.trials, "tol": a.tol,
        "sampler": a.sampler.map(SamplerArg::name), "elements": a.elements, "seed": a.seed,
    });
    finish("experiment", config, a.seed, &a.out, vec![file], start)?;
    Ok(Outcome { code: 0, summary: Value::Object(summary) })
}

fn train_config(a: &TrainArgs) -> CliResult<TrainFileConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Lib(Error::Io(format!("{}: {e}", path.display()))))?;
            serde_json::from_str(&text).map_err(|e| CliError::Lib(Error::Parse(e.to_string())))?
        }
        None => TrainFileConfig::default(),
    };
    if let Some(v) = a.m {
        cfg.m = v;
    }
    if let Some(v) = a.p {
        cfg.p = v;
    }
    if let Some(v) = a.q {
        cfg.q = v;
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if cfg.m == 0 || cfg.p == 0 {
        return Err(CliError::Usage("m and p must be positive".into()));
    }
    let n = cfg.m * cfg.p;
    if cfg.n.is_some_and(|v| v != n) {
        return Err(CliError::Usage(format!("n must equal m·p = {n}")));
    }
    cfg.n = Some(n);
    Ok(cfg)
}

fn median_f64(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = xs.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

fn cmd_train(a: &TrainArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    let mut fc = train_config(a)?;
    let (m, p) = (fc.m, fc.p);
    let n = m * p;
    let mut rng = rng_from_seed(fc.seed);
    let lambdas: Vec<Complex> = match a.eigs {
        EigInit::Disc => disc_eigenvalues(&mut rng, n, 0.4, 0.9),
        EigInit::Linear => (1..=n).map(|k| Complex::new(k as f64, 0.0)).collect(),
    };
    let target = gaussian_matrix(&mut rng, n, n, 0.5);
    let sinusoid = sinusoid_loss(24, 0.3);
    let loss = |r: &Realized<'_>| match a.task {
        Task::Target => (r.a - &target).frobenius_norm().powi(2),
        Task::Sinusoid => sinusoid(r),
    };
    let cfg = TrainConfig {
        steps: fc.steps,
        learning_rate: fc.lr,
        lr_decay: if a.mode == TrainMode::Coupled { fc.q } else { 0.0 },
        optimizer: if a.mode == TrainMode::Coupled { Optimizer::Normalized } else { Optimizer::Plain },
        q_exponent: fc.q,
        f_mode: fc.f_mode,
        literal_update: fc.literal_update,
        probe_grad_b: true,
        seed: fc.seed,
        ..Default::default()
    };
    let trace: TrainTrace = match a.mode {
        TrainMode::Coupled => {
            let mut state = CoupledState::random(&mut rng, m, p, lambdas.clone())?;
            if let Some(sel) = &fc.sel {
                state.sel = sel.clone();
            }
            train_coupled(&state, &loss, &cfg)?
        }
        TrainMode::Vanilla => {
            let mut state = VanillaState::random(&mut rng, m, p, lambdas.clone())?;
            if let Some(sel) = &fc.sel {
                state.sel = sel.clone();
            }
            train_vanilla(&state, &loss, &cfg)?
        }
    };
    fc.sel = Some(trace.final_params.sel.clone());
    prepare_out(&a.out)?;
    let trace_path = a.out.join("trace.csv");
    write_csv(
        &trace_path,
        &trace.records,
        &[
            "step", "loss", "dA_norm", "dB_norm", "stepA", "stepB", "gradQ_norm", "gradU_norm", "gradB_norm",
            "scaled_gradB", "expansion_ratio",
        ],
    )?;
    let d_a = trace.d_a_norms();
    let robbins_monro = (d_a.len() >= 3).then(|| robbins_monro_diagnostic(&d_a[1..], fc.q));
    let reals: Vec<f64> = lambdas.iter().map(|l| l.re).collect();
    let lipschitz = if lambdas.iter().all(|l| l.im == 0.0) { lipschitz_lower_bound(&reals).ok() } else { None };
    let expansion = median_f64(trace.records.iter().map(|r| r.expansion_ratio));
    let summary = json!({
        "mode": if a.mode == TrainMode::Coupled { "coupled" } else { "vanilla" },
        "steps_run": trace.records.len(),
        "final_loss": trace.records.last().map(|r| r.loss),
        "robbins_monro": robbins_monro,
        "a_satisfied": robbins_monro.as_ref().map(|r| r.a_satisfied()),
        "b_satisfied": robbins_monro.as_ref().map(|r| r.b_satisfied()),
        "lipschitz_lower_bound": lipschitz,
        "expansion_ratio_median": expansion,
        "expansion_flagged": expansion.map(|e| e > 1.0),
        "scaled_gradB_median": median_f64(trace.records.iter().map(|r| r.scaled_grad_b)),
    });
    let diag_path = a.out.join("diagnostic.json");
    write_json(&diag_path, &summary)?;
    let config_path = a.out.join("config.json");
    write_json(&config_path, &fc)?;
    let value_name = |v: Option<clap::builder::PossibleValue>| v.map(|p| p.get_name().to_string());
    let config = json!({
        "train": fc,
        "mode": summary["mode"],
        "task": value_name(a.task.to_possible_value()),
        "eigs": value_name(a.eigs.to_possible_value()),
    });
    finish("train", config, fc.seed, &a.out, vec![trace_path, diag_path, config_path], start)?;
    Ok(Outcome { code: 0, summary })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Check { system, tol } => cmd_check(system, *tol),
        Command::Enforce(a) => cmd_enforce(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Train(a) => cmd_train(a),
    };
    match result {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("summary serializes"));
            ExitCode::from(out.code)
        }
        Err(CliError::Lib(e @ Error::DivergenceDetected { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
