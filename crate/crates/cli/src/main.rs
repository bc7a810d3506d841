use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ddsr::evaluation::{self, MatchedErrors, NormBasis, OperatorNormReport};
use ddsr::experiments::{self, Algorithm, ExperimentConfig, ExperimentKind, SolverSettings, TrialSeeds};
use ddsr::measurement::{self, build_g, random_sinc_identifier};
use ddsr::model::{random_channel, random_channel_min_sep, random_identifier, SeparationMetric};
use ddsr::{ChannelSpec, IdentifierPoly, ProblemDims, SampleVector};

#[derive(Parser)]
#[command(name = "ddsr", version, about = "Delay-Doppler channel estimation from identifier samples")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a channel and identifier and write the samples.
    Simulate(SimulateArgs),
    /// Estimate a channel from samples.
    Recover(RecoverArgs),
    /// Compare an estimate with the true channel.
    Evaluate(EvaluateArgs),
    /// Run a Monte Carlo study and write CSV/JSON reports.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with a simulation config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long, value_enum)]
    alg: Alg,
    /// Samples JSON as written by `simulate`.
    #[arg(long)]
    samples: PathBuf,
    /// Identifier JSON as written by `simulate`.
    #[arg(long)]
    identifier: PathBuf,
    /// JSON solver settings; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Known number of features. Without it the solvers stop on the residual.
    #[arg(long)]
    features: Option<usize>,
    /// Noise level of the data in dB, used for lambda and the residual stop.
    #[arg(long, allow_hyphen_values = true)]
    noise_db: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    truth: PathBuf,
    /// Channel JSON, or a recovery JSON with a `channel` field.
    #[arg(long)]
    estimate: PathBuf,
    /// Probe basis of the operator norm.
    #[arg(long, value_enum, default_value_t = Basis::Trig)]
    basis: Basis,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    /// Midpoint nodes (default 8 L1).
    #[arg(long)]
    points: Option<usize>,
    /// Also write `evaluation.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// JSON config merged over the defaults of the kind.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alg {
    Omp,
    Refine,
    Adcg,
}

impl From<Alg> for Algorithm {
    fn from(a: Alg) -> Self {
        match a {
            Alg::Omp => Algorithm::Omp,
            Alg::Refine => Algorithm::Refine,
            Alg::Adcg => Algorithm::Adcg,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Basis {
    Trig,
    Sinc,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Table1,
    NoiseSweep,
    PhaseTransition,
    MinSep,
    ModelMismatch,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Table1 => ExperimentKind::Table1,
            Kind::NoiseSweep => ExperimentKind::NoiseSweep,
            Kind::PhaseTransition => ExperimentKind::PhaseTransition,
            Kind::MinSep => ExperimentKind::MinSep,
            Kind::ModelMismatch => ExperimentKind::ModelMismatch,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateConfig {
    dims: ProblemDims,
    features: usize,
    /// `null` is noiseless.
    noise_db: Option<f64>,
    separation: Option<f64>,
    separation_metric: SeparationMetric,
    identifier: Basis,
    sinc_replicas: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            dims: ProblemDims::new(1.0, 101.0, 50, 50).expect("valid dims"),
            features: 10,
            noise_db: Some(-10.0),
            separation: None,
            separation_metric: SeparationMetric::default(),
            identifier: Basis::Trig,
            sinc_replicas: 1,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg: SimulateConfig = match &args.config {
        Some(p) => serde_json::from_str(&read(p)?).context("parsing simulation config")?,
        None => SimulateConfig::default(),
    };
    cfg.dims.validate()?;
    let seeds = TrialSeeds::new(args.seed, 0);
    let dims = cfg.dims;
    let truth = match cfg.separation {
        Some(delta) => random_channel_min_sep(&dims, cfg.features, delta, cfg.separation_metric, seeds.channel)?,
        None => random_channel(&dims, cfg.features, seeds.channel),
    };
    let (clean, identifier) = match cfg.identifier {
        Basis::Trig => {
            let w = random_identifier(&dims, seeds.identifier);
            (measurement::forward_atoms(&truth, &build_g(&w))?, w)
        }
        Basis::Sinc => {
            let s = random_sinc_identifier(&dims, cfg.sinc_replicas, seeds.identifier)?;
            (measurement::forward_sinc(&truth, &s)?, s.matched_trig())
        }
    };
    let y = measurement::add_noise(&clean, cfg.noise_db.unwrap_or(f64::NEG_INFINITY), seeds.noise)?;
    for (name, json) in [
        ("channel.json", truth.to_json()?),
        ("identifier.json", identifier.to_json()?),
        ("samples.json", y.to_json()?),
        ("simulation.json", serde_json::to_string_pretty(&cfg)?),
    ] {
        let p = write(&args.out, name, &json)?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn recover(args: RecoverArgs) -> Result<()> {
    let y = SampleVector::from_json(&read(&args.samples)?).context("parsing samples")?;
    let w = IdentifierPoly::from_json(&read(&args.identifier)?).context("parsing identifier")?;
    if y.dims() != w.dims() {
        bail!("samples and identifier have different dimensions");
    }
    let mut settings: SolverSettings = match &args.config {
        Some(p) => serde_json::from_str(&read(p)?).context("parsing solver settings")?,
        None => SolverSettings::default(),
    };
    settings.sparsity_known = args.features.is_some();
    settings.refine.validate()?;
    settings.adcg.validate()?;
    let plan = settings.plan(&y, args.features.unwrap_or(0), args.noise_db);
    let g = build_g(&w);
    let rec = experiments::recover(args.alg.into(), &y, &g, &plan)?;
    eprintln!(
        "recovered {} features, residual {:.3e}, stop {:?}",
        rec.channel.len(),
        rec.residual_norm,
        rec.stop
    );
    write(&args.out, "estimate.json", &rec.channel.to_json()?)?;
    write(&args.out, "recovery.json", &serde_json::to_string_pretty(&rec)?)?;
    Ok(())
}

#[derive(Serialize)]
struct Evaluation {
    matching: MatchedErrors,
    operator_norm: OperatorNormReport,
    success: bool,
}

fn load_estimate(s: &str) -> Result<ChannelSpec> {
    let v: serde_json::Value = serde_json::from_str(s)?;
    let v = match v.get("channel") {
        Some(c) => c.clone(),
        None => v,
    };
    Ok(ChannelSpec::from_json(&v.to_string())?)
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let truth = ChannelSpec::from_json(&read(&args.truth)?).context("parsing true channel")?;
    let est = load_estimate(&read(&args.estimate)?).context("parsing estimate")?;
    if truth.dims() != est.dims() {
        bail!("channels have different dimensions");
    }
    let basis = match args.basis {
        Basis::Trig => NormBasis::Trig,
        Basis::Sinc => NormBasis::Sinc { replicas: args.replicas },
    };
    if args.replicas == 0 {
        bail!("replicas must be at least 1");
    }
    let points = args.points.unwrap_or_else(|| evaluation::default_points(truth.dims()));
    if points == 0 {
        bail!("points must be at least 1");
    }
    let op = evaluation::operator_norm_err(&truth, &est, basis, points);
    let report = Evaluation {
        matching: evaluation::match_features(&truth, &est),
        success: evaluation::classify_success(&op, evaluation::SUCCESS_THRESHOLD_DB),
        operator_norm: op,
    };
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(dir) = &args.out {
        write(dir, "evaluation.json", &json)?;
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let kind: ExperimentKind = args.kind.into();
    let mut cfg = match &args.config {
        Some(p) => {
            let cfg = ExperimentConfig::from_json(&read(p)?).context("parsing experiment config")?;
            if cfg.kind != kind {
                bail!("config is for {}, but --kind is {}", cfg.kind.name(), kind.name());
            }
            cfg
        }
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    let quiet = args.quiet;
    let progress = move |done: usize, total: usize| {
        if !quiet {
            eprint!("\r{}: {done}/{total} trials", kind.name());
            if done == total {
                eprintln!();
            }
        }
    };
    let report = experiments::run_experiment_with(&cfg, &progress)?;
    for a in &report.aggregates {
        eprintln!(
            "cell {:>3} {:<7} mean op err {:>8.2} dB  success {:.2}  tau {:.2e}  nu {:.2e}  eta {:.2e}",
            a.cell,
            format!("{:?}", a.algorithm).to_lowercase(),
            a.mean_op_err_db,
            a.success_rate,
            a.mean_tau_err,
            a.mean_nu_err,
            a.mean_eta_err
        );
    }
    for p in report.write(&args.out)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Recover(a) => recover(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
