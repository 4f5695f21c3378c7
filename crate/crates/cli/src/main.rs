use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;

use recsparse::analysis::{
    check_corollary3, check_corollary4, check_theorem1, check_theorem2, check_theorem3, estimate_zeta, ConditionReport,
    ConstantProvider, EstimateMode, FixedConstants, MatrixConstants, ZetaSpec,
};
use recsparse::harness::{figure3_preset, run_experiment, summary_text, write_outputs, ExperimentSpec};
use recsparse::recovery::Algorithm;
use recsparse::sensing::{gaussian_matrix, load_matrix_csv, ric_exhaustive, ric_sampled, roc, save_matrix_csv, SweepMode};
use recsparse::signal_model::Generator;

/// Error caused by invalid arguments or configuration (exit code 1).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

macro_rules! usage {
    ($($t:tt)*) => { return Err(Usage(format!($($t)*)).into()) };
}

#[derive(Parser)]
#[command(name = "recsparse", version, about = "Recursive sparse recovery experiments and stability checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment from a config file and flag overrides.
    Simulate(SimulateArgs),
    /// Evaluate the sufficient conditions of a stability result.
    Check(CheckArgs),
    /// Estimate a restricted isometry or orthogonality constant.
    Ric(RicArgs),
    /// Estimate the spread factor of the add-step LS error.
    Zeta(ZetaArgs),
    /// Run one of the four built-in simulation presets.
    Figure3(Figure3Args),
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// TOML experiment file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    s0: Option<usize>,
    #[arg(long)]
    sa: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// gen1 or gen2.
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated list, e.g. `mod_cs,ls_cs`.
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_add: Option<f64>,
    #[arg(long)]
    alpha_del: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trial_offset: Option<usize>,
}

#[derive(Args, Serialize)]
struct Figure3Args {
    /// a, b, c or d.
    #[arg(long)]
    panel: char,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Where RIC/ROC values come from: a matrix file, a generated Gaussian
/// matrix, or fixed values.
#[derive(Args, Serialize)]
struct MatrixArgs {
    /// Matrix CSV as written by `ric --save-matrix`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Rows of the generated matrix.
    #[arg(long, default_value_t = 65)]
    n: usize,
    /// Columns of the generated matrix.
    #[arg(long, default_value_t = 200)]
    m: usize,
    /// Master seed of the generated matrix (same matrix as `simulate --seed`).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest number of subsets enumerated before sampling instead.
    #[arg(long, default_value_t = 2_000_000)]
    budget: u64,
    /// Subsets drawn by a sampled (lower-bound) estimate.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    sample_seed: u64,
}

#[derive(Args, Serialize)]
struct CheckArgs {
    /// 1, 2, 3, c3 or c4.
    #[arg(long)]
    theorem: String,
    #[arg(long)]
    s0: usize,
    #[arg(long)]
    sa: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha_add: f64,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    d0: Option<usize>,
    /// Allowed false additions per step.
    #[arg(long)]
    f: Option<usize>,
    #[arg(long)]
    zeta: Option<f64>,
    /// Largest per-step false-addition count seen in pilot runs.
    #[arg(long)]
    max_false_adds: Option<usize>,
    /// The t = 0 support estimate is the oracle start.
    #[arg(long)]
    oracle_start: bool,
    /// Use this value for every delta instead of a matrix.
    #[arg(long, requires = "theta")]
    delta: Option<f64>,
    /// Use this value for every theta instead of a matrix.
    #[arg(long, requires = "delta")]
    theta: Option<f64>,
    #[command(flatten)]
    source: MatrixArgs,
    #[arg(long)]
    csv: bool,
    /// Also write the report and a manifest to this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RicArgs {
    /// Order of delta_s.
    #[arg(long, conflicts_with_all = ["s1", "s2"])]
    s: Option<usize>,
    /// Orders of theta_{s1,s2}.
    #[arg(long, requires = "s2")]
    s1: Option<usize>,
    #[arg(long, requires = "s1")]
    s2: Option<usize>,
    /// Force a sampled estimate even when enumeration fits the budget.
    #[arg(long)]
    sampled: bool,
    #[command(flatten)]
    source: MatrixArgs,
    /// Write the matrix used to this CSV file.
    #[arg(long)]
    save_matrix: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ZetaArgs {
    #[arg(long, default_value_t = 200)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    s0: usize,
    #[arg(long, default_value_t = 2)]
    sa: usize,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Default `ceil(0.3861 s0 log2 m)`.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.1266)]
    c: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    schema: &'static str,
    version: &'static str,
    command: &'static str,
    files: Vec<String>,
    args: &'a T,
}

/// Writes `(file, contents)` pairs and a manifest of the arguments to `dir`.
fn write_with_manifest<T: Serialize>(dir: &Path, command: &'static str, args: &T, files: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, text) in files {
        fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
    }
    let manifest = Manifest {
        schema: "recsparse manifest v1",
        version: env!("CARGO_PKG_VERSION"),
        command,
        files: files.iter().map(|(n, _)| n.to_string()).collect(),
        args,
    };
    fs::write(dir.join("manifest.toml"), toml::to_string(&manifest)?)?;
    Ok(())
}

fn parse_generator(s: &str) -> Result<Generator> {
    match s.to_ascii_lowercase().as_str() {
        "gen1" | "1" => Ok(Generator::Gen1),
        "gen2" | "2" => Ok(Generator::Gen2),
        _ => usage!("unknown generator '{s}', expected gen1 or gen2"),
    }
}

fn simulate_spec(args: &SimulateArgs) -> Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => ExperimentSpec::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentSpec::default(),
    };
    macro_rules! set {
        ($($field:ident <- $arg:ident),*) => {
            $(if let Some(v) = args.$arg.clone() { spec.$field = v; })*
        };
    }
    set!(name <- name, m <- m, s0 <- s0, sa <- sa, r <- r, d <- d, n <- n, c <- c, trials <- trials,
         horizon <- horizon, master_seed <- seed, trial_offset <- trial_offset);
    if let Some(g) = &args.generator {
        spec.generator = parse_generator(g)?;
    }
    if let Some(list) = &args.algorithms {
        spec.algorithms = list.split(',').map(|s| Algorithm::parse(s.trim())).collect::<recsparse::Result<_>>()?;
    }
    for (slot, v) in [
        (&mut spec.epsilon, args.epsilon),
        (&mut spec.alpha, args.alpha),
        (&mut spec.alpha_add, args.alpha_add),
        (&mut spec.alpha_del, args.alpha_del),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    if args.n0.is_some() {
        spec.n0 = args.n0;
    }
    spec.validate()?;
    Ok(spec)
}

fn run_and_write(spec: &ExperimentSpec, out: Option<&Path>) -> Result<()> {
    let dir = out.map_or_else(|| PathBuf::from("out").join(&spec.name), Path::to_path_buf);
    let result = run_experiment(spec)?;
    write_outputs(&result, &dir).with_context(|| format!("writing outputs to {}", dir.display()))?;
    print!("{}", summary_text(&result));
    println!("outputs: {}", dir.display());
    for (k, alg, err) in result.failures() {
        eprintln!("warning: trial {k} {}: {err}", alg.name());
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let spec = simulate_spec(args)?;
    run_and_write(&spec, args.out.as_deref())
}

fn figure3(args: &Figure3Args) -> Result<()> {
    let mut spec = figure3_preset(args.panel)?;
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(h) = args.horizon {
        spec.horizon = h;
    }
    if let Some(s) = args.seed {
        spec.master_seed = s;
    }
    spec.validate()?;
    run_and_write(&spec, args.out.as_deref())
}

fn matrix_of(source: &MatrixArgs) -> Result<DMatrix<f64>> {
    match &source.matrix {
        Some(path) => Ok(load_matrix_csv(path).with_context(|| format!("loading {}", path.display()))?.0),
        None => {
            let spec = ExperimentSpec { master_seed: source.seed, ..ExperimentSpec::default() };
            Ok(gaussian_matrix(source.n, source.m, spec.matrix_seed())?)
        }
    }
}

fn provider_of(source: &MatrixArgs) -> Result<MatrixConstants> {
    let mode = EstimateMode::Auto { budget: source.budget as u128, samples: source.samples, seed: source.sample_seed };
    Ok(MatrixConstants::new(matrix_of(source)?, mode))
}

fn check(args: &CheckArgs) -> Result<()> {
    let mut inputs = recsparse::analysis::CheckInputs::new(args.s0, args.sa, args.r, args.eps);
    inputs.alpha_add = args.alpha_add;
    inputs.d = args.d;
    inputs.d0 = args.d0;
    inputs.f = args.f;
    inputs.zeta = args.zeta;
    inputs.max_false_adds = args.max_false_adds;
    inputs.oracle_start = args.oracle_start;

    let mut fixed;
    let mut matrix;
    let provider: &mut dyn ConstantProvider = match (args.delta, args.theta) {
        (Some(delta), Some(theta)) => {
            fixed = FixedConstants::uniform(delta, theta);
            &mut fixed
        }
        _ => {
            matrix = provider_of(&args.source)?;
            &mut matrix
        }
    };
    let report: ConditionReport = match args.theorem.to_ascii_lowercase().as_str() {
        "1" | "t1" => check_theorem1(&inputs, provider)?,
        "2" | "t2" => check_theorem2(&inputs, provider)?,
        "3" | "t3" => check_theorem3(&inputs, provider)?,
        "c3" => check_corollary3(&inputs, provider)?,
        "c4" => check_corollary4(&inputs, provider)?,
        other => usage!("unknown theorem '{other}', expected 1, 2, 3, c3 or c4"),
    };
    let text = if args.csv { report.to_csv() } else { report.to_text() };
    print!("{text}");
    if let Some(dir) = &args.out {
        let name = if args.csv { "report.csv" } else { "report.txt" };
        write_with_manifest(dir, "check", args, &[(name, text)])?;
    }
    Ok(())
}

fn ric(args: &RicArgs) -> Result<()> {
    let a = matrix_of(&args.source)?;
    if let Some(path) = &args.save_matrix {
        let seed = args.source.matrix.is_none().then_some(args.source.seed);
        save_matrix_csv(path, &a, seed)?;
    }
    let src = &args.source;
    let est = match (args.s, args.s1, args.s2) {
        (Some(s), None, None) => {
            if args.sampled {
                ric_sampled(&a, s, src.samples, src.sample_seed)?
            } else {
                match ric_exhaustive(&a, s, src.budget as u128) {
                    Err(recsparse::Error::BudgetExceeded { .. }) => ric_sampled(&a, s, src.samples, src.sample_seed)?,
                    other => other?,
                }
            }
        }
        (None, Some(s1), Some(s2)) => {
            let sampled = SweepMode::Sampled { samples: src.samples, seed: src.sample_seed };
            if args.sampled {
                roc(&a, s1, s2, sampled)?
            } else {
                match roc(&a, s1, s2, SweepMode::Exhaustive { budget: src.budget as u128 }) {
                    Err(recsparse::Error::BudgetExceeded { .. }) => roc(&a, s1, s2, sampled)?,
                    other => other?,
                }
            }
        }
        _ => usage!("give either --s or both --s1 and --s2"),
    };
    let text = est.to_key_value();
    print!("{text}");
    if let Some(dir) = &args.out {
        write_with_manifest(dir, "ric", args, &[("estimate.txt", text)])?;
    }
    Ok(())
}

fn zeta(args: &ZetaArgs) -> Result<()> {
    let spec = ZetaSpec {
        m: args.m,
        s0: args.s0,
        sa: args.sa,
        r: args.r,
        d: args.d,
        n: args.n.unwrap_or_else(|| ZetaSpec::default_n(args.m, args.s0)),
        c: args.c,
        trials: args.trials,
        horizon: args.horizon,
        seed: args.seed,
        epsilon: args.epsilon,
    };
    let est = estimate_zeta(&spec)?;
    let text = format!("n={}\nzeta={}\nsamples={}\n", spec.n, est.zeta, est.samples);
    print!("{text}");
    if let Some(dir) = &args.out {
        let per_trial: String = est.per_trial_max.iter().map(|v| format!("{v}\n")).collect();
        write_with_manifest(dir, "zeta", args, &[("zeta.txt", text), ("per_trial_max.txt", per_trial)])?;
    }
    Ok(())
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<Usage>()
            || matches!(
                c.downcast_ref::<recsparse::Error>(),
                Some(recsparse::Error::Config(_) | recsparse::Error::Argument(_) | recsparse::Error::Parse(_))
            )
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Check(a) => check(a),
        Command::Ric(a) => ric(a),
        Command::Zeta(a) => zeta(a),
        Command::Figure3(a) => figure3(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 1 } else { 2 })
        }
    }
}
