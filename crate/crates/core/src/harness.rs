//! Monte Carlo experiment runner: one fixed sensing matrix, independent
//! signal and noise draws per trial, ratio-of-means metrics and
//! reproducible output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l1_solver::{L1Solver, SolverOptions};
use crate::recovery::{run_sequence_with, Algorithm, InitMode, RecoveryConfig, RecoveryStep};
use crate::rng::{derive_seed, Purpose};
use crate::sensing::{gaussian_matrix, NoiseModel, SensingSystem};
use crate::signal_model::{Generator, ModelParams};

/// How the solver noise bound is derived from the noise half-width `c`
/// when `epsilon` is not given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    /// `c sqrt(n)`, the worst-case bound on `||w||`.
    #[default]
    Max,
    /// `c sqrt(n / 3)`, the root-mean-square value of `||w||`.
    Rms,
}

impl EpsilonRule {
    pub fn epsilon(&self, c: f64, rows: usize) -> f64 {
        match self {
            EpsilonRule::Max => c * (rows as f64).sqrt(),
            EpsilonRule::Rms => c * (rows as f64 / 3.0).sqrt(),
        }
    }
}

/// Everything needed to reproduce an experiment. Missing keys take the
/// defaults of [`ExperimentSpec::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub m: usize,
    pub s0: usize,
    pub sa: usize,
    pub r: f64,
    pub d: usize,
    pub generator: Generator,
    /// Measurements per step.
    pub n: usize,
    /// Noise half-width; `0` means noiseless.
    pub c: f64,
    /// Solver noise bound; derived from `epsilon_rule` when absent.
    pub epsilon: Option<f64>,
    pub epsilon_rule: EpsilonRule,
    pub algorithms: Vec<Algorithm>,
    /// Modified-CS (and simple-CS) support threshold; default
    /// `(c / 2 + r / 2) / 2`.
    pub alpha: Option<f64>,
    /// Default `c / 2`.
    pub alpha_add: Option<f64>,
    /// Default `r / 2`.
    pub alpha_del: Option<f64>,
    /// Rows of the initial matrix; when set, `t = 0` is reconstructed by
    /// simple CS instead of the oracle start.
    pub n0: Option<usize>,
    pub trials: usize,
    pub horizon: usize,
    pub master_seed: u64,
    /// Index of the first trial; lets split runs reproduce a larger one.
    pub trial_offset: usize,
    /// First time index of the steady-state window used in summaries.
    pub window_start: usize,
    pub solver: SolverOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "experiment".into(),
            m: 200,
            s0: 20,
            sa: 2,
            r: 1.0,
            d: 3,
            generator: Generator::Gen1,
            n: 65,
            c: 0.1266,
            epsilon: None,
            epsilon_rule: EpsilonRule::Max,
            algorithms: vec![Algorithm::ModCS, Algorithm::ModCSAddLSDel, Algorithm::LSCS],
            alpha: None,
            alpha_add: None,
            alpha_del: None,
            n0: None,
            trials: 100,
            horizon: 200,
            master_seed: 0,
            trial_offset: 0,
            window_start: 20,
            solver: SolverOptions::default(),
        }
    }
}

/// Thresholds and bounds after defaults are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub epsilon: f64,
    pub epsilon0: Option<f64>,
    pub alpha: f64,
    pub alpha_add: f64,
    pub alpha_del: f64,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            m: self.m,
            s0: self.s0,
            sa: self.sa,
            r: self.r,
            d: self.d,
            generator: self.generator,
            seed: self.master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_params().validate()?;
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        if self.trials == 0 || self.horizon == 0 {
            return Err(Error::Config("trials and horizon must be at least 1".into()));
        }
        if self.n == 0 || self.n >= self.m {
            return Err(Error::Config(format!("need 0 < n < m, got n = {}", self.n)));
        }
        if let Some(n0) = self.n0 {
            if n0 < self.n || n0 > self.m {
                return Err(Error::Config(format!("n0 = {n0} must lie in n..=m")));
            }
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be finite and nonnegative, got {}", self.c)));
        }
        if self.master_seed > i64::MAX as u64 {
            return Err(Error::Config("master_seed must fit in a signed 64-bit integer".into()));
        }
        for (name, v) in [("epsilon", self.epsilon), ("alpha", self.alpha), ("alpha_add", self.alpha_add), ("alpha_del", self.alpha_del)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
                }
            }
        }
        self.solver.validate()
    }

    pub fn resolve(&self) -> Resolved {
        Resolved {
            epsilon: self.epsilon.unwrap_or_else(|| self.epsilon_rule.epsilon(self.c, self.n)),
            epsilon0: self.n0.map(|n0| self.epsilon_rule.epsilon(self.c, n0)),
            alpha: self.alpha.unwrap_or((self.c / 2.0 + self.r / 2.0) / 2.0),
            alpha_add: self.alpha_add.unwrap_or(self.c / 2.0),
            alpha_del: self.alpha_del.unwrap_or(self.r / 2.0),
        }
    }

    /// Recovery configuration of one algorithm.
    pub fn recovery_config(&self, algorithm: Algorithm) -> RecoveryConfig {
        let res = self.resolve();
        let mut cfg = match algorithm {
            Algorithm::ModCS => RecoveryConfig::mod_cs(res.alpha, res.epsilon),
            Algorithm::ModCSAddLSDel | Algorithm::LSCS => {
                RecoveryConfig::add_ls_del(algorithm, res.alpha_add, res.alpha_del, res.epsilon)
            }
            Algorithm::SimpleCS | Algorithm::GaussCS => {
                RecoveryConfig { algorithm, ..RecoveryConfig::simple_cs(Some(res.alpha), res.epsilon) }
            }
        };
        cfg.solver = self.solver;
        if let Some(n0) = self.n0 {
            cfg.init = InitMode::SimpleCs { n0 };
        }
        cfg
    }

    pub fn matrix_seed(&self) -> u64 {
        derive_seed(self.master_seed, 0, Purpose::SensingMatrix)
    }

    pub fn initial_matrix_seed(&self) -> u64 {
        derive_seed(self.master_seed, 0, Purpose::InitialMatrix)
    }

    /// Seed of trial `k` (global index, offset included).
    pub fn trial_seed(&self, k: usize) -> u64 {
        derive_seed(self.master_seed, k as u64, Purpose::TrialSeed)
    }

    /// The fixed sensing system of the experiment.
    pub fn sensing_system(&self) -> Result<SensingSystem> {
        let a = gaussian_matrix(self.n, self.m, self.matrix_seed())?;
        let a0 = match self.n0 {
            Some(n0) => Some(gaussian_matrix(n0, self.m, self.initial_matrix_seed())?),
            None => None,
        };
        let noise = if self.c > 0.0 { NoiseModel::Uniform { c: self.c } } else { NoiseModel::None };
        let res = self.resolve();
        SensingSystem::with_epsilon(a, a0, noise, res.epsilon, res.epsilon0.unwrap_or(res.epsilon))
    }
}

/// Built-in presets of the four simulated regimes. `a`: n = 65, r = 1;
/// `b`: n = 59, r = 1; `c`: n = 59, r = 2/3; `d`: n = 59, r = 2/5, d = 5.
/// All use the typical-norm noise bound `c sqrt(n / 3)`.
pub fn figure3_preset(panel: char) -> Result<ExperimentSpec> {
    let (n, r, d) = match panel.to_ascii_lowercase() {
        'a' => (65, 1.0, 3),
        'b' => (59, 1.0, 3),
        'c' => (59, 2.0 / 3.0, 3),
        'd' => (59, 2.0 / 5.0, 5),
        other => return Err(Error::Config(format!("unknown panel '{other}', expected a, b, c or d"))),
    };
    Ok(ExperimentSpec {
        name: format!("figure3{}", panel.to_ascii_lowercase()),
        n,
        r,
        d,
        epsilon_rule: EpsilonRule::Rms,
        algorithms: vec![Algorithm::SimpleCS, Algorithm::ModCS, Algorithm::ModCSAddLSDel, Algorithm::LSCS],
        ..ExperimentSpec::default()
    })
}

/// Per-step outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub sq_error: f64,
    pub signal_energy: f64,
    pub support_size: usize,
    /// `|N_hat \ N|`.
    pub extras: usize,
    /// `|N \ N_hat|`.
    pub misses: usize,
    /// Elements added by the add step that are neither known nor true.
    pub false_additions: Option<usize>,
    pub converged: bool,
    pub failed: bool,
}

impl StepRecord {
    fn from_step(s: &RecoveryStep) -> Option<Self> {
        let d = s.diagnostics.as_ref()?;
        Some(StepRecord {
            t: s.t,
            sq_error: d.sq_error,
            signal_energy: d.signal_energy,
            support_size: d.support_size,
            extras: d.delta_e_tilde,
            misses: d.delta_tilde,
            false_additions: d.false_additions,
            converged: s.converged,
            failed: s.failure.is_some(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub steps: Vec<StepRecord>,
    /// Set when the whole trial failed; its steps are then empty.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Nmse,
    Extras,
    Misses,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Nmse, Metric::Extras, Metric::Misses];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Nmse => "nmse",
            Metric::Extras => "extras",
            Metric::Misses => "misses",
        }
    }
}

/// Metrics of one algorithm at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub t: usize,
    /// `sum ||x - x_hat||^2 / sum ||x||^2` over trials.
    pub nmse: f64,
    /// `sum |N_hat \ N| / sum |N|`.
    pub extras: f64,
    /// `sum |N \ N_hat| / sum |N|`.
    pub misses: f64,
    pub trials: usize,
}

impl MetricPoint {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Nmse => self.nmse,
            Metric::Extras => self.extras,
            Metric::Misses => self.misses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSeries {
    pub algorithm: Algorithm,
    pub points: Vec<MetricPoint>,
    pub completed_trials: usize,
    pub failed_trials: usize,
    /// Steps whose solve failed and carried the previous support over.
    pub failed_steps: usize,
}

impl AlgorithmSeries {
    fn window(&self, from: usize, to: usize) -> impl Iterator<Item = &MetricPoint> {
        self.points.iter().filter(move |p| p.t >= from && p.t <= to)
    }

    /// Average over `from..=to` of the per-time metric.
    pub fn mean(&self, metric: Metric, from: usize, to: usize) -> Option<f64> {
        let vals: Vec<f64> = self.window(from, to).map(|p| p.get(metric)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn max(&self, metric: Metric, from: usize, to: usize) -> Option<f64> {
        self.window(from, to).map(|p| p.get(metric)).reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub series: Vec<AlgorithmSeries>,
}

impl MetricSeries {
    /// Aggregates trial records. Records are reduced in trial-index order,
    /// so the result does not depend on how trials were scheduled or split.
    pub fn from_records(algorithms: &[Algorithm], records: &[TrialRecord]) -> Result<Self> {
        if algorithms.is_empty() {
            return Err(Error::Argument("algorithm list is empty".into()));
        }
        let mut series = Vec::with_capacity(algorithms.len());
        for &alg in algorithms {
            let mut recs: Vec<&TrialRecord> = records.iter().filter(|r| r.algorithm == alg).collect();
            recs.sort_by_key(|r| r.trial);
            let t_max = recs.iter().flat_map(|r| r.steps.iter().map(|s| s.t)).max();
            let mut sums = vec![(0.0, 0.0, 0usize, 0usize, 0usize, 0usize); t_max.map_or(0, |t| t + 1)];
            let mut failed_steps = 0;
            for r in &recs {
                for s in &r.steps {
                    let e = &mut sums[s.t];
                    e.0 += s.sq_error;
                    e.1 += s.signal_energy;
                    e.2 += s.extras;
                    e.3 += s.misses;
                    e.4 += s.support_size;
                    e.5 += 1;
                    failed_steps += s.failed as usize;
                }
            }
            let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
            let points = sums
                .iter()
                .enumerate()
                .filter(|(_, e)| e.5 > 0)
                .map(|(t, e)| MetricPoint {
                    t,
                    nmse: ratio(e.0, e.1),
                    extras: ratio(e.2 as f64, e.4 as f64),
                    misses: ratio(e.3 as f64, e.4 as f64),
                    trials: e.5,
                })
                .collect();
            let failed_trials = recs.iter().filter(|r| r.error.is_some()).count();
            series.push(AlgorithmSeries {
                algorithm: alg,
                points,
                completed_trials: recs.len() - failed_trials,
                failed_trials,
                failed_steps,
            });
        }
        Ok(MetricSeries { series })
    }

    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmSeries> {
        self.series.iter().find(|s| s.algorithm == algorithm)
    }

    /// Long-format CSV: one row per algorithm and time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# recsparse metrics v1\nalgorithm,t,nmse,extras,misses,trials\n");
        for s in &self.series {
            for p in &s.points {
                let _ = writeln!(out, "{},{},{},{},{},{}", s.algorithm.name(), p.t, p.nmse, p.extras, p.misses, p.trials);
            }
        }
        out
    }
}

/// Per-trial, per-step diagnostics as CSV.
pub fn diagnostics_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(
        "# recsparse diagnostics v1\ntrial,algorithm,t,sq_error,signal_energy,support_size,extras,misses,false_additions,converged,failed\n",
    );
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.trial);
    for r in sorted {
        for s in &r.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.trial,
                r.algorithm.name(),
                s.t,
                s.sq_error,
                s.signal_energy,
                s.support_size,
                s.extras,
                s.misses,
                s.false_additions.map_or(String::new(), |v| v.to_string()),
                s.converged as u8,
                s.failed as u8
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub resolved: Resolved,
    pub series: MetricSeries,
    /// Sorted by trial index, then by position in the algorithm list.
    pub records: Vec<TrialRecord>,
}

impl ExperimentResult {
    /// Trials that failed as a whole, with their messages.
    pub fn failures(&self) -> Vec<(usize, Algorithm, String)> {
        self.records
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| (r.trial, r.algorithm, e.clone())))
            .collect()
    }
}

/// Runs every trial of `spec` for every algorithm. All algorithms see the
/// same signals and noise within a trial.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let sensing = spec.sensing_system()?;
    let params = spec.model_params();
    let configs: Vec<RecoveryConfig> = spec.algorithms.iter().map(|a| spec.recovery_config(*a)).collect();
    for c in &configs {
        c.validate()?;
    }
    let solver = L1Solver::new(&sensing.a, spec.solver)?;

    let records: Vec<TrialRecord> = (spec.trial_offset..spec.trial_offset + spec.trials)
        .into_par_iter()
        .map_init(
            || solver.clone(),
            |solver, k| {
                let seed = spec.trial_seed(k);
                configs
                    .iter()
                    .map(|cfg| match run_sequence_with(solver, &params, &sensing, cfg, spec.horizon, seed) {
                        Ok(run) => TrialRecord {
                            trial: k,
                            seed,
                            algorithm: cfg.algorithm,
                            steps: run.steps.iter().filter_map(StepRecord::from_step).collect(),
                            error: None,
                        },
                        Err(e) => TrialRecord { trial: k, seed, algorithm: cfg.algorithm, steps: Vec::new(), error: Some(e.to_string()) },
                    })
                    .collect::<Vec<_>>()
            },
        )
        .flatten()
        .collect();

    let series = MetricSeries::from_records(&spec.algorithms, &records)?;
    Ok(ExperimentResult { spec: spec.clone(), resolved: spec.resolve(), series, records })
}

/// Writes one whitespace-separated file per metric: a commented header,
/// then a row per time with `t` and one column per algorithm.
pub fn emit_plot_data(series: &MetricSeries, dir: &Path) -> Result<Vec<PathBuf>> {
    if series.series.is_empty() {
        return Err(Error::Argument("metric series is empty".into()));
    }
    fs::create_dir_all(dir)?;
    let mut times: Vec<usize> = series.series.iter().flat_map(|s| s.points.iter().map(|p| p.t)).collect();
    times.sort_unstable();
    times.dedup();
    let mut paths = Vec::new();
    for metric in Metric::ALL {
        let mut out = String::from("# t");
        for s in &series.series {
            let _ = write!(out, " {}", s.algorithm.name());
        }
        out.push('\n');
        for &t in &times {
            let _ = write!(out, "{t}");
            for s in &series.series {
                match s.points.iter().find(|p| p.t == t) {
                    Some(p) => {
                        let _ = write!(out, " {}", p.get(metric));
                    }
                    None => out.push_str(" nan"),
                }
            }
            out.push('\n');
        }
        let path = dir.join(format!("{}.dat", metric.name()));
        fs::write(&path, out)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    version: &'static str,
    matrix_seed: String,
    initial_matrix_seed: Option<String>,
    resolved: &'a Resolved,
    completed_trials: Vec<(String, usize)>,
    failures: Vec<String>,
    files: Vec<String>,
    spec: &'a ExperimentSpec,
}

/// Writes metrics, diagnostics, plot data and a manifest to `dir`.
/// Returns the paths written, manifest last.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let metrics = dir.join("metrics.csv");
    fs::write(&metrics, result.series.to_csv())?;
    paths.push(metrics);
    let diag = dir.join("diagnostics.csv");
    fs::write(&diag, diagnostics_csv(&result.records))?;
    paths.push(diag);
    paths.extend(emit_plot_data(&result.series, dir)?);

    let spec = &result.spec;
    let manifest = Manifest {
        schema: "recsparse manifest v1",
        version: env!("CARGO_PKG_VERSION"),
        matrix_seed: format!("{:#018x}", spec.matrix_seed()),
        initial_matrix_seed: spec.n0.map(|_| format!("{:#018x}", spec.initial_matrix_seed())),
        resolved: &result.resolved,
        completed_trials: result.series.series.iter().map(|s| (s.algorithm.name().to_string(), s.completed_trials)).collect(),
        failures: result.failures().iter().map(|(k, a, e)| format!("trial {k} {}: {e}", a.name())).collect(),
        files: paths.iter().filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect(),
        spec,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    let path = dir.join("manifest.toml");
    fs::write(&path, text)?;
    paths.push(path);
    Ok(paths)
}

/// Steady-state summary per algorithm: window means and maxima.
pub fn summary_text(result: &ExperimentResult) -> String {
    let spec = &result.spec;
    let (from, to) = (spec.window_start, spec.horizon);
    let mut out = format!("{}: trials={} horizon={} epsilon={:.6}\n", spec.name, spec.trials, spec.horizon, result.resolved.epsilon);
    let _ = writeln!(out, "{:<20} {:>12} {:>12} {:>12} {:>12} {:>8}", "algorithm", "mean_nmse", "max_nmse", "mean_extras", "mean_misses", "failed");
    for s in &result.series.series {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(
            out,
            "{:<20} {:>12} {:>12} {:>12} {:>12} {:>8}",
            s.algorithm.name(),
            f(s.mean(Metric::Nmse, from, to)),
            f(s.max(Metric::Nmse, from, to)),
            f(s.mean(Metric::Extras, from, to)),
            f(s.mean(Metric::Misses, from, to)),
            s.failed_trials
        );
    }
    out
}
