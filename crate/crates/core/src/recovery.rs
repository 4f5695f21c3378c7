//! Recursive reconstruction algorithms.
//!
//! Every algorithm consumes the current measurement and the previous support
//! estimate and returns the new estimate plus support-error diagnostics:
//!
//! * `ModCS`: partial-support l1 with the previous support as known part,
//!   then a single threshold.
//! * `ModCSAddLSDel`: the same l1 step, then threshold-add, least squares on
//!   the enlarged support, threshold-delete and a final least squares.
//! * `LSCS`: least squares on the previous support, l1 on the measurement
//!   residual, then add-LS-del.
//! * `SimpleCS` / `GaussCS`: per-step baselines ignoring the past.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l1_solver::{L1Solver, SolverOptions, SolverResult};
use crate::sensing::{measure, SensingSystem};
use crate::signal_model::{init_state, step, IndexSet, ModelParams, SparseSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "simple_cs")]
    SimpleCS,
    #[serde(rename = "gauss_cs")]
    GaussCS,
    #[serde(rename = "mod_cs")]
    ModCS,
    #[serde(rename = "mod_cs_add_ls_del")]
    ModCSAddLSDel,
    #[serde(rename = "ls_cs")]
    LSCS,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::SimpleCS, Algorithm::GaussCS, Algorithm::ModCS, Algorithm::ModCSAddLSDel, Algorithm::LSCS];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::SimpleCS => "simple_cs",
            Algorithm::GaussCS => "gauss_cs",
            Algorithm::ModCS => "mod_cs",
            Algorithm::ModCSAddLSDel => "mod_cs_add_ls_del",
            Algorithm::LSCS => "ls_cs",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', ' '], "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key || format!("{a:?}").to_ascii_lowercase() == key)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }

    pub fn uses_add_ls_del(&self) -> bool {
        matches!(self, Algorithm::ModCSAddLSDel | Algorithm::LSCS)
    }
}

/// How the support estimate at `t = 0` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    /// True initial support minus its `sa` smallest-magnitude elements; no
    /// reconstruction at `t = 0`.
    Oracle,
    /// Given initial support estimate; no reconstruction at `t = 0`.
    Given { support: IndexSet },
    /// Run the algorithm with an empty known support on the `n0 x m` initial
    /// matrix at `t = 0`.
    SimpleCs { n0: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub algorithm: Algorithm,
    /// Single threshold (ModCS, GaussCS; optional support threshold for
    /// SimpleCS, default keeps every nonzero).
    pub alpha: Option<f64>,
    pub alpha_add: Option<f64>,
    pub alpha_del: Option<f64>,
    /// Noise bound passed to the l1 step at `t > 0`.
    pub epsilon: f64,
    pub init: InitMode,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl RecoveryConfig {
    pub fn mod_cs(alpha: f64, epsilon: f64) -> Self {
        RecoveryConfig {
            algorithm: Algorithm::ModCS,
            alpha: Some(alpha),
            alpha_add: None,
            alpha_del: None,
            epsilon,
            init: InitMode::Oracle,
            solver: SolverOptions::default(),
        }
    }

    pub fn add_ls_del(algorithm: Algorithm, alpha_add: f64, alpha_del: f64, epsilon: f64) -> Self {
        RecoveryConfig {
            algorithm,
            alpha: None,
            alpha_add: Some(alpha_add),
            alpha_del: Some(alpha_del),
            epsilon,
            init: InitMode::Oracle,
            solver: SolverOptions::default(),
        }
    }

    pub fn simple_cs(alpha: Option<f64>, epsilon: f64) -> Self {
        RecoveryConfig {
            algorithm: Algorithm::SimpleCS,
            alpha,
            alpha_add: None,
            alpha_del: None,
            epsilon,
            init: InitMode::Oracle,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: Option<f64>, required: bool| -> Result<()> {
            match v {
                None if required => Err(Error::Config(format!("{} requires {name}", self.algorithm.name()))),
                Some(x) if !(x >= 0.0 && x.is_finite()) => {
                    Err(Error::Config(format!("{name} must be finite and nonnegative, got {x}")))
                }
                _ => Ok(()),
            }
        };
        let alg = self.algorithm;
        check("alpha", self.alpha, matches!(alg, Algorithm::ModCS | Algorithm::GaussCS))?;
        check("alpha_add", self.alpha_add, alg.uses_add_ls_del())?;
        check("alpha_del", self.alpha_del, alg.uses_add_ls_del())?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be finite and nonnegative, got {}", self.epsilon)));
        }
        if let InitMode::SimpleCs { n0 } = self.init {
            if n0 == 0 {
                return Err(Error::Config("n0 must be positive".into()));
            }
        }
        self.solver.validate()
    }

    fn require(&self, v: Option<f64>, name: &str) -> Result<f64> {
        v.ok_or_else(|| Error::Config(format!("{} requires {name}", self.algorithm.name())))
    }
}

/// Support-error counts against the true signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `|N_t|`.
    pub support_size: usize,
    /// `|N_t \ T_t|`, misses of the predicted support.
    pub delta: usize,
    /// `|T_t \ N_t|`, extras of the predicted support.
    pub delta_e: usize,
    /// Misses and extras of `T_add` (add-LS-del algorithms only).
    pub delta_add: Option<usize>,
    pub delta_e_add: Option<usize>,
    /// Zero elements brought in by the addition step (not in `T_t` or `N_t`).
    pub false_additions: Option<usize>,
    /// Misses and extras of the final support estimate.
    pub delta_tilde: usize,
    pub delta_e_tilde: usize,
    /// `||x_t - x_hat_t||^2`.
    pub sq_error: f64,
    /// `||x_t||^2`.
    pub signal_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryStep {
    pub t: usize,
    pub algorithm: Algorithm,
    /// Final estimate.
    pub x_hat: DVector<f64>,
    /// Estimate before support estimation (l1 output, or LS plus residual CS).
    pub x_hat_raw: DVector<f64>,
    /// Support estimate fed to the next step.
    pub n_hat: IndexSet,
    /// Known support used at this step.
    pub t_prev: IndexSet,
    /// Support after the addition step (empty for single-threshold methods).
    pub t_add: IndexSet,
    /// Whether candidates were dropped to keep `|T_add| <= n`.
    pub t_add_truncated: bool,
    /// LS estimate on `T_add` (add-LS-del algorithms only).
    pub x_add: Option<DVector<f64>>,
    pub converged: bool,
    pub solver_iterations: usize,
    /// Set when the step failed and the previous support was carried over.
    pub failure: Option<String>,
    /// Realized `||w_t||` when the measurement was simulated.
    pub noise_norm: Option<f64>,
    pub diagnostics: Option<Diagnostics>,
}

fn threshold(x: &DVector<f64>, level: f64) -> IndexSet {
    x.iter().enumerate().filter(|(_, v)| v.abs() > level).map(|(i, _)| i).collect()
}

impl RecoveryStep {
    fn new(algorithm: Algorithm, t_prev: &IndexSet, raw: &SolverResult) -> Self {
        RecoveryStep {
            t: 0,
            algorithm,
            x_hat: raw.beta.clone(),
            x_hat_raw: raw.beta.clone(),
            n_hat: IndexSet::new(),
            t_prev: t_prev.clone(),
            t_add: IndexSet::new(),
            t_add_truncated: false,
            x_add: None,
            converged: raw.converged,
            solver_iterations: raw.iterations,
            failure: None,
            noise_norm: None,
            diagnostics: None,
        }
    }

    /// Fills [`Diagnostics`] against the true signal.
    pub fn attach_truth(&mut self, truth: &SparseSignal) {
        let n = &truth.support;
        let misses = |s: &IndexSet| n.difference(s).count();
        let extras = |s: &IndexSet| s.difference(n).count();
        let add_ls_del = self.algorithm.uses_add_ls_del() && self.failure.is_none();
        self.diagnostics = Some(Diagnostics {
            support_size: n.len(),
            delta: misses(&self.t_prev),
            delta_e: extras(&self.t_prev),
            delta_add: add_ls_del.then(|| misses(&self.t_add)),
            delta_e_add: add_ls_del.then(|| extras(&self.t_add)),
            false_additions: add_ls_del
                .then(|| self.t_add.iter().filter(|i| !self.t_prev.contains(i) && !n.contains(i)).count()),
            delta_tilde: misses(&self.n_hat),
            delta_e_tilde: extras(&self.n_hat),
            sq_error: (&truth.values - &self.x_hat).norm_squared(),
            signal_energy: truth.values.norm_squared(),
        });
    }
}

/// Single-threshold modified-CS step.
pub fn modcs_step(solver: &mut L1Solver, y: &DVector<f64>, t_prev: &IndexSet, config: &RecoveryConfig) -> Result<RecoveryStep> {
    let alpha = config.require(config.alpha, "alpha")?;
    let raw = solver.solve(y, t_prev, config.epsilon)?;
    let mut out = RecoveryStep::new(config.algorithm, t_prev, &raw);
    out.n_hat = threshold(&raw.beta, alpha);
    Ok(out)
}

/// Modified-CS followed by add-LS-del.
pub fn modcs_add_ls_del_step(
    solver: &mut L1Solver,
    y: &DVector<f64>,
    t_prev: &IndexSet,
    config: &RecoveryConfig,
) -> Result<RecoveryStep> {
    let raw = solver.solve(y, t_prev, config.epsilon)?;
    let mut out = RecoveryStep::new(config.algorithm, t_prev, &raw);
    add_ls_del(solver, y, t_prev, config, &mut out)?;
    Ok(out)
}

/// LS on the previous support, CS on the LS residual, then add-LS-del.
pub fn lscs_step(solver: &mut L1Solver, y: &DVector<f64>, t_prev: &IndexSet, config: &RecoveryConfig) -> Result<RecoveryStep> {
    let n = solver.matrix().nrows();
    let init_support = if t_prev.len() > n {
        // Keep LS well posed; only reachable after stability is lost.
        t_prev.iter().copied().take(n).collect()
    } else {
        t_prev.clone()
    };
    let init = solver.least_squares(y, &init_support)?;
    let residual = y - solver.matrix() * &init.x;
    let cs = solver.solve(&residual, &IndexSet::new(), config.epsilon)?;
    let combined = SolverResult { beta: &cs.beta + &init.x, ..cs };
    let mut out = RecoveryStep::new(config.algorithm, t_prev, &combined);
    add_ls_del(solver, y, t_prev, config, &mut out)?;
    Ok(out)
}

/// l1 with no known support. For `GaussCS` the thresholded support is
/// re-fit by least squares.
pub fn simple_cs_step(solver: &mut L1Solver, y: &DVector<f64>, config: &RecoveryConfig) -> Result<RecoveryStep> {
    let empty = IndexSet::new();
    let raw = solver.solve(y, &empty, config.epsilon)?;
    let mut out = RecoveryStep::new(config.algorithm, &empty, &raw);
    out.n_hat = threshold(&raw.beta, config.alpha.unwrap_or(0.0));
    if config.algorithm == Algorithm::GaussCS {
        let n = solver.matrix().nrows();
        if out.n_hat.len() > n {
            out.n_hat = largest(&raw.beta, &out.n_hat, n);
        }
        out.x_hat = solver.least_squares(y, &out.n_hat)?.x;
    }
    Ok(out)
}

/// The `k` members of `candidates` with largest `|x_i|` (ties by index).
fn largest(x: &DVector<f64>, candidates: &IndexSet, k: usize) -> IndexSet {
    let mut c: Vec<usize> = candidates.iter().copied().collect();
    c.sort_by(|a, b| x[*b].abs().total_cmp(&x[*a].abs()).then(a.cmp(b)));
    c.into_iter().take(k).collect()
}

fn add_ls_del(
    solver: &L1Solver,
    y: &DVector<f64>,
    t_prev: &IndexSet,
    config: &RecoveryConfig,
    out: &mut RecoveryStep,
) -> Result<()> {
    let alpha_add = config.require(config.alpha_add, "alpha_add")?;
    let alpha_del = config.require(config.alpha_del, "alpha_del")?;
    let n = solver.matrix().nrows();
    let raw = &out.x_hat_raw;

    let candidates: IndexSet =
        threshold(raw, alpha_add).into_iter().filter(|i| !t_prev.contains(i)).collect();
    let mut t_add: IndexSet;
    if t_prev.len() + candidates.len() > n {
        out.t_add_truncated = true;
        t_add = if t_prev.len() >= n { largest(raw, t_prev, n) } else { t_prev.clone() };
        let room = n - t_add.len();
        t_add.extend(largest(raw, &candidates, room));
    } else {
        t_add = t_prev.union(&candidates).copied().collect();
    }

    let x_add = solver.least_squares(y, &t_add)?.x;
    let n_hat: IndexSet = t_add.iter().copied().filter(|i| x_add[*i].abs() > alpha_del).collect();
    out.x_hat = solver.least_squares(y, &n_hat)?.x;
    out.x_add = Some(x_add);
    out.t_add = t_add;
    out.n_hat = n_hat;
    Ok(())
}

/// Dispatches one step of `config.algorithm` with known support `t_prev`.
pub fn recovery_step(solver: &mut L1Solver, y: &DVector<f64>, t_prev: &IndexSet, config: &RecoveryConfig) -> Result<RecoveryStep> {
    match config.algorithm {
        Algorithm::SimpleCS | Algorithm::GaussCS => simple_cs_step(solver, y, config),
        Algorithm::ModCS => modcs_step(solver, y, t_prev, config),
        Algorithm::ModCSAddLSDel => modcs_add_ls_del_step(solver, y, t_prev, config),
        Algorithm::LSCS => lscs_step(solver, y, t_prev, config),
    }
}

/// Initial support for the oracle start: true support minus its `sa`
/// smallest-magnitude elements (ties broken by index).
pub fn oracle_initial_support(x0: &SparseSignal, sa: usize) -> IndexSet {
    let mut members: Vec<usize> = x0.support.iter().copied().collect();
    members.sort_by(|a, b| x0.values[*a].abs().total_cmp(&x0.values[*b].abs()).then(a.cmp(b)));
    members.into_iter().skip(sa).collect()
}

/// Output of [`run_sequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRun {
    /// Support estimate entering `t = 1`.
    pub initial_support: IndexSet,
    /// One entry per reconstructed time; starts at `t = 0` only for the
    /// `SimpleCs` start.
    pub steps: Vec<RecoveryStep>,
}

/// Generates a trajectory, measures it and runs the recursive algorithm.
///
/// The signal and the noise are keyed by `trial_seed` (the seed in `params`
/// is ignored), so different algorithms run with the same `trial_seed` see
/// the same signals and measurements.
pub fn run_sequence(
    params: &ModelParams,
    sensing: &SensingSystem,
    config: &RecoveryConfig,
    horizon: usize,
    trial_seed: u64,
) -> Result<SequenceRun> {
    let mut solver = L1Solver::new(&sensing.a, config.solver)?;
    run_sequence_with(&mut solver, params, sensing, config, horizon, trial_seed)
}

/// [`run_sequence`] reusing a solver bound to `sensing.a`.
pub fn run_sequence_with(
    solver: &mut L1Solver,
    params: &ModelParams,
    sensing: &SensingSystem,
    config: &RecoveryConfig,
    horizon: usize,
    trial_seed: u64,
) -> Result<SequenceRun> {
    config.validate()?;
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    if params.m != sensing.m() || solver.matrix().shape() != sensing.a.shape() {
        return Err(Error::Dimension("signal dimension, sensing matrix and solver disagree".into()));
    }
    let params = ModelParams { seed: trial_seed, ..params.clone() };
    let mut state = init_state(&params)?;
    let x0 = state.signal();

    let mut steps = Vec::with_capacity(horizon + 1);
    let initial_support = match &config.init {
        InitMode::Oracle => oracle_initial_support(&x0, params.sa),
        InitMode::Given { support } => {
            if support.iter().any(|i| *i >= params.m) {
                return Err(Error::Config("initial support index out of range".into()));
            }
            support.clone()
        }
        InitMode::SimpleCs { n0 } => {
            let a0 = sensing
                .a0
                .as_ref()
                .ok_or_else(|| Error::Config("simple-CS start needs an initial matrix A0".into()))?;
            if a0.nrows() != *n0 {
                return Err(Error::Config(format!("A0 has {} rows, config says n0 = {n0}", a0.nrows())));
            }
            let mut solver0 = L1Solver::new(a0, config.solver)?;
            let cfg0 = RecoveryConfig { epsilon: sensing.epsilon0, ..config.clone() };
            let meas = measure(sensing, &x0, 0, trial_seed)?;
            let mut first = attempt(&mut solver0, &meas.y, &IndexSet::new(), &cfg0);
            first.t = 0;
            first.noise_norm = Some(meas.w.norm());
            first.attach_truth(&x0);
            let support = first.n_hat.clone();
            steps.push(first);
            support
        }
    };

    let mut known = initial_support.clone();
    for t in 1..=horizon {
        state = step(&state, &params)?;
        let x = state.signal();
        let meas = measure(sensing, &x, t, trial_seed)?;
        let mut s = attempt(solver, &meas.y, &known, config);
        s.t = t;
        s.noise_norm = Some(meas.w.norm());
        s.attach_truth(&x);
        known = s.n_hat.clone();
        steps.push(s);
    }
    Ok(SequenceRun { initial_support, steps })
}

/// Runs one step; on error carries the known support forward with the LS
/// estimate on it (or zero) as output.
fn attempt(solver: &mut L1Solver, y: &DVector<f64>, known: &IndexSet, config: &RecoveryConfig) -> RecoveryStep {
    match recovery_step(solver, y, known, config) {
        Ok(s) => s,
        Err(e) => {
            let m = solver.matrix().ncols();
            let x = solver.least_squares(y, known).map(|ls| ls.x).unwrap_or_else(|_| DVector::zeros(m));
            RecoveryStep {
                t: 0,
                algorithm: config.algorithm,
                x_hat: x.clone(),
                x_hat_raw: x,
                n_hat: known.clone(),
                t_prev: known.clone(),
                t_add: IndexSet::new(),
                t_add_truncated: false,
                x_add: None,
                converged: false,
                solver_iterations: 0,
                failure: Some(e.to_string()),
                noise_norm: None,
                diagnostics: None,
            }
        }
    }
}

/// Header of the per-step log.
pub const STEP_LOG_HEADER: &str =
    "t,algorithm,delta,delta_e,delta_add,delta_e_add,delta_tilde,delta_e_tilde,sq_error,converged";

/// Per-step diagnostic log as CSV (schema line, header, one row per step).
pub fn step_log_csv(steps: &[RecoveryStep]) -> String {
    let mut out = String::from("# recsparse step log v1\n");
    out.push_str(STEP_LOG_HEADER);
    out.push('\n');
    for s in steps {
        let opt = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
        match &s.diagnostics {
            Some(d) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:e},{}",
                s.t,
                s.algorithm.name(),
                d.delta,
                d.delta_e,
                opt(d.delta_add),
                opt(d.delta_e_add),
                d.delta_tilde,
                d.delta_e_tilde,
                d.sq_error,
                s.converged
            ),
            None => writeln!(out, "{},{},,,,,,,,{}", s.t, s.algorithm.name(), s.converged),
        }
        .expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{gaussian_matrix, NoiseModel};
    use crate::signal_model::Generator;

    fn params() -> ModelParams {
        ModelParams { m: 60, s0: 6, sa: 1, r: 1.0, d: 3, generator: Generator::Gen1, seed: 0 }
    }

    fn noiseless(n: usize) -> SensingSystem {
        SensingSystem::new(gaussian_matrix(n, 60, 11).unwrap(), None, NoiseModel::None).unwrap()
    }

    fn configs(eps: f64) -> Vec<RecoveryConfig> {
        vec![
            RecoveryConfig::simple_cs(Some(0.5), eps),
            RecoveryConfig { algorithm: Algorithm::GaussCS, ..RecoveryConfig::simple_cs(Some(0.5), eps) },
            RecoveryConfig::mod_cs(0.5, eps),
            RecoveryConfig::add_ls_del(Algorithm::ModCSAddLSDel, 0.1, 0.5, eps),
            RecoveryConfig::add_ls_del(Algorithm::LSCS, 0.1, 0.5, eps),
        ]
    }

    #[test]
    fn noiseless_oracle_runs_are_exact() {
        let sensing = noiseless(30);
        for cfg in configs(0.0) {
            let run = run_sequence(&params(), &sensing, &cfg, 20, 5).unwrap();
            assert_eq!(run.steps.len(), 20);
            for s in &run.steps {
                let d = s.diagnostics.as_ref().unwrap();
                assert!(d.sq_error < 1e-12 * d.signal_energy, "{:?} t={} err={}", cfg.algorithm, s.t, d.sq_error);
                assert_eq!((d.delta_tilde, d.delta_e_tilde), (0, 0), "{:?} t={}", cfg.algorithm, s.t);
            }
        }
    }

    #[test]
    fn feedback_identity_and_nesting() {
        let sensing = SensingSystem::new(gaussian_matrix(25, 60, 3).unwrap(), None, NoiseModel::Uniform { c: 0.05 }).unwrap();
        for cfg in configs(sensing.epsilon) {
            let run = run_sequence(&params(), &sensing, &cfg, 30, 9).unwrap();
            let mut prev = run.initial_support.clone();
            for s in &run.steps {
                if !matches!(cfg.algorithm, Algorithm::SimpleCS | Algorithm::GaussCS) {
                    assert_eq!(s.t_prev, prev);
                }
                if cfg.algorithm.uses_add_ls_del() {
                    assert!(s.t_prev.is_subset(&s.t_add) || s.t_add_truncated);
                    assert!(s.n_hat.is_subset(&s.t_add));
                }
                let d = s.diagnostics.as_ref().unwrap();
                assert_eq!(s.n_hat.len() + d.delta_tilde, d.support_size + d.delta_e_tilde);
                prev = s.n_hat.clone();
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let sensing = SensingSystem::new(gaussian_matrix(25, 60, 3).unwrap(), None, NoiseModel::Uniform { c: 0.05 }).unwrap();
        let cfg = RecoveryConfig::add_ls_del(Algorithm::LSCS, 0.025, 0.5, sensing.epsilon);
        let a = run_sequence(&params(), &sensing, &cfg, 15, 77).unwrap();
        let b = run_sequence(&params(), &sensing, &cfg, 15, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(step_log_csv(&a.steps), step_log_csv(&b.steps));
    }

    #[test]
    fn huge_threshold_empties_support() {
        let sensing = noiseless(30);
        let cfg = RecoveryConfig::mod_cs(1e6, 0.0);
        let run = run_sequence(&params(), &sensing, &cfg, 1, 1).unwrap();
        assert!(run.steps[0].n_hat.is_empty());
    }

    #[test]
    fn simple_cs_start_uses_initial_matrix() {
        let a = gaussian_matrix(30, 60, 1).unwrap();
        let a0 = gaussian_matrix(45, 60, 1).unwrap();
        let sensing = SensingSystem::new(a, Some(a0), NoiseModel::None).unwrap();
        let cfg = RecoveryConfig { init: InitMode::SimpleCs { n0: 45 }, ..RecoveryConfig::mod_cs(0.5, 0.0) };
        let run = run_sequence(&params(), &sensing, &cfg, 3, 2).unwrap();
        assert_eq!(run.steps.len(), 4);
        assert_eq!(run.steps[0].t, 0);
        assert!(run.steps[0].diagnostics.as_ref().unwrap().sq_error < 1e-16);
        let bad = RecoveryConfig { init: InitMode::SimpleCs { n0: 44 }, ..cfg };
        assert!(run_sequence(&params(), &sensing, &bad, 3, 2).is_err());
    }

    #[test]
    fn oracle_start_drops_smallest() {
        let mut v = DVector::zeros(8);
        v[1] = 3.0;
        v[4] = -0.5;
        v[6] = 1.0;
        let x = SparseSignal::from_values(v);
        assert_eq!(oracle_initial_support(&x, 1), [1, 6].into_iter().collect());
    }

    #[test]
    fn t_add_guard_caps_size() {
        let sensing = SensingSystem::new(gaussian_matrix(10, 60, 4).unwrap(), None, NoiseModel::Uniform { c: 0.2 }).unwrap();
        let mut solver = L1Solver::new(&sensing.a, SolverOptions::default()).unwrap();
        let y = DVector::from_fn(10, |i, _| (i as f64).cos());
        let t_prev: IndexSet = (0..8).collect();
        let cfg = RecoveryConfig::add_ls_del(Algorithm::ModCSAddLSDel, 0.0, 0.0, 0.01);
        let s = modcs_add_ls_del_step(&mut solver, &y, &t_prev, &cfg).unwrap();
        assert!(s.t_add.len() <= 10);
        assert!(t_prev.is_subset(&s.t_add));
    }

    #[test]
    fn config_validation() {
        let mut cfg = RecoveryConfig::mod_cs(0.5, 0.1);
        cfg.alpha = None;
        assert!(cfg.validate().is_err());
        let cfg = RecoveryConfig::add_ls_del(Algorithm::LSCS, -1.0, 0.5, 0.1);
        assert!(cfg.validate().is_err());
        assert_eq!(Algorithm::parse("mod-cs-add-ls-del").unwrap(), Algorithm::ModCSAddLSDel);
        assert_eq!(Algorithm::parse("LSCS").unwrap(), Algorithm::LSCS);
        assert!(Algorithm::parse("kf-cs").is_err());
    }

    #[test]
    fn log_has_one_row_per_step() {
        let sensing = noiseless(30);
        let run = run_sequence(&params(), &sensing, &RecoveryConfig::mod_cs(0.5, 0.0), 4, 3).unwrap();
        let log = step_log_csv(&run.steps);
        assert_eq!(log.lines().count(), 2 + 4);
        assert!(log.lines().nth(2).unwrap().starts_with("1,mod_cs,1,0,,,0,0,"));
    }
}
