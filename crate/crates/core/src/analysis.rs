//! Error-bound constants and executable sufficient-condition checks for the
//! stability of the recursive algorithms.
//!
//! Conditions involve restricted isometry (`delta_S`) and restricted
//! orthogonality (`theta_{S1,S2}`) constants, obtained from a
//! [`ConstantProvider`]. Sampled estimates are lower bounds, so a condition
//! evaluated with them can be shown to fail but never to hold; such
//! conditions are reported as [`Status::Undetermined`].

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::{run_sequence_with, Algorithm, RecoveryConfig, RecoveryStep};
use crate::l1_solver::L1Solver;
use crate::rng::{derive_seed, Purpose};
use crate::sensing::{
    binomial, gaussian_matrix, ric_exhaustive, ric_sampled, roc, NoiseModel, SensingSystem, SweepMode,
};
use crate::signal_model::{Generator, ModelParams, SparseSignal};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Value of `C1` at `delta = (sqrt 2 - 1) / 2`, rounded as used in the
/// thresholds and rate conditions.
pub const C1_AT_HALF: f64 = 8.79;

/// `(sqrt 2 - 1) / 2`.
pub fn half_rip_limit() -> f64 {
    (SQRT2 - 1.0) / 2.0
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0) {
        return Err(Error::Argument(format!("RIC must be nonnegative, got {delta}")));
    }
    if delta >= SQRT2 - 1.0 {
        return Err(Error::BoundUndefined(format!("delta = {delta} is not below sqrt(2) - 1")));
    }
    Ok(())
}

/// `C1(delta) = 4 sqrt(1 + delta) / (1 - (sqrt 2 + 1) delta)`.
pub fn c1(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(4.0 * (1.0 + delta).sqrt() / (1.0 - (SQRT2 + 1.0) * delta))
}

/// `C2(delta) = 2 (1 + (sqrt 2 - 1) delta) / (1 - (sqrt 2 + 1) delta)`.
pub fn c2(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(2.0 * (1.0 + (SQRT2 - 1.0) * delta) / (1.0 - (SQRT2 + 1.0) * delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    /// `C'(|T|, |Delta|) = C1 + sqrt 2 C2 sqrt(|T| / |Delta|)`.
    pub c_prime: f64,
    /// `C''(|T|, |Delta|) = 2 C2 sqrt(|T| / |Delta|)`.
    pub c_dprime: f64,
}

/// Constants of the CS-residual error bound, all evaluated at `delta`
/// (the RIC of order `2 |Delta|`). With `delta_size = 0` the miss term
/// vanishes: `C' = C1` and `C'' = 0`.
pub fn bound_constants(delta: f64, t_size: usize, delta_size: usize) -> Result<BoundConstants> {
    let (k1, k2) = (c1(delta)?, c2(delta)?);
    let (c_prime, c_dprime) = if delta_size == 0 {
        (k1, 0.0)
    } else {
        let ratio = (t_size as f64 / delta_size as f64).sqrt();
        (k1 + SQRT2 * k2 * ratio, 2.0 * k2 * ratio)
    };
    Ok(BoundConstants { delta, c1: k1, c2: k2, c_prime, c_dprime })
}

fn check_sizes(n_size: usize, delta_size: usize, epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0) {
        return Err(Error::Argument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    if 3 * delta_size > n_size {
        return Err(Error::NotApplicable(format!("|Delta| = {delta_size} exceeds |N| / 3 with |N| = {n_size}")));
    }
    Ok(())
}

/// `C1(delta) epsilon`, the modified-CS error bound, with `delta` the RIC of
/// order `|N| + |Delta| + |Delta_e|`.
pub fn modcs_error_bound(n_size: usize, delta_size: usize, _delta_e_size: usize, delta: f64, epsilon: f64) -> Result<f64> {
    check_sizes(n_size, delta_size, epsilon)?;
    match c1(delta) {
        Ok(c) => Ok(c * epsilon),
        Err(Error::BoundUndefined(msg)) => Err(Error::NotApplicable(msg)),
        Err(e) => Err(e),
    }
}

/// Sharper modified-CS bound `4 sqrt(1 + delta) / (1 - delta - sqrt 2 theta)
/// epsilon` with `delta = delta_{|T| + 2|Delta|}` and
/// `theta = theta_{|T|, |Delta|}`.
pub fn modcs_error_bound_sharp(n_size: usize, delta_size: usize, delta: f64, theta: f64, epsilon: f64) -> Result<f64> {
    check_sizes(n_size, delta_size, epsilon)?;
    if !(delta >= 0.0 && theta >= 0.0) {
        return Err(Error::Argument("delta and theta must be nonnegative".into()));
    }
    let denom = 1.0 - delta - SQRT2 * theta;
    if denom <= 0.0 {
        return Err(Error::NotApplicable(format!("delta + sqrt(2) theta = {} is not below 1", 1.0 - denom)));
    }
    Ok(4.0 * (1.0 + delta).sqrt() / denom * epsilon)
}

/// A RIC or ROC value and whether it is exact (exhaustive) or a lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub exact: bool,
}

/// Source of `delta_S` and `theta_{S1,S2}` values.
pub trait ConstantProvider {
    fn delta(&mut self, s: usize) -> Result<Estimate>;
    fn theta(&mut self, s1: usize, s2: usize) -> Result<Estimate>;
}

/// User-supplied constants: defaults plus per-order overrides.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixedConstants {
    pub default_delta: f64,
    pub default_theta: f64,
    pub deltas: HashMap<usize, f64>,
    pub thetas: HashMap<(usize, usize), f64>,
    /// Whether the values are exact; `false` treats them as lower bounds.
    pub exact: bool,
}

impl FixedConstants {
    pub fn uniform(delta: f64, theta: f64) -> Self {
        FixedConstants { default_delta: delta, default_theta: theta, exact: true, ..Default::default() }
    }

    pub fn with_delta(mut self, s: usize, value: f64) -> Self {
        self.deltas.insert(s, value);
        self
    }

    pub fn with_theta(mut self, s1: usize, s2: usize, value: f64) -> Self {
        self.thetas.insert((s1, s2), value);
        self
    }

    pub fn lower_bounds(mut self) -> Self {
        self.exact = false;
        self
    }
}

impl ConstantProvider for FixedConstants {
    fn delta(&mut self, s: usize) -> Result<Estimate> {
        let value = if s == 0 { 0.0 } else { *self.deltas.get(&s).unwrap_or(&self.default_delta) };
        Ok(Estimate { value, exact: self.exact || s == 0 })
    }

    fn theta(&mut self, s1: usize, s2: usize) -> Result<Estimate> {
        if s1 == 0 || s2 == 0 {
            return Ok(Estimate { value: 0.0, exact: true });
        }
        let value = *self.thetas.get(&(s1, s2)).unwrap_or(&self.default_theta);
        Ok(Estimate { value, exact: self.exact })
    }
}

/// How [`MatrixConstants`] computes values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EstimateMode {
    Exhaustive { budget: u128 },
    Sampled { samples: usize, seed: u64 },
    /// Exhaustive when the subset count is within `budget`, sampled otherwise.
    Auto { budget: u128, samples: usize, seed: u64 },
}

/// Constants computed from a matrix, cached per order.
#[derive(Debug, Clone)]
pub struct MatrixConstants {
    a: DMatrix<f64>,
    mode: EstimateMode,
    deltas: HashMap<usize, Estimate>,
    thetas: HashMap<(usize, usize), Estimate>,
}

impl MatrixConstants {
    pub fn new(a: DMatrix<f64>, mode: EstimateMode) -> Self {
        MatrixConstants { a, mode, deltas: HashMap::new(), thetas: HashMap::new() }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl ConstantProvider for MatrixConstants {
    fn delta(&mut self, s: usize) -> Result<Estimate> {
        if let Some(e) = self.deltas.get(&s) {
            return Ok(*e);
        }
        let est = match self.mode {
            EstimateMode::Exhaustive { budget } => ric_exhaustive(&self.a, s, budget)?,
            EstimateMode::Sampled { samples, seed } => ric_sampled(&self.a, s, samples, seed)?,
            EstimateMode::Auto { budget, samples, seed } => {
                if binomial(self.a.ncols(), s) <= budget {
                    ric_exhaustive(&self.a, s, budget)?
                } else {
                    ric_sampled(&self.a, s, samples, seed)?
                }
            }
        };
        let e = Estimate { value: est.value, exact: est.is_exact() };
        self.deltas.insert(s, e);
        Ok(e)
    }

    fn theta(&mut self, s1: usize, s2: usize) -> Result<Estimate> {
        if let Some(e) = self.thetas.get(&(s1, s2)) {
            return Ok(*e);
        }
        let est = match self.mode {
            EstimateMode::Exhaustive { budget } => roc(&self.a, s1, s2, SweepMode::Exhaustive { budget })?,
            EstimateMode::Sampled { samples, seed } => roc(&self.a, s1, s2, SweepMode::Sampled { samples, seed })?,
            EstimateMode::Auto { budget, samples, seed } => match roc(&self.a, s1, s2, SweepMode::Exhaustive { budget }) {
                Err(Error::BudgetExceeded { .. }) => roc(&self.a, s1, s2, SweepMode::Sampled { samples, seed })?,
                other => other?,
            },
        };
        let e = Estimate { value: est.value, exact: est.is_exact() };
        self.thetas.insert((s1, s2), e);
        Ok(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// Modified-CS.
    T1,
    /// Modified-CS with add-LS-del.
    T2,
    /// Add-LS-del with the spread-out LS error assumption.
    C3,
    /// Generalization of `C3` to misses below `d0 r`.
    C4 { d0: usize },
    /// LS-CS.
    T3,
}

impl Theorem {
    pub fn label(&self) -> String {
        match self {
            Theorem::T1 => "theorem1".into(),
            Theorem::T2 => "theorem2".into(),
            Theorem::C3 => "corollary3".into(),
            Theorem::C4 { d0 } => format!("corollary4(d0={d0})"),
            Theorem::T3 => "theorem3".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Fails,
    Undetermined,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Holds => "holds",
            Status::Fails => "fails",
            Status::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub requirement: String,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rel {
    Lt,
    Le,
    Ge,
}

impl Rel {
    fn symbol(&self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Ge => ">=",
        }
    }
}

/// Every quantity entering a condition is nondecreasing in the RIC/ROC
/// values (and rates are compared against thresholds that grow with them),
/// so a lower-bound input can only prove failure.
fn condition(name: &str, lhs_label: &str, lhs: f64, rel: Rel, rhs: f64, exact: bool) -> Condition {
    let ok = match rel {
        Rel::Lt => lhs < rhs,
        Rel::Le => lhs <= rhs,
        Rel::Ge => lhs >= rhs,
    };
    let status = match (ok, exact) {
        (false, _) => Status::Fails,
        (true, true) => Status::Holds,
        (true, false) => Status::Undetermined,
    };
    Condition {
        name: name.into(),
        requirement: format!("{lhs_label} {} {}", rel.symbol(), fmt_num(rhs)),
        lhs: Some(lhs),
        rhs: Some(rhs),
        status,
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6}")
    }
}

/// Parameters and empirical inputs of a condition check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckInputs {
    pub s0: usize,
    pub sa: usize,
    pub r: f64,
    pub epsilon: f64,
    /// Addition threshold (unused by the modified-CS check).
    pub alpha_add: f64,
    /// Number of magnitude levels of the signal model, when known.
    pub d: Option<usize>,
    pub d0: Option<usize>,
    /// Allowed false additions per step (generalized corollary).
    pub f: Option<usize>,
    /// Spread factor of the add-step LS error.
    pub zeta: Option<f64>,
    /// Largest per-step false-addition count measured in pilot runs.
    pub max_false_adds: Option<usize>,
    /// Whether the `t = 0` support estimate is known to satisfy the
    /// initial-time condition (true for the oracle start).
    pub oracle_start: bool,
}

impl CheckInputs {
    pub fn new(s0: usize, sa: usize, r: f64, epsilon: f64) -> Self {
        CheckInputs {
            s0,
            sa,
            r,
            epsilon,
            alpha_add: 0.0,
            d: None,
            d0: None,
            f: None,
            zeta: None,
            max_false_adds: None,
            oracle_start: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.s0 == 0 || self.sa == 0 {
            return Err(Error::Argument("s0 and sa must be positive".into()));
        }
        if !(self.r > 0.0 && self.epsilon >= 0.0 && self.alpha_add >= 0.0) {
            return Err(Error::Argument("need r > 0, epsilon >= 0 and alpha_add >= 0".into()));
        }
        if let Some(z) = self.zeta {
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::Argument(format!("zeta must be positive, got {z}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportConstants {
    /// Single threshold (modified-CS).
    pub alpha: Option<f64>,
    pub alpha_add: Option<f64>,
    /// Prescribed deletion threshold.
    pub alpha_del: Option<f64>,
    /// `G`, `G1`, its generalized or LS-CS counterpart.
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub k3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedBounds {
    /// Bound on `|N_t \ N_hat_t|`.
    pub misses: usize,
    /// Bound on `|N_hat_t \ N_t|`.
    pub extras: usize,
    /// Bound on the final estimate error `||x_t - x_hat_t||`.
    pub final_error: f64,
    /// Bound on the l1-step error `||x_t - x_hat_modcs||` (not for LS-CS).
    pub modcs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub theorem: Theorem,
    pub inputs: CheckInputs,
    pub constants: ReportConstants,
    pub conditions: Vec<Condition>,
    pub bounds: ImpliedBounds,
    /// Whether every RIC/ROC value used was exact.
    pub constants_exact: bool,
}

impl ConditionReport {
    pub fn status(&self) -> Status {
        if self.conditions.iter().any(|c| c.status == Status::Fails) {
            Status::Fails
        } else if self.conditions.iter().all(|c| c.status == Status::Holds) {
            Status::Holds
        } else {
            Status::Undetermined
        }
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let i = &self.inputs;
        let _ = writeln!(out, "{}", self.theorem.label());
        let _ = write!(out, "inputs: s0={} sa={} r={} epsilon={} alpha_add={}", i.s0, i.sa, i.r, i.epsilon, i.alpha_add);
        if let Some(d0) = i.d0 {
            let _ = write!(out, " d0={d0}");
        }
        if let Some(f) = i.f {
            let _ = write!(out, " f={f}");
        }
        if let Some(z) = i.zeta {
            let _ = write!(out, " zeta={z}");
        }
        out.push('\n');
        let c = &self.constants;
        let named = [
            ("alpha", c.alpha),
            ("alpha_add", c.alpha_add),
            ("alpha_del", c.alpha_del),
            ("G1", c.g1),
            ("G2", c.g2),
            ("k3", c.k3),
        ];
        let consts: Vec<String> =
            named.iter().filter_map(|(k, v)| v.map(|v| format!("{k}={}", fmt_num(v)))).collect();
        let _ = write!(out, "constants: {}", consts.join(" "));
        if let (Some(k1), Some(k2)) = (c.k1, c.k2) {
            let _ = write!(out, " k1={k1} k2={k2}");
        }
        out.push('\n');
        let w_name = self.conditions.iter().map(|c| c.name.len()).max().unwrap_or(0).max(9);
        let w_req = self.conditions.iter().map(|c| c.requirement.len()).max().unwrap_or(0).max(11);
        let _ = writeln!(out, "{:<w_name$}  {:<w_req$}  {:>14}  status", "condition", "requirement", "value");
        for cond in &self.conditions {
            let value = cond.lhs.map_or("-".to_string(), fmt_num);
            let _ = writeln!(out, "{:<w_name$}  {:<w_req$}  {:>14}  {}", cond.name, cond.requirement, value, cond.status.as_str());
        }
        let b = &self.bounds;
        let _ = write!(out, "bounds: misses<={} extras<={} final_error<={}", b.misses, b.extras, fmt_num(b.final_error));
        if let Some(e) = b.modcs_error {
            let _ = write!(out, " modcs_error<={}", fmt_num(e));
        }
        out.push('\n');
        if !self.constants_exact {
            out.push_str("note: sampled RIC/ROC values are lower bounds; conditions that pass with them are undetermined\n");
        }
        let _ = writeln!(out, "overall: {}", self.status().as_str());
        out
    }

    /// One CSV row per condition.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theorem,condition,requirement,lhs,rhs,status\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for c in &self.conditions {
            let _ = writeln!(
                out,
                "{},{},\"{}\",{},{},{}",
                self.theorem.label(),
                c.name,
                c.requirement,
                opt(c.lhs),
                opt(c.rhs),
                c.status.as_str()
            );
        }
        out
    }
}

fn false_additions_condition(inputs: &CheckInputs, allowed: usize) -> Condition {
    let requirement = format!("max false additions per step <= {allowed}");
    match inputs.max_false_adds {
        Some(v) => Condition {
            name: "false_additions".into(),
            requirement,
            lhs: Some(v as f64),
            rhs: Some(allowed as f64),
            status: if v <= allowed { Status::Holds } else { Status::Fails },
        },
        None => Condition {
            name: "false_additions".into(),
            requirement,
            lhs: None,
            rhs: Some(allowed as f64),
            status: Status::Undetermined,
        },
    }
}

fn initial_condition(inputs: &CheckInputs, level: usize) -> Condition {
    Condition {
        name: "initial_support".into(),
        requirement: format!("t=0 misses within S_0({level}), no extras"),
        lhs: None,
        rhs: None,
        status: if inputs.oracle_start { Status::Holds } else { Status::Undetermined },
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Conditions for modified-CS stability with `alpha = 8.79 epsilon`.
pub fn check_theorem1(inputs: &CheckInputs, provider: &mut dyn ConstantProvider) -> Result<ConditionReport> {
    inputs.validate()?;
    let (s0, sa, eps) = (inputs.s0, inputs.sa, inputs.epsilon);
    let alpha = C1_AT_HALF * eps;
    let g = (alpha + C1_AT_HALF * eps) / 2.0;
    let d = provider.delta(s0 + 3 * sa)?;
    let conditions = vec![
        condition("delta_modcs", &format!("delta_{}", s0 + 3 * sa), d.value, Rel::Lt, half_rip_limit(), d.exact),
        condition("support_ratio", "sa", sa as f64, Rel::Le, s0 as f64 / 6.0, true),
        condition("rate", "r", inputs.r, Rel::Ge, g, true),
        initial_condition(inputs, 2),
    ];
    Ok(ConditionReport {
        theorem: Theorem::T1,
        inputs: inputs.clone(),
        constants: ReportConstants { alpha: Some(alpha), g1: Some(g), ..Default::default() },
        conditions,
        bounds: ImpliedBounds { misses: 2 * sa, extras: 0, final_error: C1_AT_HALF * eps, modcs_error: Some(C1_AT_HALF * eps) },
        constants_exact: d.exact,
    })
}

/// Conditions for modified-CS with add-LS-del.
pub fn check_theorem2(inputs: &CheckInputs, provider: &mut dyn ConstantProvider) -> Result<ConditionReport> {
    let zeta = (inputs.sa as f64).sqrt();
    let mut report = add_ls_del_report(inputs, provider, 2, inputs.sa, zeta)?;
    report.theorem = Theorem::T2;
    report.inputs = inputs.clone();
    report.constants.k1 = None;
    report.constants.k2 = None;
    report.constants.k3 = None;
    Ok(report)
}

/// [`check_theorem2`] under the spread-out LS error assumption with factor
/// `inputs.zeta`. Identical to [`check_corollary4`] with `d0 = 2`, `f = sa`.
pub fn check_corollary3(inputs: &CheckInputs, provider: &mut dyn ConstantProvider) -> Result<ConditionReport> {
    let zeta = inputs.zeta.ok_or_else(|| Error::Argument("zeta is required".into()))?;
    let mut stored = inputs.clone();
    stored.d0 = Some(2);
    stored.f = Some(inputs.sa);
    let mut report = add_ls_del_report(&stored, provider, 2, inputs.sa, zeta)?;
    report.theorem = Theorem::C3;
    Ok(report)
}

/// Generalized add-LS-del conditions: misses stay below level `d0`, with at
/// most `f` false additions per step.
pub fn check_corollary4(inputs: &CheckInputs, provider: &mut dyn ConstantProvider) -> Result<ConditionReport> {
    let zeta = inputs.zeta.ok_or_else(|| Error::Argument("zeta is required".into()))?;
    let d0 = inputs.d0.ok_or_else(|| Error::Argument("d0 is required".into()))?;
    let f = inputs.f.ok_or_else(|| Error::Argument("f is required".into()))?;
    if d0 == 0 || inputs.d.is_some_and(|d| d0 > d) {
        return Err(Error::Argument(format!("d0 = {d0} must lie in 1..=d")));
    }
    let mut report = add_ls_del_report(inputs, provider, d0, f, zeta)?;
    report.theorem = Theorem::C4 { d0 };
    Ok(report)
}

/// `k1 = max(1, 2 d0 - 2)`, `k2 = max(0, 2 d0 - 3)`,
/// `k3 = sqrt(sum_{j<d0} j^2 + sum_{j<d0-1} j^2)`.
pub fn k_constants(d0: usize) -> (usize, usize, f64) {
    let sq = |n: usize| (1..=n).map(|j| (j * j) as f64).sum::<f64>();
    let k1 = (2 * d0).saturating_sub(2).max(1);
    let k2 = (2 * d0).saturating_sub(3);
    let k3 = (sq(d0.saturating_sub(1)) + sq(d0.saturating_sub(2))).sqrt();
    (k1, k2, k3)
}

fn add_ls_del_report(
    inputs: &CheckInputs,
    provider: &mut dyn ConstantProvider,
    d0: usize,
    f: usize,
    zeta: f64,
) -> Result<ConditionReport> {
    inputs.validate()?;
    let (s0, sa, eps, r) = (inputs.s0, inputs.sa, inputs.epsilon, inputs.r);
    let (k1, k2, k3) = k_constants(d0);
    let sa_f = sa as f64;

    let d_modcs = provider.delta(s0 + sa * (1 + k1))?;
    let d_ls = provider.delta(s0 + sa + f)?;
    let th = provider.theta(s0 + sa + f, k2 * sa)?;
    let th_final = provider.theta(s0, (2 * d0).saturating_sub(2) * sa)?;

    let alpha_del = (2.0 / sa_f).sqrt() * zeta * eps + 2.0 * k3 * th.value * zeta * r;
    let g1 = (inputs.alpha_add + C1_AT_HALF * eps) / d0 as f64;
    let g2 = ratio(2.0 * SQRT2 * zeta * eps, sa_f.sqrt() * (d0 as f64 - 4.0 * k3 * th.value * zeta));
    let theta_rhs = ratio(d0 as f64, 8.0 * k3 * zeta);
    let exact_all = d_modcs.exact && d_ls.exact && th.exact && th_final.exact;

    let conditions = vec![
        false_additions_condition(inputs, f),
        condition("delta_modcs", &format!("delta_{}", s0 + sa * (1 + k1)), d_modcs.value, Rel::Lt, half_rip_limit(), d_modcs.exact),
        condition("support_ratio", "sa", sa_f, Rel::Le, s0 as f64 / (3 * k1) as f64, true),
        condition("delta_ls", &format!("delta_{}", s0 + sa + f), d_ls.value, Rel::Lt, 0.5, d_ls.exact),
        condition("theta", &format!("theta_{},{}", s0 + sa + f, k2 * sa), th.value, Rel::Lt, theta_rhs, th.exact),
        condition("rate", "r", r, Rel::Ge, g1.max(g2), th.exact),
        initial_condition(inputs, d0),
    ];
    let level_sq: f64 = (1..d0).map(|j| (j * j) as f64).sum();
    let final_error = SQRT2 * eps + (2.0 * level_sq * sa_f).sqrt() * (2.0 * th_final.value + 1.0) * r;
    Ok(ConditionReport {
        theorem: Theorem::C4 { d0 },
        inputs: inputs.clone(),
        constants: ReportConstants {
            alpha: None,
            alpha_add: Some(inputs.alpha_add),
            alpha_del: Some(alpha_del),
            g1: Some(g1),
            g2: Some(g2),
            k1: Some(k1),
            k2: Some(k2),
            k3: Some(k3),
        },
        conditions,
        bounds: ImpliedBounds {
            misses: (2 * d0).saturating_sub(2) * sa,
            extras: 0,
            final_error,
            modcs_error: Some(C1_AT_HALF * eps),
        },
        constants_exact: exact_all,
    })
}

/// Conditions for LS-CS stability. The terms involving `C'` and `C''` are
/// maximized by an explicit scan over `|Delta| = 1..=2 sa`.
pub fn check_theorem3(inputs: &CheckInputs, provider: &mut dyn ConstantProvider) -> Result<ConditionReport> {
    inputs.validate()?;
    let (s0, sa, eps, r) = (inputs.s0, inputs.sa, inputs.epsilon, inputs.r);
    let sa_f = sa as f64;
    let d_cs = provider.delta(4 * sa)?;
    let d_ls = provider.delta(s0 + 2 * sa)?;
    let th = provider.theta(s0 + 2 * sa, sa)?;
    let mut exact = d_cs.exact && d_ls.exact && th.exact;

    let mut max_coupling: f64 = 0.0;
    let mut g1: f64 = 0.0;
    let mut final_error: f64 = 0.0;
    for k in 1..=2 * sa {
        let dk = provider.delta(2 * k)?;
        let tk = provider.theta(s0, k)?;
        exact &= dk.exact && tk.exact;
        let (cp, cdp) = match bound_constants(dk.value, s0, k) {
            Ok(b) => (b.c_prime, b.c_dprime),
            Err(Error::BoundUndefined(_)) => (f64::INFINITY, f64::INFINITY),
            Err(e) => return Err(e),
        };
        let coupling = if tk.value == 0.0 { 0.0 } else { tk.value * cdp };
        max_coupling = max_coupling.max(coupling);
        g1 = g1.max(ratio(inputs.alpha_add + cp * eps, 2.0 - 3.0 * coupling * sa_f.sqrt()));
        final_error = final_error.max(cp * eps + (coupling + 1.0) * (2.0 * sa_f).sqrt() * r);
    }
    let g2 = ratio(SQRT2 * eps, 1.0 - 2.0 * sa_f.sqrt() * th.value);
    let alpha_del = SQRT2 * eps + 2.0 * sa_f.sqrt() * th.value * r;
    let conditions = vec![
        false_additions_condition(inputs, sa),
        condition("delta_cs", &format!("delta_{}", 4 * sa), d_cs.value, Rel::Lt, half_rip_limit(), d_cs.exact),
        condition("delta_ls", &format!("delta_{}", s0 + 2 * sa), d_ls.value, Rel::Lt, 0.5, d_ls.exact),
        condition(
            "theta_cdprime",
            &format!("max_(k<={}) theta_{},k C''({},k)", 2 * sa, s0, s0),
            max_coupling,
            Rel::Lt,
            1.0 / (3.0 * sa_f.sqrt()),
            exact,
        ),
        condition("theta", &format!("theta_{},{}", s0 + 2 * sa, sa), th.value, Rel::Lt, 1.0 / (4.0 * sa_f.sqrt()), th.exact),
        condition("rate", "r", r, Rel::Ge, g1.max(g2), exact),
        initial_condition(inputs, 2),
    ];
    Ok(ConditionReport {
        theorem: Theorem::T3,
        inputs: inputs.clone(),
        constants: ReportConstants {
            alpha_add: Some(inputs.alpha_add),
            alpha_del: Some(alpha_del),
            g1: Some(g1),
            g2: Some(g2),
            ..Default::default()
        },
        conditions,
        bounds: ImpliedBounds { misses: 2 * sa, extras: 0, final_error, modcs_error: None },
        constants_exact: exact,
    })
}

/// `||e||_inf sqrt(sa) / ||e||`, or `None` for a zero vector.
pub fn zeta_ratio(e: &[f64], sa: usize) -> Option<f64> {
    let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    let inf = e.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Some(inf * (sa as f64).sqrt() / norm)
}

/// Parameters of the spread-factor estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaSpec {
    pub m: usize,
    pub s0: usize,
    pub sa: usize,
    pub r: f64,
    pub d: usize,
    pub n: usize,
    pub c: f64,
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Solver noise bound; defaults to `c sqrt(n)`.
    pub epsilon: Option<f64>,
}

impl ZetaSpec {
    /// Number of measurements `ceil(0.3861 s0 log2 m)`.
    pub fn default_n(m: usize, s0: usize) -> usize {
        (0.3861 * s0 as f64 * (m as f64).log2()).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaEstimate {
    pub zeta: f64,
    /// Number of (trial, t) pairs with a nonzero add-step error.
    pub samples: usize,
    /// Largest ratio per trial.
    pub per_trial_max: Vec<f64>,
}

/// Largest spread ratio of the add-step LS error over time and trials of
/// add-LS-del runs (thresholds `c / 2` and `r / 2`, matrix fixed).
pub fn estimate_zeta(spec: &ZetaSpec) -> Result<ZetaEstimate> {
    if spec.trials == 0 || spec.horizon == 0 {
        return Err(Error::Argument("trials and horizon must be at least 1".into()));
    }
    let params = ModelParams {
        m: spec.m,
        s0: spec.s0,
        sa: spec.sa,
        r: spec.r,
        d: spec.d,
        generator: Generator::Gen1,
        seed: spec.seed,
    };
    params.validate()?;
    let a = gaussian_matrix(spec.n, spec.m, derive_seed(spec.seed, 0, Purpose::SensingMatrix))?;
    let noise = NoiseModel::Uniform { c: spec.c };
    let sensing = SensingSystem::new(a, None, noise)?;
    let epsilon = spec.epsilon.unwrap_or(sensing.epsilon);
    let config = RecoveryConfig::add_ls_del(Algorithm::ModCSAddLSDel, spec.c / 2.0, spec.r / 2.0, epsilon);
    let solver = L1Solver::new(&sensing.a, config.solver)?;

    let per_trial: Vec<(f64, usize)> = (0..spec.trials)
        .into_par_iter()
        .map_init(
            || solver.clone(),
            |solver, k| -> Result<(f64, usize)> {
                let seed = derive_seed(spec.seed, k as u64, Purpose::TrialSeed);
                let run = run_sequence_with(solver, &params, &sensing, &config, spec.horizon, seed)?;
                let truth = crate::signal_model::trajectory(&ModelParams { seed, ..params.clone() }, spec.horizon)?;
                let (mut best, mut samples) = (0.0f64, 0);
                for step in &run.steps {
                    let Some(x_add) = &step.x_add else { continue };
                    let x = truth[step.t].signal();
                    let e: Vec<f64> = step.t_add.iter().map(|&i| x.values[i] - x_add[i]).collect();
                    if let Some(z) = zeta_ratio(&e, spec.sa) {
                        samples += 1;
                        best = best.max(z);
                    }
                }
                Ok((best, samples))
            },
        )
        .collect::<Result<_>>()?;
    let per_trial_max: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
    let samples = per_trial.iter().map(|p| p.1).sum();
    let zeta = per_trial_max.iter().copied().fold(0.0, f64::max);
    Ok(ZetaEstimate { zeta, samples, per_trial_max })
}

/// Largest per-step false-addition count over pilot runs of `config`.
pub fn max_false_additions(
    params: &ModelParams,
    sensing: &SensingSystem,
    config: &RecoveryConfig,
    trials: usize,
    horizon: usize,
    seed: u64,
) -> Result<usize> {
    if !config.algorithm.uses_add_ls_del() {
        return Err(Error::Argument("false additions are defined for add-LS-del algorithms".into()));
    }
    let mut solver = L1Solver::new(&sensing.a, config.solver)?;
    let mut worst = 0;
    for k in 0..trials {
        let trial_seed = derive_seed(seed, k as u64, Purpose::TrialSeed);
        let run = run_sequence_with(&mut solver, params, sensing, config, horizon, trial_seed)?;
        for s in &run.steps {
            if let Some(fa) = s.diagnostics.as_ref().and_then(|d| d.false_additions) {
                worst = worst.max(fa);
            }
        }
    }
    Ok(worst)
}

/// Thresholds and noise level of the step being verified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaContext {
    pub epsilon: f64,
    /// Realized `||w||` of the step.
    pub noise_norm: f64,
    pub alpha: Option<f64>,
    pub alpha_add: Option<f64>,
    pub alpha_del: Option<f64>,
    /// Added to every lower magnitude bound `b1` to keep it strict.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaOutcome {
    /// A hypothesis does not hold (or could not be confirmed).
    Vacuous,
    Held,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: String,
    pub outcome: LemmaOutcome,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRecord {
    pub t: usize,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaRecord {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| c.outcome == LemmaOutcome::Violated).count()
    }

    pub fn confirmed(&self) -> usize {
        self.checks.iter().filter(|c| c.outcome == LemmaOutcome::Held).count()
    }
}

fn outcome(hypotheses: bool, conclusion: bool) -> LemmaOutcome {
    match (hypotheses, conclusion) {
        (false, _) => LemmaOutcome::Vacuous,
        (true, true) => LemmaOutcome::Held,
        (true, false) => LemmaOutcome::Violated,
    }
}

/// Checks, on one reconstructed step, every support-estimation lemma whose
/// hypotheses hold numerically: detection of large coefficients by the
/// l1 step, no false deletion of large coefficients and deletion of every
/// zero element of the added support.
pub fn verify_lemma_conditions(
    step: &RecoveryStep,
    truth: &SparseSignal,
    ctx: &LemmaContext,
    provider: &mut dyn ConstantProvider,
) -> Result<LemmaRecord> {
    let n = &truth.support;
    let x = &truth.values;
    let eps = ctx.epsilon;
    let noise_ok = ctx.noise_norm <= eps;
    let mut checks = Vec::new();

    let t = &step.t_prev;
    let missing: Vec<usize> = n.difference(t).copied().collect();
    let extras = t.difference(n).count();
    let modcs_hyp = |provider: &mut dyn ConstantProvider| -> Result<bool> {
        let d = provider.delta(n.len() + missing.len() + extras)?;
        Ok(noise_ok && d.exact && d.value < half_rip_limit() && 3 * missing.len() <= n.len())
    };

    match step.algorithm {
        Algorithm::ModCS => {
            let alpha = ctx.alpha.ok_or_else(|| Error::Argument("alpha is required".into()))?;
            let hyp = modcs_hyp(provider)?;
            let b1 = alpha + C1_AT_HALF * eps + ctx.margin;
            let detected = n.iter().filter(|i| x[**i].abs() >= b1).all(|i| step.n_hat.contains(i));
            checks.push(LemmaCheck {
                lemma: "modcs_detection".into(),
                outcome: outcome(hyp, detected),
                detail: format!("b1={b1}"),
            });
            let deleted = step.n_hat.is_subset(n);
            checks.push(LemmaCheck {
                lemma: "modcs_deletion".into(),
                outcome: outcome(hyp && alpha >= C1_AT_HALF * eps, deleted),
                detail: format!("alpha={alpha}"),
            });
        }
        Algorithm::ModCSAddLSDel | Algorithm::LSCS => {
            let alpha_add = ctx.alpha_add.ok_or_else(|| Error::Argument("alpha_add is required".into()))?;
            let alpha_del = ctx.alpha_del.ok_or_else(|| Error::Argument("alpha_del is required".into()))?;
            if step.algorithm == Algorithm::ModCSAddLSDel {
                let hyp = modcs_hyp(provider)?;
                let b1 = alpha_add + C1_AT_HALF * eps + ctx.margin;
                let detected = missing.iter().filter(|i| x[**i].abs() >= b1).all(|i| step.t_add.contains(i));
                checks.push(LemmaCheck { lemma: "detection".into(), outcome: outcome(hyp, detected), detail: format!("b1={b1}") });
            }
            let t_add = &step.t_add;
            let miss_add: Vec<usize> = n.difference(t_add).copied().collect();
            let miss_norm = miss_add.iter().map(|i| x[*i] * x[*i]).sum::<f64>().sqrt();
            let d = provider.delta(t_add.len())?;
            let th = provider.theta(t_add.len(), miss_add.len())?;
            let ls_hyp = noise_ok && d.exact && th.exact && d.value < 0.5;
            let ls_err = SQRT2 * eps + 2.0 * th.value * miss_norm;

            let b1 = alpha_del + ls_err + ctx.margin;
            let kept = t_add.iter().filter(|i| x[**i].abs() >= b1).all(|i| step.n_hat.contains(i));
            checks.push(LemmaCheck { lemma: "no_false_deletion".into(), outcome: outcome(ls_hyp, kept), detail: format!("b1={b1}") });

            let removed = t_add.difference(n).all(|i| !step.n_hat.contains(i));
            checks.push(LemmaCheck {
                lemma: "deletion".into(),
                outcome: outcome(ls_hyp && alpha_del >= ls_err, removed),
                detail: format!("ls_error_bound={ls_err}"),
            });
        }
        Algorithm::SimpleCS | Algorithm::GaussCS => {}
    }
    Ok(LemmaRecord { t: step.t, checks })
}

/// Convenience: the `(delta, theta)` grid of a small matrix, for reports.
pub fn exact_constants(a: &DMatrix<f64>) -> MatrixConstants {
    MatrixConstants::new(a.clone(), EstimateMode::Exhaustive { budget: u128::MAX })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c1_c2_reference_values() {
        assert_eq!(c1(0.0).unwrap(), 4.0);
        assert_eq!(c2(0.0).unwrap(), 2.0);
        assert!((c1(half_rip_limit()).unwrap() - 8.79).abs() < 0.01);
        assert!(matches!(c1(SQRT2 - 1.0), Err(Error::BoundUndefined(_))));
        assert!(c2(0.5).is_err());
    }

    #[test]
    fn bound_constants_reference() {
        // 50-digit evaluation of the closed forms at |T| = 20, |Delta| = 4,
        // delta = 0.1.
        let b = bound_constants(0.1, 20, 4).unwrap();
        assert!((b.c1 - 5.530_389_534_658_479).abs() < 1e-12, "{}", b.c1);
        assert!((b.c2 - 2.745_717_572_726_980).abs() < 1e-12, "{}", b.c2);
        assert!((b.c_prime - 14.213_110_876_024_756).abs() < 1e-11, "{}", b.c_prime);
        assert!((b.c_dprime - 12.279_222_279_266_5).abs() < 1e-11, "{}", b.c_dprime);
        let z = bound_constants(0.1, 20, 0).unwrap();
        assert_eq!((z.c_prime, z.c_dprime), (z.c1, 0.0));
    }

    #[test]
    fn modcs_bounds() {
        let b = modcs_error_bound(20, 2, 2, 0.2, 0.5).unwrap();
        assert!(b <= 8.79 * 0.5);
        assert_eq!(modcs_error_bound(20, 2, 2, 0.2, 0.0).unwrap(), 0.0);
        assert!(matches!(modcs_error_bound(20, 7, 0, 0.1, 1.0), Err(Error::NotApplicable(_))));
        assert!(matches!(modcs_error_bound(20, 2, 0, 0.5, 1.0), Err(Error::NotApplicable(_))));
        let sharp = modcs_error_bound_sharp(20, 2, 0.2, 0.1, 1.0).unwrap();
        assert!((sharp - 4.0 * 1.2f64.sqrt() / (0.8 - SQRT2 * 0.1)).abs() < 1e-12);
        assert!(modcs_error_bound_sharp(20, 2, 0.5, 0.5, 1.0).is_err());
    }

    fn inputs() -> CheckInputs {
        CheckInputs { alpha_add: 0.0633, oracle_start: true, max_false_adds: Some(1), ..CheckInputs::new(20, 2, 1.0, 0.1) }
    }

    #[test]
    fn theorem1_constants() {
        let rep = check_theorem1(&inputs(), &mut FixedConstants::uniform(0.1, 0.05)).unwrap();
        assert!((rep.constants.alpha.unwrap() - 0.879).abs() < 1e-12);
        assert!((rep.constants.g1.unwrap() - 0.879).abs() < 1e-12);
        assert_eq!(rep.status(), Status::Holds);
        let eq = CheckInputs { s0: 12, ..inputs() };
        let rep = check_theorem1(&eq, &mut FixedConstants::uniform(0.1, 0.05)).unwrap();
        assert_eq!(rep.condition("support_ratio").unwrap().status, Status::Holds);
        let zero = CheckInputs { epsilon: 0.0, r: 1e-9, ..inputs() };
        let rep = check_theorem1(&zero, &mut FixedConstants::uniform(0.1, 0.05)).unwrap();
        assert_eq!(rep.constants.g1, Some(0.0));
        assert_eq!(rep.condition("rate").unwrap().status, Status::Holds);
    }

    #[test]
    fn theorem2_limits() {
        let inp = CheckInputs { alpha_add: 0.0, ..inputs() };
        let rep = check_theorem2(&inp, &mut FixedConstants::uniform(0.1, 0.0)).unwrap();
        let (g1, g2) = (rep.constants.g1.unwrap(), rep.constants.g2.unwrap());
        assert!((g1 - 4.395 * 0.1).abs() < 1e-12);
        assert!((g2 - SQRT2 * 0.1).abs() < 1e-12);
        assert!(g2 < g1);

        let one = CheckInputs { sa: 1, ..inputs() };
        let rep = check_theorem2(&one, &mut FixedConstants::uniform(0.1, 0.25)).unwrap();
        assert_eq!(rep.condition("theta").unwrap().status, Status::Fails);
    }

    #[test]
    fn sampled_values_never_prove_holding() {
        let rep = check_theorem2(&inputs(), &mut FixedConstants::uniform(0.1, 0.05).lower_bounds()).unwrap();
        assert_eq!(rep.condition("theta").unwrap().status, Status::Undetermined);
        assert_eq!(rep.condition("support_ratio").unwrap().status, Status::Holds);
        assert_eq!(rep.status(), Status::Undetermined);
        let rep = check_theorem2(&inputs(), &mut FixedConstants::uniform(0.3, 0.05).lower_bounds()).unwrap();
        assert_eq!(rep.condition("delta_modcs").unwrap().status, Status::Fails);
    }

    #[test]
    fn corollary3_with_sqrt_sa_is_theorem2() {
        let inp = CheckInputs { zeta: Some(2f64.sqrt()), ..inputs() };
        let mut p = FixedConstants::uniform(0.12, 0.07);
        let t2 = check_theorem2(&inp, &mut p).unwrap();
        let c3 = check_corollary3(&inp, &mut p).unwrap();
        assert_eq!(t2.conditions, c3.conditions);
        assert!((t2.constants.alpha_del.unwrap() - c3.constants.alpha_del.unwrap()).abs() < 1e-12);
        assert!((t2.constants.g2.unwrap() - c3.constants.g2.unwrap()).abs() < 1e-12);
        assert_eq!(t2.constants.g1, c3.constants.g1);
        assert!((t2.bounds.final_error - c3.bounds.final_error).abs() < 1e-12);
    }

    #[test]
    fn corollary3_zeta_values() {
        for (zeta, rhs) in [(1.11, 1.0 / 4.44), (1.38, 1.0 / 5.52)] {
            let inp = CheckInputs { zeta: Some(zeta), ..inputs() };
            let rep = check_corollary3(&inp, &mut FixedConstants::uniform(0.1, 0.05)).unwrap();
            let th = rep.condition("theta").unwrap();
            assert!((th.rhs.unwrap() - rhs).abs() < 1e-12);
            let g2 = SQRT2 * zeta * 0.1 / (2f64.sqrt() * (1.0 - 2.0 * 0.05 * zeta));
            assert!((rep.constants.g2.unwrap() - g2).abs() < 1e-12);
        }
        assert!((1.0f64 / 4.44 - 0.2252).abs() < 1e-4);
    }

    #[test]
    fn k_constant_values() {
        assert_eq!(k_constants(1), (1, 0, 0.0));
        assert_eq!(k_constants(2), (2, 1, 1.0));
        let (k1, k2, k3) = k_constants(3);
        assert_eq!((k1, k2), (4, 3));
        assert!((k3 - 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn corollary4_cases() {
        let base = CheckInputs { zeta: Some(1.11), d: Some(3), ..inputs() };
        let mut p = FixedConstants::uniform(0.1, 0.05);
        let c3 = check_corollary3(&base, &mut p).unwrap();
        let c4 = check_corollary4(&CheckInputs { d0: Some(2), f: Some(2), ..base.clone() }, &mut p).unwrap();
        assert_eq!(ConditionReport { theorem: c3.theorem, ..c4 }, c3);

        let d1 = check_corollary4(&CheckInputs { d0: Some(1), f: Some(2), ..base.clone() }, &mut p).unwrap();
        assert_eq!(d1.bounds.misses, 0);
        assert_eq!(d1.condition("theta").unwrap().status, Status::Holds);
        assert!(check_corollary4(&CheckInputs { d0: Some(4), f: Some(2), ..base.clone() }, &mut p).is_err());
        assert!(check_corollary4(&CheckInputs { d0: Some(0), f: Some(2), ..base }, &mut p).is_err());
    }

    #[test]
    fn theorem3_theta_free_limit() {
        let inp = CheckInputs { sa: 1, ..inputs() };
        let rep = check_theorem3(&inp, &mut FixedConstants::uniform(0.1, 0.0)).unwrap();
        // theta = 0: the |Delta| scan reduces to (alpha_add + C' eps) / 2.
        let g1 = (1..=2)
            .map(|k| (0.0633 + bound_constants(0.1, 20, k).unwrap().c_prime * 0.1) / 2.0)
            .fold(0.0, f64::max);
        assert!((rep.constants.g1.unwrap() - g1).abs() < 1e-12);
    }

    #[test]
    fn zeta_ratio_extremes() {
        assert!((zeta_ratio(&[0.0, 3.0, 0.0], 2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((zeta_ratio(&[0.5, -0.5], 2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(zeta_ratio(&[0.0, 0.0], 2), None);
    }

    #[test]
    fn report_rendering() {
        let rep = check_theorem2(&inputs(), &mut FixedConstants::uniform(0.1, 0.05)).unwrap();
        let text = rep.to_text();
        assert!(text.contains("theta_24,2"));
        assert!(text.contains("overall: holds"));
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 1 + rep.conditions.len());
    }
}
