//! Measurement systems, observations and restricted isometry / orthogonality
//! constants.

use std::fmt::Write as _;
use std::path::Path;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::signal_model::SparseSignal;

/// Default cap on the number of subsets an exhaustive RIC/ROC sweep visits.
pub const DEFAULT_SUBSET_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    /// i.i.d. uniform(-c, c) in every coordinate.
    Uniform { c: f64 },
}

impl NoiseModel {
    /// Tight deterministic bound on `||w||` for `rows` measurements.
    pub fn norm_bound(&self, rows: usize) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Uniform { c } => c * (rows as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingSystem {
    /// Matrix used at `t > 0`.
    pub a: DMatrix<f64>,
    /// Optional matrix with more rows used at `t = 0`.
    pub a0: Option<DMatrix<f64>>,
    pub noise: NoiseModel,
    /// Noise-norm bound used by the solvers at `t > 0`.
    pub epsilon: f64,
    /// Noise-norm bound at `t = 0` when `a0` is present.
    pub epsilon0: f64,
}

/// One observation `y = A x + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: DVector<f64>,
    pub w: DVector<f64>,
}

impl SensingSystem {
    /// Builds a system with `epsilon = c sqrt(n)` (and `c sqrt(n0)` at t = 0).
    pub fn new(a: DMatrix<f64>, a0: Option<DMatrix<f64>>, noise: NoiseModel) -> Result<Self> {
        let epsilon = noise.norm_bound(a.nrows());
        let epsilon0 = a0.as_ref().map_or(epsilon, |a0| noise.norm_bound(a0.nrows()));
        Self::with_epsilon(a, a0, noise, epsilon, epsilon0)
    }

    /// Builds a system with explicit solver noise bounds. A bound below the
    /// worst-case `c sqrt(n)` is allowed (a typical-norm choice such as
    /// `c sqrt(n / 3)`), in which case `||w|| <= epsilon` is not guaranteed.
    pub fn with_epsilon(
        a: DMatrix<f64>,
        a0: Option<DMatrix<f64>>,
        noise: NoiseModel,
        epsilon: f64,
        epsilon0: f64,
    ) -> Result<Self> {
        let (n, m) = a.shape();
        if n == 0 || n >= m {
            return Err(Error::Config(format!("need 0 < n < m, got n = {n}, m = {m}")));
        }
        if let Some(a0) = &a0 {
            if a0.ncols() != m || a0.nrows() < n {
                return Err(Error::Config(format!(
                    "A0 must be n0 x m with n0 >= n, got {}x{}",
                    a0.nrows(),
                    a0.ncols()
                )));
            }
        }
        if let NoiseModel::Uniform { c } = noise {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::Config(format!("noise half-width must be nonnegative, got {c}")));
            }
        }
        for (name, v) in [("epsilon", epsilon), ("epsilon0", epsilon0)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(SensingSystem { a, a0, noise, epsilon, epsilon0 })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    /// Matrix in use at time `t`.
    pub fn matrix_at(&self, t: usize) -> &DMatrix<f64> {
        match (&self.a0, t) {
            (Some(a0), 0) => a0,
            _ => &self.a,
        }
    }

    pub fn epsilon_at(&self, t: usize) -> f64 {
        match (&self.a0, t) {
            (Some(_), 0) => self.epsilon0,
            _ => self.epsilon,
        }
    }
}

/// `n x m` matrix with i.i.d. N(0, 1/n) entries (columns have unit norm in
/// expectation).
pub fn gaussian_matrix(n: usize, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 || n >= m {
        return Err(Error::Config(format!("need 0 < n < m, got n = {n}, m = {m}")));
    }
    let normal = Normal::new(0.0, 1.0 / (n as f64).sqrt()).expect("positive std");
    let mut rng = stream(seed, n as u64, Purpose::SensingMatrix);
    // Column-major fill: column j is drawn before column j + 1.
    Ok(DMatrix::from_iterator(n, m, (0..n * m).map(|_| normal.sample(&mut rng))))
}

/// Draws `y_t = A x_t + w_t`, using `A0` at `t = 0` when configured.
pub fn measure(system: &SensingSystem, x: &SparseSignal, t: usize, seed: u64) -> Result<Measurement> {
    let a = system.matrix_at(t);
    if x.len() != a.ncols() {
        return Err(Error::Dimension(format!(
            "signal has length {}, matrix has {} columns",
            x.len(),
            a.ncols()
        )));
    }
    let rows = a.nrows();
    let w = match system.noise {
        NoiseModel::None => DVector::zeros(rows),
        NoiseModel::Uniform { c } => {
            let mut rng = stream(seed, t as u64, Purpose::Noise);
            if c > 0.0 {
                DVector::from_fn(rows, |_, _| rng.gen_range(-c..=c))
            } else {
                DVector::zeros(rows)
            }
        }
    };
    let y = a * &x.values + &w;
    Ok(Measurement { y, w })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    /// Maximum over a random subset of index sets: a lower bound.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantKind {
    Ric { s: usize },
    Roc { s1: usize, s2: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicRocEstimate {
    pub kind: ConstantKind,
    pub value: f64,
    pub method: Method,
    pub subsets_examined: u128,
}

impl RicRocEstimate {
    pub fn is_exact(&self) -> bool {
        self.method == Method::Exhaustive
    }

    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        match self.kind {
            ConstantKind::Ric { s } => {
                let _ = writeln!(out, "constant=ric\ns={s}");
            }
            ConstantKind::Roc { s1, s2 } => {
                let _ = writeln!(out, "constant=roc\ns1={s1}\ns2={s2}");
            }
        }
        let method = match self.method {
            Method::Exhaustive => "exhaustive",
            Method::Sampled => "sampled_lower_bound",
        };
        let _ = writeln!(out, "value={}\nmethod={method}\nsubsets_examined={}", self.value, self.subsets_examined);
        out
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * a
}

fn isometry_defect(gram: &DMatrix<f64>, subset: &[usize]) -> f64 {
    let sub = gram.select_rows(subset).select_columns(subset);
    let eig = SymmetricEigen::new(sub).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    (hi - 1.0).max(1.0 - lo).max(0.0)
}

fn coupling(gram: &DMatrix<f64>, t1: &[usize], t2: &[usize]) -> f64 {
    let block = gram.select_rows(t1).select_columns(t2);
    let sq = if t1.len() <= t2.len() { &block * block.transpose() } else { block.transpose() * &block };
    SymmetricEigen::new(sq).eigenvalues.max().max(0.0).sqrt()
}

fn check_columns(a: &DMatrix<f64>, needed: usize) -> Result<()> {
    if needed > a.ncols() {
        return Err(Error::Argument(format!(
            "sparsity {needed} exceeds the number of columns {}",
            a.ncols()
        )));
    }
    Ok(())
}

/// Exact `delta_S`: worst isometry defect over all column subsets of size
/// `s` (smaller subsets are covered by eigenvalue interlacing).
pub fn ric_exhaustive(a: &DMatrix<f64>, s: usize, budget: u128) -> Result<RicRocEstimate> {
    check_columns(a, s)?;
    let kind = ConstantKind::Ric { s };
    if s == 0 {
        return Ok(RicRocEstimate { kind, value: 0.0, method: Method::Exhaustive, subsets_examined: 0 });
    }
    let needed = binomial(a.ncols(), s);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let g = gram(a);
    let value = (0..a.ncols())
        .combinations(s)
        .map(|t| isometry_defect(&g, &t))
        .fold(0.0, f64::max);
    Ok(RicRocEstimate { kind, value, method: Method::Exhaustive, subsets_examined: needed })
}

/// Lower bound on `delta_S` from `num_samples` random subsets. When the
/// sample count covers every subset the sweep is done exhaustively instead.
pub fn ric_sampled(a: &DMatrix<f64>, s: usize, num_samples: usize, seed: u64) -> Result<RicRocEstimate> {
    check_columns(a, s)?;
    if s == 0 || num_samples as u128 >= binomial(a.ncols(), s) {
        return ric_exhaustive(a, s, u128::MAX);
    }
    let g = gram(a);
    let mut rng = stream(seed, s as u64, Purpose::SubsetSampling);
    let value = (0..num_samples)
        .map(|_| {
            let mut t = index::sample(&mut rng, a.ncols(), s).into_vec();
            t.sort_unstable();
            isometry_defect(&g, &t)
        })
        .fold(0.0, f64::max);
    Ok(RicRocEstimate {
        kind: ConstantKind::Ric { s },
        value,
        method: Method::Sampled,
        subsets_examined: num_samples as u128,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Exhaustive { budget: u128 },
    Sampled { samples: usize, seed: u64 },
}

/// `theta_{s1,s2}`: worst spectral norm of `A_T1' A_T2` over disjoint
/// `|T1| = s1`, `|T2| = s2`.
pub fn roc(a: &DMatrix<f64>, s1: usize, s2: usize, mode: SweepMode) -> Result<RicRocEstimate> {
    let m = a.ncols();
    check_columns(a, s1 + s2)?;
    let kind = ConstantKind::Roc { s1, s2 };
    if s1 == 0 || s2 == 0 {
        return Ok(RicRocEstimate { kind, value: 0.0, method: Method::Exhaustive, subsets_examined: 0 });
    }
    let total = binomial(m, s1).saturating_mul(binomial(m - s1, s2));
    let g = gram(a);
    let exhaustive = |budget: u128| -> Result<RicRocEstimate> {
        if total > budget {
            return Err(Error::BudgetExceeded { needed: total, budget });
        }
        let mut value: f64 = 0.0;
        for t1 in (0..m).combinations(s1) {
            let rest: Vec<usize> = (0..m).filter(|i| !t1.contains(i)).collect();
            for t2 in rest.into_iter().combinations(s2) {
                value = value.max(coupling(&g, &t1, &t2));
            }
        }
        Ok(RicRocEstimate { kind, value, method: Method::Exhaustive, subsets_examined: total })
    };
    match mode {
        SweepMode::Exhaustive { budget } => exhaustive(budget),
        SweepMode::Sampled { samples, .. } if samples as u128 >= total => exhaustive(u128::MAX),
        SweepMode::Sampled { samples, seed } => {
            let mut rng = stream(seed, (s1 * m + s2) as u64, Purpose::SubsetSampling);
            let value = (0..samples)
                .map(|_| {
                    let picked = index::sample(&mut rng, m, s1 + s2).into_vec();
                    coupling(&g, &picked[..s1], &picked[s1..])
                })
                .fold(0.0, f64::max);
            Ok(RicRocEstimate { kind, value, method: Method::Sampled, subsets_examined: samples as u128 })
        }
    }
}

/// Writes the matrix as CSV: a header line `n=..,m=..,seed=..` followed by
/// `n` rows of `m` values. Values use the shortest round-trip formatting.
pub fn save_matrix_csv(path: &Path, a: &DMatrix<f64>, seed: Option<u64>) -> Result<()> {
    let mut out = String::new();
    let seed = seed.map_or("none".to_string(), |s| s.to_string());
    let _ = writeln!(out, "n={},m={},seed={seed}", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let row = (0..a.ncols()).map(|j| a[(i, j)].to_string()).join(",");
        out.push_str(&row);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a matrix written by [`save_matrix_csv`]; returns it with its seed.
pub fn load_matrix_csv(path: &Path) -> Result<(DMatrix<f64>, Option<u64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let mut n = None;
    let mut m = None;
    let mut seed = None;
    for field in header.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header field '{field}'")))?;
        let parse = |v: &str| v.trim().parse::<u64>().map_err(|e| Error::Parse(format!("{key}: {e}")));
        match key.trim() {
            "n" => n = Some(parse(value)? as usize),
            "m" => m = Some(parse(value)? as usize),
            "seed" if value.trim() == "none" => seed = None,
            "seed" => seed = Some(parse(value)?),
            other => return Err(Error::Parse(format!("unknown header key '{other}'"))),
        }
    }
    let (n, m) = match (n, m) {
        (Some(n), Some(m)) => (n, m),
        _ => return Err(Error::Parse("header must give n and m".into())),
    };
    let mut data = Vec::with_capacity(n * m);
    for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let values: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {row}: {e}"))))
            .collect::<Result<_>>()?;
        if values.len() != m {
            return Err(Error::Parse(format!("row {row} has {} values, expected {m}", values.len())));
        }
        data.extend(values);
    }
    if data.len() != n * m {
        return Err(Error::Parse(format!("expected {n} rows, found {}", data.len() / m.max(1))));
    }
    Ok((DMatrix::from_row_slice(n, m, &data), seed))
}
