//! Sparse signal sequences with slowly changing support.
//!
//! At every time step `sa` coefficients enter the support at magnitude `r`,
//! ramp up by `r` per step until they reach the stable magnitude `d * r`,
//! and `sa` stable coefficients ramp down by `r` per step until they leave
//! the support. Support size and signal power are constant over time.
//!
//! Magnitudes are stored as integer levels (magnitude = level * r) so the
//! level bookkeeping is exact. The per-level cohorts are carried explicitly
//! in the state: with the shifting generator the identity of which element
//! rises and which falls cannot be recovered from magnitudes alone.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Ordered set of coordinate indices (0-based).
pub type IndexSet = BTreeSet<usize>;

/// How cohort membership evolves from one step to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    /// Cohorts shift by one level per step: an element keeps rising (or
    /// falling) until it reaches the stable magnitude (or zero).
    Gen1,
    /// At each intermediate level, `sa` of the `2 sa` members are drawn
    /// uniformly to rise and the others fall.
    Gen2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Ambient dimension.
    pub m: usize,
    /// Support size.
    pub s0: usize,
    /// Additions (and removals) per step.
    pub sa: usize,
    /// Magnitude increase/decrease rate.
    pub r: f64,
    /// Number of magnitude levels; the stable magnitude is `d * r`.
    pub d: usize,
    pub generator: Generator,
    pub seed: u64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.s0 == 0 {
            return Err(Error::Config("m and s0 must be positive".into()));
        }
        if self.sa == 0 {
            return Err(Error::Config("sa must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::Config(format!("rate r must be positive, got {}", self.r)));
        }
        // 2 sa members per intermediate level plus at least sa stable members
        // so that a decreasing cohort can always be drawn.
        let needed = (2 * self.d - 1) * self.sa;
        if self.s0 < needed {
            return Err(Error::Config(format!(
                "s0 = {} too small: need s0 >= (2d-1)*sa = {needed}",
                self.s0
            )));
        }
        if self.s0 + self.sa > self.m {
            return Err(Error::Config(format!(
                "s0 + sa = {} exceeds m = {}",
                self.s0 + self.sa,
                self.m
            )));
        }
        Ok(())
    }

    pub fn stable_magnitude(&self) -> f64 {
        self.d as f64 * self.r
    }

    /// Number of coefficients sitting at the stable magnitude.
    pub fn stable_count(&self) -> usize {
        self.s0 - (2 * self.d - 2) * self.sa
    }

    /// Closed-form `||x_t||^2`, identical at every time step.
    pub fn signal_power(&self) -> f64 {
        let big = self.stable_magnitude();
        let ramp: f64 = (1..self.d).map(|j| (j * j) as f64).sum();
        self.stable_count() as f64 * big * big + 2.0 * self.sa as f64 * ramp * self.r * self.r
    }
}

/// A vector together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    pub values: DVector<f64>,
    pub support: IndexSet,
}

impl SparseSignal {
    pub fn from_values(values: DVector<f64>) -> Self {
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        SparseSignal { values, support }
    }

    pub fn zeros(m: usize) -> Self {
        SparseSignal { values: DVector::zeros(m), support: IndexSet::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Full state of the evolving signal at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModelState {
    t: usize,
    r: f64,
    level: Vec<u32>,
    sign: Vec<i8>,
    /// `increasing[j - 1]` is I_t(j) for j = 1..=d.
    increasing: Vec<IndexSet>,
    /// `decreasing[j]` is D_t(j) for j = 0..d.
    decreasing: Vec<IndexSet>,
}

/// The random choices that drive one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// New support elements (they enter at magnitude `r`).
    pub additions: IndexSet,
    /// Stable elements that begin to decrease.
    pub new_decreasing: IndexSet,
    /// Gen2 only: for each level `l = 1..d`, the members at level `l` that
    /// rise (index `l - 1`). The remaining members of the level fall.
    pub risers: Option<Vec<IndexSet>>,
    /// Sign for each addition, in ascending index order of `additions`.
    pub signs: Vec<i8>,
}

/// The five index sets used by the stability analysis at level `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortSets {
    /// A_t = I_t(1).
    pub added: IndexSet,
    /// R_t = D_t(0).
    pub removed: IndexSet,
    /// I_t(j).
    pub increasing: IndexSet,
    /// D_t(j - 1).
    pub decreasing: IndexSet,
    /// S_t(j) = {i : 0 < |x_i| < j r}.
    pub small: IndexSet,
}

fn sample_from(set: &IndexSet, count: usize, rng: &mut impl Rng) -> IndexSet {
    let pool: Vec<usize> = set.iter().copied().collect();
    index::sample(rng, pool.len(), count).into_iter().map(|k| pool[k]).collect()
}

fn random_sign(rng: &mut impl Rng) -> i8 {
    if rng.gen::<bool>() {
        1
    } else {
        -1
    }
}

/// State at `t = 0`: `2 sa` elements at each level `1..d` (half rising, half
/// falling), the rest at the stable magnitude, support and signs uniform.
pub fn init_state(params: &ModelParams) -> Result<SignalModelState> {
    params.validate()?;
    let (m, sa, d) = (params.m, params.sa, params.d);
    let mut rng = stream(params.seed, 0, Purpose::InitialSupport);
    let support: Vec<usize> = index::sample(&mut rng, m, params.s0).into_vec();

    let mut level = vec![0u32; m];
    let mut sign = vec![0i8; m];
    let mut increasing = vec![IndexSet::new(); d];
    let mut decreasing = vec![IndexSet::new(); d];

    let mut members = support.iter().copied();
    for j in 1..d {
        for k in 0..2 * sa {
            let i = members.next().expect("validated support size");
            level[i] = j as u32;
            if k < sa {
                increasing[j - 1].insert(i);
            } else {
                decreasing[j].insert(i);
            }
        }
    }
    for (k, i) in members.enumerate() {
        level[i] = d as u32;
        if k < sa {
            // Treated as having just reached the stable magnitude.
            increasing[d - 1].insert(i);
        }
    }

    let mut sign_rng = stream(params.seed, 0, Purpose::InitialSigns);
    let mut sorted = support.clone();
    sorted.sort_unstable();
    for &i in &sorted {
        sign[i] = random_sign(&mut sign_rng);
    }

    // D_0(0): treated as the set removed just before t = 0.
    let outside: IndexSet = (0..m).filter(|i| level[*i] == 0).collect();
    decreasing[0] = sample_from(&outside, sa, &mut rng);

    let state = SignalModelState { t: 0, r: params.r, level, sign, increasing, decreasing };
    debug_assert!(state.check_invariants(params).is_ok());
    Ok(state)
}

/// Draws the random choices for the step from `state.t` to `state.t + 1`.
pub fn sample_transition(state: &SignalModelState, params: &ModelParams) -> Transition {
    let t = (state.t + 1) as u64;
    let outside: IndexSet = (0..state.m()).filter(|i| state.level[*i] == 0).collect();
    let stable: IndexSet = state.level_set(params.d as u32);

    let additions = sample_from(&outside, params.sa, &mut stream(params.seed, t, Purpose::Additions));
    let new_decreasing =
        sample_from(&stable, params.sa, &mut stream(params.seed, t, Purpose::Decreases));
    let mut sign_rng = stream(params.seed, t, Purpose::Signs);
    let signs = additions.iter().map(|_| random_sign(&mut sign_rng)).collect();

    let risers = match params.generator {
        Generator::Gen1 => None,
        Generator::Gen2 => {
            let mut rng = stream(params.seed, t, Purpose::LevelSplit);
            Some(
                (1..params.d as u32)
                    .map(|l| sample_from(&state.level_set(l), params.sa, &mut rng))
                    .collect(),
            )
        }
    };
    Transition { additions, new_decreasing, risers, signs }
}

/// Advances one time unit with freshly sampled choices.
pub fn step(state: &SignalModelState, params: &ModelParams) -> Result<SignalModelState> {
    let transition = sample_transition(state, params);
    apply_transition(state, params, &transition)
}

/// Advances one time unit with the given choices.
pub fn apply_transition(
    state: &SignalModelState,
    params: &ModelParams,
    tr: &Transition,
) -> Result<SignalModelState> {
    let (sa, d) = (params.sa, params.d);
    if state.level.len() != params.m || state.increasing.len() != d {
        return Err(Error::Dimension("state does not match model parameters".into()));
    }
    if tr.additions.len() != sa || tr.new_decreasing.len() != sa || tr.signs.len() != sa {
        return Err(Error::Argument(format!("transition sets must have exactly sa = {sa} members")));
    }
    if let Some(i) = tr.additions.iter().find(|i| **i >= params.m || state.level[**i] != 0) {
        return Err(Error::Argument(format!("addition {i} is not outside the support")));
    }
    if let Some(i) = tr.new_decreasing.iter().find(|i| state.level[**i] != d as u32) {
        return Err(Error::Argument(format!("decreasing element {i} is not at the stable magnitude")));
    }
    if tr.signs.iter().any(|s| s.abs() != 1) {
        return Err(Error::Argument("signs must be +1 or -1".into()));
    }

    let mut increasing = vec![IndexSet::new(); d];
    let mut decreasing = vec![IndexSet::new(); d];
    increasing[0] = tr.additions.clone();
    decreasing[d - 1] = tr.new_decreasing.clone();

    match (params.generator, &tr.risers) {
        (Generator::Gen1, _) => {
            for j in 2..=d {
                increasing[j - 1] = state.increasing[j - 2].clone();
            }
            for j in 0..d.saturating_sub(1) {
                decreasing[j] = state.decreasing[j + 1].clone();
            }
        }
        (Generator::Gen2, Some(risers)) => {
            if risers.len() != d - 1 {
                return Err(Error::Argument(format!("expected {} riser sets", d - 1)));
            }
            for (k, up) in risers.iter().enumerate() {
                let l = (k + 1) as u32;
                let members = state.level_set(l);
                if up.len() != sa || !up.is_subset(&members) {
                    return Err(Error::Argument(format!(
                        "risers at level {l} must be {sa} members of that level"
                    )));
                }
                increasing[k + 1] = up.clone();
                decreasing[k] = members.difference(up).copied().collect();
            }
        }
        (Generator::Gen2, None) => {
            return Err(Error::Argument("Gen2 transition needs riser sets".into()));
        }
    }

    let mut level = state.level.clone();
    let mut sign = state.sign.clone();
    for i in increasing.iter().flatten() {
        level[*i] += 1;
    }
    for i in decreasing.iter().flatten() {
        level[*i] -= 1;
    }
    for (i, s) in tr.additions.iter().zip(&tr.signs) {
        sign[*i] = *s;
    }
    for i in &decreasing[0] {
        sign[*i] = 0;
    }

    let next = SignalModelState { t: state.t + 1, r: state.r, level, sign, increasing, decreasing };
    debug_assert!(next.check_invariants(params).is_ok(), "{:?}", next.check_invariants(params));
    Ok(next)
}

/// Returns A_t, R_t, I_t(j), D_t(j-1) and S_t(j) for `1 <= j <= d`.
pub fn cohort_sets(state: &SignalModelState, j: usize) -> Result<CohortSets> {
    let d = state.levels();
    if j == 0 || j > d {
        return Err(Error::Argument(format!("level index j = {j} outside 1..={d}")));
    }
    Ok(CohortSets {
        added: state.increasing[0].clone(),
        removed: state.decreasing[0].clone(),
        increasing: state.increasing[j - 1].clone(),
        decreasing: state.decreasing[j - 1].clone(),
        small: state.small_set(j),
    })
}

impl SignalModelState {
    /// Builds a state from explicit parts and checks every invariant.
    ///
    /// `increasing[j - 1]` is I_t(j) for `j = 1..=d`; `decreasing[j]` is
    /// D_t(j) for `j = 0..d`.
    pub fn from_parts(
        t: usize,
        params: &ModelParams,
        level: Vec<u32>,
        sign: Vec<i8>,
        increasing: Vec<IndexSet>,
        decreasing: Vec<IndexSet>,
    ) -> Result<Self> {
        params.validate()?;
        let state = SignalModelState { t, r: params.r, level, sign, increasing, decreasing };
        state.check_invariants(params)?;
        Ok(state)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn m(&self) -> usize {
        self.level.len()
    }

    pub fn levels(&self) -> usize {
        self.increasing.len()
    }

    pub fn level(&self, i: usize) -> u32 {
        self.level[i]
    }

    pub fn magnitude(&self, i: usize) -> f64 {
        self.level[i] as f64 * self.r
    }

    pub fn sign(&self, i: usize) -> i8 {
        self.sign[i]
    }

    /// I_t(j), `1 <= j <= d`.
    pub fn increasing(&self, j: usize) -> &IndexSet {
        &self.increasing[j - 1]
    }

    /// D_t(j), `0 <= j < d`.
    pub fn decreasing(&self, j: usize) -> &IndexSet {
        &self.decreasing[j]
    }

    pub fn support(&self) -> IndexSet {
        (0..self.m()).filter(|i| self.level[*i] > 0).collect()
    }

    fn level_set(&self, l: u32) -> IndexSet {
        (0..self.m()).filter(|i| self.level[*i] == l).collect()
    }

    /// S_t(j): nonzero elements with magnitude below `j r`.
    pub fn small_set(&self, j: usize) -> IndexSet {
        (0..self.m()).filter(|i| self.level[*i] > 0 && (self.level[*i] as usize) < j).collect()
    }

    pub fn values(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            (0..self.m()).map(|i| self.sign[i] as f64 * self.magnitude(i)),
        )
    }

    pub fn signal(&self) -> SparseSignal {
        SparseSignal { values: self.values(), support: self.support() }
    }

    pub fn power(&self) -> f64 {
        self.values().norm_squared()
    }

    pub fn check_invariants(&self, params: &ModelParams) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("t = {}: {msg}", self.t)));
        let (m, sa, d) = (params.m, params.sa, params.d);
        if self.level.len() != m || self.sign.len() != m {
            return fail("vector lengths differ from m".into());
        }
        if self.increasing.len() != d || self.decreasing.len() != d {
            return fail(format!("expected {d} increasing and {d} decreasing cohorts"));
        }
        for i in 0..m {
            if self.level[i] as usize > d {
                return fail(format!("level of {i} exceeds d"));
            }
            if (self.sign[i] == 0) != (self.level[i] == 0) || self.sign[i].abs() > 1 {
                return fail(format!("sign/magnitude mismatch at {i}"));
            }
        }
        let support = self.support();
        if support.len() != params.s0 {
            return fail(format!("support size {} != s0 = {}", support.len(), params.s0));
        }
        let mut seen = IndexSet::new();
        for (k, set) in self.increasing.iter().enumerate() {
            let j = (k + 1) as u32;
            if set.len() != sa || set.iter().any(|i| self.level[*i] != j) {
                return fail(format!("I_t({j}) must hold {sa} elements at level {j}"));
            }
            if set.iter().any(|i| !seen.insert(*i)) {
                return fail("cohorts overlap".into());
            }
        }
        for (j, set) in self.decreasing.iter().enumerate() {
            if set.len() != sa || set.iter().any(|i| self.level[*i] != j as u32) {
                return fail(format!("D_t({j}) must hold {sa} elements at level {j}"));
            }
            if set.iter().any(|i| !seen.insert(*i)) {
                return fail("cohorts overlap".into());
            }
        }
        for j in 1..=d {
            let size = self.small_set(j).len();
            if size != 2 * (j - 1) * sa {
                return fail(format!("|S_t({j})| = {size}, expected {}", 2 * (j - 1) * sa));
            }
        }
        Ok(())
    }
}

/// Generates `x_0, ..., x_horizon`.
pub fn trajectory(params: &ModelParams, horizon: usize) -> Result<Vec<SignalModelState>> {
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(init_state(params)?);
    for _ in 0..horizon {
        let next = step(states.last().expect("nonempty"), params)?;
        states.push(next);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: usize, s0: usize, sa: usize, d: usize, r: f64) -> ModelParams {
        ModelParams { m, s0, sa, r, d, generator: Generator::Gen1, seed: 11 }
    }

    fn set(items: &[usize]) -> IndexSet {
        items.iter().copied().collect()
    }

    #[test]
    fn initial_composition_matches_level_counts() {
        let p = params(100, 12, 1, 4, 0.5);
        let s = init_state(&p).unwrap();
        for l in 1..4u32 {
            assert_eq!(s.level_set(l).len(), 2);
        }
        assert_eq!(s.level_set(4).len(), 6);
        assert_eq!(s.support().len(), 12);
    }

    #[test]
    fn initial_power_closed_form() {
        let p = params(100, 12, 1, 4, 1.0);
        assert_eq!(p.signal_power(), 124.0);
        assert_eq!(init_state(&p).unwrap().power(), 124.0);
    }

    #[test]
    fn degenerate_single_level() {
        let p = params(10, 2, 1, 1, 1.0);
        let s0 = init_state(&p).unwrap();
        assert!(s0.support().iter().all(|i| s0.magnitude(*i) == 1.0));
        let s1 = step(&s0, &p).unwrap();
        let (n0, n1) = (s0.support(), s1.support());
        let c = cohort_sets(&s1, 1).unwrap();
        let expected: IndexSet = n0.union(&c.added).filter(|i| !c.removed.contains(i)).copied().collect();
        assert_eq!(n1, expected);
        assert!(n1.iter().all(|i| s1.magnitude(*i) == 1.0));
    }

    #[test]
    fn small_set_at_level_one_is_empty() {
        let p = params(50, 10, 2, 3, 1.0);
        let states = trajectory(&p, 20).unwrap();
        for s in &states {
            assert!(cohort_sets(s, 1).unwrap().small.is_empty());
        }
    }

    #[test]
    fn level_out_of_range_is_rejected() {
        let p = params(50, 10, 2, 3, 1.0);
        let s = init_state(&p).unwrap();
        assert!(matches!(cohort_sets(&s, 0), Err(Error::Argument(_))));
        assert!(matches!(cohort_sets(&s, 4), Err(Error::Argument(_))));
    }

    #[test]
    fn invalid_parameters() {
        assert!(params(100, 4, 1, 4, 1.0).validate().is_err());
        assert!(params(12, 12, 1, 2, 1.0).validate().is_err());
        assert!(params(100, 12, 0, 2, 1.0).validate().is_err());
        assert!(params(100, 12, 1, 2, 0.0).validate().is_err());
        assert!(init_state(&params(100, 4, 1, 4, 1.0)).is_err());
    }

    /// The worked transition with m = 100, S0 = 12, Sa = 1, d = 4.
    #[test]
    fn worked_transition_small_set() {
        let p = params(100, 12, 1, 4, 1.0);
        let mut level = vec![0u32; 100];
        let mut sign = vec![0i8; 100];
        let assign = [(2, 1), (91, 1), (74, 2), (12, 2), (30, 3), (66, 3)];
        for (i, l) in assign {
            level[i] = l;
            sign[i] = 1;
        }
        for i in [5, 40, 50, 60, 70, 80] {
            level[i] = 4;
            sign[i] = -1;
        }
        let increasing = vec![set(&[2]), set(&[74]), set(&[30]), set(&[80])];
        let decreasing = vec![set(&[99]), set(&[91]), set(&[12]), set(&[66])];
        let prev = SignalModelState::from_parts(0, &p, level, sign, increasing, decreasing).unwrap();
        assert_eq!(prev.small_set(3), set(&[2, 91, 12, 74]));

        let tr = Transition { additions: set(&[79]), new_decreasing: set(&[5]), risers: None, signs: vec![1] };
        let next = apply_transition(&prev, &p, &tr).unwrap();
        let c = cohort_sets(&next, 3).unwrap();
        assert_eq!(c.added, set(&[79]));
        assert_eq!(c.removed, set(&[91]));
        assert_eq!(c.increasing, set(&[74]));
        assert_eq!(c.decreasing, set(&[66]));
        assert_eq!(c.small, set(&[79, 12, 2, 66]));
        assert_eq!(c.small.len(), 2 * (3 - 1));
        next.check_invariants(&p).unwrap();
    }

    #[test]
    fn rejects_bad_transition() {
        let p = params(50, 10, 2, 3, 1.0);
        let s = init_state(&p).unwrap();
        let mut tr = sample_transition(&s, &p);
        let inside = *s.support().iter().next().unwrap();
        tr.additions = set(&[inside, *tr.additions.iter().next().unwrap()]);
        assert!(apply_transition(&s, &p, &tr).is_err());
    }

    #[test]
    fn power_is_constant_over_long_run() {
        let p = params(200, 20, 2, 3, 1.0);
        // 12 stable entries at level 3, two each at levels 1 and 2 on both
        // the rising and falling side: 12*9 + 4*(1 + 4)
        assert_eq!(p.signal_power(), 128.0);
        let mut s = init_state(&p).unwrap();
        for _ in 0..1000 {
            s = step(&s, &p).unwrap();
            assert!((s.power() - 128.0).abs() <= 1e-12 * 128.0);
        }
    }

    #[test]
    fn gen2_keeps_invariants() {
        let mut p = params(80, 16, 2, 4, 0.25);
        p.generator = Generator::Gen2;
        let states = trajectory(&p, 200).unwrap();
        for s in &states {
            s.check_invariants(&p).unwrap();
            assert!((s.power() - p.signal_power()).abs() < 1e-9);
        }
    }

    #[test]
    fn trajectories_are_reproducible() {
        let p = params(60, 12, 2, 3, 1.0);
        assert_eq!(trajectory(&p, 30).unwrap(), trajectory(&p, 30).unwrap());
        let mut q = p.clone();
        q.seed += 1;
        assert_ne!(trajectory(&p, 30).unwrap(), trajectory(&q, 30).unwrap());
    }
}
