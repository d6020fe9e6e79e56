//! Discrete-time Markov chains and the numerical analyses the model checker
//! is built on: bounded/unbounded until, reachability and cumulative rewards,
//! and long-run (steady-state) occupation over bottom strongly connected
//! components.
//!
//! Iterative solves use in-place Gauss-Seidel sweeps and stop when the largest
//! absolute change in a sweep drops below [`TOLERANCE`]; more than
//! [`MAX_ITERATIONS`] sweeps yields [`NonConvergent`].

mod analysis;
mod graph;

pub use analysis::{LongRun, RewardValue};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

/// Iteration cap for every iterative solve.
pub const MAX_ITERATIONS: usize = 100_000;
/// Absolute convergence threshold on the per-sweep maximum change.
pub const TOLERANCE: f64 = 1e-10;
/// Allowed deviation of a probability row sum from 1.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtmcError {
    #[error("transition matrix must be square and non-empty, got {rows} rows for {states} states")]
    Shape { rows: usize, states: usize },
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) = {value} is not a probability")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("initial distribution: {0}")]
    BadInit(String),
    #[error("state set has {got} states, model has {expected}")]
    SetSize { got: usize, expected: usize },
    #[error("reward structure `{name}`: {reason}")]
    BadReward { name: String, reason: String },
}

/// An iterative solve hit its iteration cap.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("no convergence after {iterations} iterations (last change {last_change:e})")]
pub struct NonConvergent {
    pub iterations: usize,
    pub last_change: f64,
}

/// Caps for the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: MAX_ITERATIONS,
            tolerance: TOLERANCE,
        }
    }
}

/// A subset of a chain's states.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateSet(Vec<bool>);

impl StateSet {
    pub fn empty(m: usize) -> Self {
        Self(vec![false; m])
    }

    pub fn full(m: usize) -> Self {
        Self(vec![true; m])
    }

    pub fn from_indices(m: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(m);
        for i in indices {
            s.0[i] = true;
        }
        s
    }

    pub fn from_fn(m: usize, f: impl FnMut(usize) -> bool) -> Self {
        Self((0..m).map(f).collect())
    }

    /// Number of states in the universe, not in the set.
    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.0[s]
    }

    pub fn insert(&mut self, s: usize) {
        self.0[s] = true;
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|b| *b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| !b).collect())
    }

    pub fn and(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| *a && *b).collect())
    }

    pub fn or(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| *a || *b).collect())
    }

    pub fn minus(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| *a && !*b).collect())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| !*a || *b)
    }
}

/// Non-negative per-state rewards, collected in the state being occupied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardStructure {
    state_reward: Vec<f64>,
}

impl RewardStructure {
    pub fn new(state_reward: Vec<f64>) -> Result<Self, DtmcError> {
        if let Some(bad) = state_reward.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(DtmcError::BadReward {
                name: String::new(),
                reason: format!("reward {bad} is not a finite non-negative number"),
            });
        }
        Ok(Self { state_reward })
    }

    /// Reward 1 in every state: accumulates time steps.
    pub fn steps(m: usize) -> Self {
        Self {
            state_reward: vec![1.0; m],
        }
    }

    /// Reward 1 in the states of `set`: accumulates visits.
    pub fn indicator(set: &StateSet) -> Self {
        Self {
            state_reward: (0..set.universe())
                .map(|s| if set.contains(s) { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.state_reward
    }

    pub fn get(&self, s: usize) -> f64 {
        self.state_reward[s]
    }

    pub fn len(&self) -> usize {
        self.state_reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state_reward.is_empty()
    }
}

/// A labelled DTMC with an initial distribution.
///
/// Atom sets name state predicates (`y=Stats`, `x=1`, `group=Summary`);
/// reward structures are looked up by name by the model checker.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtmc {
    m: usize,
    probs: Vec<f64>,
    succ: Vec<Vec<(usize, f64)>>,
    pred: Vec<Vec<(usize, f64)>>,
    init: Vec<f64>,
    state_names: Vec<String>,
    atoms: BTreeMap<String, StateSet>,
    rewards: BTreeMap<String, RewardStructure>,
}

impl Dtmc {
    pub fn new(matrix: Vec<Vec<f64>>, init: Vec<f64>) -> Result<Self, DtmcError> {
        let m = init.len();
        if m == 0 || matrix.len() != m {
            return Err(DtmcError::Shape {
                rows: matrix.len(),
                states: m,
            });
        }
        let mut probs = Vec::with_capacity(m * m);
        for (row, r) in matrix.iter().enumerate() {
            if r.len() != m {
                return Err(DtmcError::Shape {
                    rows: r.len(),
                    states: m,
                });
            }
            for (col, &value) in r.iter().enumerate() {
                if !(0.0..=1.0 + STOCHASTIC_TOLERANCE).contains(&value) {
                    return Err(DtmcError::BadEntry { row, col, value });
                }
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(DtmcError::NotStochastic { row, sum });
            }
            probs.extend_from_slice(r);
        }
        if init.iter().any(|p| !(0.0..=1.0 + STOCHASTIC_TOLERANCE).contains(p)) {
            return Err(DtmcError::BadInit("entry outside [0, 1]".into()));
        }
        let total: f64 = init.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(DtmcError::BadInit(format!("sums to {total}")));
        }

        let mut succ = vec![Vec::new(); m];
        let mut pred = vec![Vec::new(); m];
        for s in 0..m {
            for t in 0..m {
                let p = probs[s * m + t];
                if p > 0.0 {
                    succ[s].push((t, p));
                    pred[t].push((s, p));
                }
            }
        }
        Ok(Self {
            m,
            probs,
            succ,
            pred,
            init,
            state_names: (0..m).map(|s| s.to_string()).collect(),
            atoms: BTreeMap::new(),
            rewards: BTreeMap::new(),
        })
    }

    /// Point initial distribution on `state`.
    pub fn with_initial_state(matrix: Vec<Vec<f64>>, state: usize) -> Result<Self, DtmcError> {
        let mut init = vec![0.0; matrix.len()];
        if state >= init.len() {
            return Err(DtmcError::BadInit(format!("state {state} out of range")));
        }
        init[state] = 1.0;
        Self::new(matrix, init)
    }

    pub fn set_state_names(&mut self, names: Vec<String>) {
        assert_eq!(names.len(), self.m, "one name per state");
        self.state_names = names;
    }

    pub fn add_atom(&mut self, name: impl Into<String>, set: StateSet) -> Result<(), DtmcError> {
        if set.universe() != self.m {
            return Err(DtmcError::SetSize {
                got: set.universe(),
                expected: self.m,
            });
        }
        self.atoms.insert(name.into(), set);
        Ok(())
    }

    pub fn add_reward(
        &mut self,
        name: impl Into<String>,
        reward: RewardStructure,
    ) -> Result<(), DtmcError> {
        let name = name.into();
        if reward.len() != self.m {
            return Err(DtmcError::BadReward {
                name,
                reason: format!("{} entries for {} states", reward.len(), self.m),
            });
        }
        self.rewards.insert(name, reward);
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.probs[from * self.m + to]
    }

    /// Non-zero transitions out of `s`.
    pub fn successors(&self, s: usize) -> &[(usize, f64)] {
        &self.succ[s]
    }

    pub fn predecessors(&self, s: usize) -> &[(usize, f64)] {
        &self.pred[s]
    }

    pub fn init(&self) -> &[f64] {
        &self.init
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.state_names[s]
    }

    pub fn atom(&self, name: &str) -> Option<&StateSet> {
        self.atoms.get(name)
    }

    pub fn atoms(&self) -> &BTreeMap<String, StateSet> {
        &self.atoms
    }

    pub fn reward(&self, name: &str) -> Option<&RewardStructure> {
        self.rewards.get(name)
    }

    pub fn rewards(&self) -> &BTreeMap<String, RewardStructure> {
        &self.rewards
    }

    /// Init-weighted expectation of a per-state vector.
    pub fn expect_from_init(&self, values: &[f64]) -> f64 {
        self.init.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Textual transition list, one `src dst prob` line per non-zero entry.
    pub fn transition_list(&self) -> String {
        let mut out = String::new();
        for (s, row) in self.succ.iter().enumerate() {
            for &(t, p) in row {
                writeln!(out, "{s} {t} {p}").expect("writing to a String");
            }
        }
        out
    }
}
