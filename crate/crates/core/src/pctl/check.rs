//! Recursive evaluation of properties over a labelled [`Dtmc`].

use std::borrow::Cow;
use std::cell::OnceCell;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{Comparison, FilterExpr, FilterKind, PathFormula, Property, Query, StateFormula};
use crate::dtmc::{Dtmc, LongRun, NonConvergent, RewardStructure, RewardValue, SolverConfig, StateSet};

/// Where a property is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum At {
    /// Expectation (for queries) or universal truth (for predicates) under
    /// the initial distribution.
    Initial,
    State(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unavailable {
    Unreachable,
    FilterEmpty,
    NonConvergent,
}

impl fmt::Display for Unavailable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unavailable::Unreachable => "unreachable",
            Unavailable::FilterEmpty => "filter-empty",
            Unavailable::NonConvergent => "non-convergent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum PropertyResult {
    Value(f64),
    Boolean(bool),
    Infinite,
    NotAvailable(Unavailable),
}

/// Report marker for anything without a finite value.
pub const SENTINEL: &str = "---";

impl PropertyResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            PropertyResult::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn boolean(&self) -> Option<bool> {
        match self {
            PropertyResult::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    /// Table rendering: six decimals, booleans as words, `---` otherwise.
    pub fn render(&self) -> String {
        match self {
            PropertyResult::Value(v) => format!("{v:.6}"),
            PropertyResult::Boolean(b) => b.to_string(),
            PropertyResult::Infinite | PropertyResult::NotAvailable(_) => SENTINEL.to_string(),
        }
    }

    fn from_reward(v: RewardValue) -> Self {
        match v {
            RewardValue::Finite(x) => PropertyResult::Value(x),
            RewardValue::Infinite => PropertyResult::Infinite,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("unknown reward structure `{0}`")]
    UnknownReward(String),
    #[error("`state` filter condition matches {matches} reachable states, expected one")]
    AmbiguousFilter { matches: usize },
    #[error("`{0}` is a query, not a predicate")]
    ExpectedPredicate(String),
    #[error("state {state} out of range for a model with {states} states")]
    StateOutOfRange { state: usize, states: usize },
    #[error(transparent)]
    NonConvergent(#[from] NonConvergent),
}

enum Values {
    Bool(StateSet),
    Num(Vec<RewardValue>),
}

/// Evaluator bound to one model. Never mutates the model; long-run
/// structure is computed at most once per checker.
pub struct Checker<'a> {
    model: &'a Dtmc,
    config: SolverConfig,
    long_run: OnceCell<LongRun>,
}

impl<'a> Checker<'a> {
    pub fn new(model: &'a Dtmc) -> Self {
        Self::with_config(model, SolverConfig::default())
    }

    pub fn with_config(model: &'a Dtmc, config: SolverConfig) -> Self {
        Self {
            model,
            config,
            long_run: OnceCell::new(),
        }
    }

    pub fn model(&self) -> &Dtmc {
        self.model
    }

    /// Evaluates a property. Non-convergence becomes a sentinel result;
    /// resolution failures are errors.
    pub fn check(&self, property: &Property, at: At) -> Result<PropertyResult, CheckError> {
        let r = match property {
            Property::Formula(f) => self.check_formula(f, at),
            Property::Filter(fe) => self.check_filter(fe),
        };
        match r {
            Err(CheckError::NonConvergent(_)) => {
                Ok(PropertyResult::NotAvailable(Unavailable::NonConvergent))
            }
            other => other,
        }
    }

    /// Per-state results of a formula.
    pub fn values(&self, f: &StateFormula) -> Result<Vec<PropertyResult>, CheckError> {
        match self.eval(f) {
            Ok(Values::Bool(set)) => Ok((0..set.universe())
                .map(|s| PropertyResult::Boolean(set.contains(s)))
                .collect()),
            Ok(Values::Num(v)) => Ok(v.into_iter().map(PropertyResult::from_reward).collect()),
            Err(CheckError::NonConvergent(_)) => Ok(vec![
                PropertyResult::NotAvailable(Unavailable::NonConvergent);
                self.model.num_states()
            ]),
            Err(e) => Err(e),
        }
    }

    fn check_formula(&self, f: &StateFormula, at: At) -> Result<PropertyResult, CheckError> {
        let m = self.model.num_states();
        if let At::State(s) = at {
            if s >= m {
                return Err(CheckError::StateOutOfRange { state: s, states: m });
            }
        }
        Ok(match (self.eval(f)?, at) {
            (Values::Bool(set), At::State(s)) => PropertyResult::Boolean(set.contains(s)),
            (Values::Num(v), At::State(s)) => PropertyResult::from_reward(v[s]),
            (Values::Bool(set), At::Initial) => {
                PropertyResult::Boolean(self.model.initial_states().is_subset(&set))
            }
            (Values::Num(v), At::Initial) => {
                let mut total = 0.0;
                for (s, &w) in self.model.init().iter().enumerate() {
                    if w > 0.0 {
                        match v[s] {
                            RewardValue::Finite(x) => total += w * x,
                            RewardValue::Infinite => return Ok(PropertyResult::Infinite),
                        }
                    }
                }
                PropertyResult::Value(total)
            }
        })
    }

    fn check_filter(&self, fe: &FilterExpr) -> Result<PropertyResult, CheckError> {
        let condition = self.sat(&fe.condition)?;
        if condition.is_empty() {
            return Ok(PropertyResult::NotAvailable(Unavailable::FilterEmpty));
        }
        let states: Vec<usize> = condition.and(&self.model.reachable_states()).iter().collect();
        if states.is_empty() {
            return Ok(PropertyResult::NotAvailable(Unavailable::Unreachable));
        }
        let inner = self.eval(&fe.inner)?;
        if fe.kind == FilterKind::State {
            if states.len() > 1 {
                return Err(CheckError::AmbiguousFilter {
                    matches: states.len(),
                });
            }
            let s = states[0];
            return Ok(match inner {
                Values::Bool(set) => PropertyResult::Boolean(set.contains(s)),
                Values::Num(v) => PropertyResult::from_reward(v[s]),
            });
        }
        Ok(match inner {
            Values::Bool(set) => {
                let hits = states.iter().filter(|&&s| set.contains(s)).count();
                match fe.kind {
                    FilterKind::Min => PropertyResult::Boolean(hits == states.len()),
                    FilterKind::Max => PropertyResult::Boolean(hits > 0),
                    FilterKind::Sum => PropertyResult::Value(hits as f64),
                    _ => PropertyResult::Value(hits as f64 / states.len() as f64),
                }
            }
            Values::Num(v) => {
                let finite: Vec<f64> = states.iter().filter_map(|&s| v[s].finite()).collect();
                let any_infinite = finite.len() < states.len();
                match fe.kind {
                    FilterKind::Min if finite.is_empty() => PropertyResult::Infinite,
                    FilterKind::Min => {
                        PropertyResult::Value(finite.iter().copied().fold(f64::INFINITY, f64::min))
                    }
                    _ if any_infinite => PropertyResult::Infinite,
                    FilterKind::Max => PropertyResult::Value(
                        finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    ),
                    FilterKind::Sum => PropertyResult::Value(finite.iter().sum()),
                    _ => PropertyResult::Value(finite.iter().sum::<f64>() / finite.len() as f64),
                }
            }
        })
    }

    fn sat(&self, f: &StateFormula) -> Result<StateSet, CheckError> {
        match self.eval(f)? {
            Values::Bool(s) => Ok(s),
            Values::Num(_) => Err(CheckError::ExpectedPredicate(f.to_string())),
        }
    }

    fn eval(&self, f: &StateFormula) -> Result<Values, CheckError> {
        let m = self.model.num_states();
        Ok(match f {
            StateFormula::True => Values::Bool(StateSet::full(m)),
            StateFormula::Atom(a) => Values::Bool(
                self.model
                    .atom(&a.key())
                    .cloned()
                    .ok_or_else(|| CheckError::UnknownAtom(a.to_string()))?,
            ),
            StateFormula::Not(g) => Values::Bool(self.sat(g)?.complement()),
            StateFormula::And(a, b) => Values::Bool(self.sat(a)?.and(&self.sat(b)?)),
            StateFormula::Prob(q, path) => match *q {
                Query::Value => Values::Num(finite(self.path_probabilities(path)?)),
                Query::Bound(cmp, p) => Values::Bool(match self.qualitative(path, cmp, p)? {
                    Some(set) => set,
                    None => compare(&self.path_probabilities(path)?, cmp, p),
                }),
            },
            StateFormula::Steady(q, g) => {
                let phi = self.sat(g)?;
                let mass = self.long_run()?.mass_per_state(&phi);
                match *q {
                    Query::Value => Values::Num(finite(mass)),
                    Query::Bound(cmp, p) => Values::Bool(compare(&mass, cmp, p)),
                }
            }
            StateFormula::RewardReach { reward, target } => {
                let r = self.reward(reward)?;
                let t = self.sat(target)?;
                Values::Num(self.model.reach_reward_with(&r, &t, &self.config)?)
            }
            StateFormula::RewardCumulative { reward, bound } => {
                let r = self.reward(reward)?;
                Values::Num(finite(self.model.cumulative_reward(&r, *bound)))
            }
        })
    }

    fn long_run(&self) -> Result<&LongRun, NonConvergent> {
        if let Some(l) = self.long_run.get() {
            return Ok(l);
        }
        let l = self.model.long_run_with(&self.config)?;
        Ok(self.long_run.get_or_init(|| l))
    }

    /// `rSteps` is one per step; `rState<label>` is the indicator of
    /// `y=<label>`. Structures registered on the model take precedence.
    fn reward(&self, name: &str) -> Result<Cow<'a, RewardStructure>, CheckError> {
        if let Some(r) = self.model.reward(name) {
            return Ok(Cow::Borrowed(r));
        }
        if name == "rSteps" {
            return Ok(Cow::Owned(RewardStructure::steps(self.model.num_states())));
        }
        if let Some(label) = name.strip_prefix("rState") {
            if let Some(set) = self.model.atom(&format!("y={label}")) {
                return Ok(Cow::Owned(RewardStructure::indicator(set)));
            }
        }
        Err(CheckError::UnknownReward(name.to_string()))
    }

    fn path_probabilities(&self, path: &PathFormula) -> Result<Vec<f64>, CheckError> {
        let all = || StateSet::full(self.model.num_states());
        Ok(match path {
            PathFormula::Next(g) => self.model.next(&self.sat(g)?),
            PathFormula::Until(a, b, bound) => self.until(&self.sat(a)?, &self.sat(b)?, *bound)?,
            PathFormula::Eventually(g, bound) => self.until(&all(), &self.sat(g)?, *bound)?,
            PathFormula::Globally(g, bound) => self
                .until(&all(), &self.sat(g)?.complement(), *bound)?
                .into_iter()
                .map(|q| 1.0 - q)
                .collect(),
        })
    }

    fn until(
        &self,
        phi1: &StateSet,
        phi2: &StateSet,
        bound: Option<u64>,
    ) -> Result<Vec<f64>, CheckError> {
        Ok(match bound {
            Some(n) => self.model.bounded_until(phi1, phi2, n),
            None => self.model.unbounded_until_with(phi1, phi2, &self.config)?,
        })
    }

    /// Exact graph-based answers for `P>=1`, `P>0`, `P<=0` and `P<1` on
    /// unbounded path formulas.
    fn qualitative(
        &self,
        path: &PathFormula,
        cmp: Comparison,
        p: f64,
    ) -> Result<Option<StateSet>, CheckError> {
        let all = || StateSet::full(self.model.num_states());
        let (phi1, phi2, negated) = match path {
            PathFormula::Until(a, b, None) => (self.sat(a)?, self.sat(b)?, false),
            PathFormula::Eventually(g, None) => (all(), self.sat(g)?, false),
            PathFormula::Globally(g, None) => (all(), self.sat(g)?.complement(), true),
            _ => return Ok(None),
        };
        // which of "prob is 0" / "prob is 1" the predicate asks about, and
        // whether it is negated
        let (want_one, complement) = match (cmp, p) {
            (Comparison::Ge, x) if x == 1.0 => (true, false),
            (Comparison::Gt, x) if x == 0.0 => (false, true),
            (Comparison::Le, x) if x == 0.0 => (false, false),
            (Comparison::Lt, x) if x == 1.0 => (true, true),
            _ => return Ok(None),
        };
        let no = self.model.prob0(&phi1, &phi2);
        // G flips the until probability q into 1 - q
        let set = if want_one != negated {
            self.model.prob1(&phi1, &phi2, &no)
        } else {
            no
        };
        Ok(Some(if complement { set.complement() } else { set }))
    }
}

fn finite(v: Vec<f64>) -> Vec<RewardValue> {
    v.into_iter().map(RewardValue::Finite).collect()
}

fn compare(values: &[f64], cmp: Comparison, p: f64) -> StateSet {
    StateSet::from_fn(values.len(), |s| cmp.holds(values[s], p))
}

/// One-shot evaluation.
pub fn check(model: &Dtmc, property: &Property, at: At) -> Result<PropertyResult, CheckError> {
    Checker::new(model).check(property, at)
}
