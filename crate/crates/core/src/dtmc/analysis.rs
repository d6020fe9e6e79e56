use super::{Dtmc, NonConvergent, RewardStructure, SolverConfig, StateSet};
use serde::{Deserialize, Serialize};

/// A reachability-reward value: finite, or infinite when the target is
/// missed with positive probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardValue {
    Finite(f64),
    Infinite,
}

impl RewardValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            RewardValue::Finite(v) => Some(v),
            RewardValue::Infinite => None,
        }
    }
}

impl Dtmc {
    fn indicator(set: &StateSet) -> Vec<f64> {
        (0..set.universe())
            .map(|s| if set.contains(s) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Probability of `X phi` from each state.
    pub fn next(&self, phi: &StateSet) -> Vec<f64> {
        (0..self.num_states())
            .map(|s| {
                self.successors(s)
                    .iter()
                    .filter(|(t, _)| phi.contains(*t))
                    .map(|(_, p)| p)
                    .sum()
            })
            .collect()
    }

    /// Probability of `phi1 U<=bound phi2` from each state, by `bound`
    /// backward steps.
    pub fn bounded_until(&self, phi1: &StateSet, phi2: &StateSet, bound: u64) -> Vec<f64> {
        let m = self.num_states();
        let mut current = Self::indicator(phi2);
        let mut next = vec![0.0; m];
        for _ in 0..bound {
            for s in 0..m {
                next[s] = if phi2.contains(s) {
                    1.0
                } else if !phi1.contains(s) {
                    0.0
                } else {
                    self.successors(s).iter().map(|&(t, p)| p * current[t]).sum()
                };
            }
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    /// Probability of `phi1 U phi2` from each state.
    pub fn unbounded_until(
        &self,
        phi1: &StateSet,
        phi2: &StateSet,
    ) -> Result<Vec<f64>, NonConvergent> {
        self.unbounded_until_with(phi1, phi2, &SolverConfig::default())
    }

    pub fn unbounded_until_with(
        &self,
        phi1: &StateSet,
        phi2: &StateSet,
        config: &SolverConfig,
    ) -> Result<Vec<f64>, NonConvergent> {
        let no = self.prob0(phi1, phi2);
        let yes = self.prob1(phi1, phi2, &no);
        let mut x = Self::indicator(&yes);
        let maybe: Vec<usize> = yes.or(&no).complement().iter().collect();
        self.gauss_seidel(&maybe, &mut x, |_| 0.0, config)?;
        Ok(x)
    }

    /// Gauss-Seidel sweeps of `x[s] (1 - P(s,s)) = base(s) + Σ_{t≠s} P(s,t) x[t]`
    /// over `unknown`. Stops once the sweep change and the estimated
    /// remaining error `δ·ρ/(1-ρ)` are both below tolerance, with `ρ` the
    /// contraction observed over the last few sweeps.
    fn gauss_seidel(
        &self,
        unknown: &[usize],
        x: &mut [f64],
        base: impl Fn(usize) -> f64,
        config: &SolverConfig,
    ) -> Result<usize, NonConvergent> {
        const WINDOW: usize = 8;
        if unknown.is_empty() {
            return Ok(0);
        }
        let mut history = std::collections::VecDeque::with_capacity(WINDOW + 1);
        let mut last_change = f64::INFINITY;
        for iteration in 1..=config.max_iterations {
            let mut change: f64 = 0.0;
            for &s in unknown {
                let mut stay = 0.0;
                let mut flow = base(s);
                for &(t, p) in self.successors(s) {
                    if t == s {
                        stay += p;
                    } else {
                        flow += p * x[t];
                    }
                }
                let value = flow / (1.0 - stay);
                change = change.max((value - x[s]).abs());
                x[s] = value;
            }
            last_change = change;
            if change == 0.0 {
                return Ok(iteration);
            }
            history.push_back(change);
            if history.len() > WINDOW {
                let first = history.pop_front().unwrap_or(change);
                let ratio = (change / first).powf(1.0 / WINDOW as f64);
                let remaining = if ratio < 1.0 {
                    change * ratio / (1.0 - ratio)
                } else {
                    f64::INFINITY
                };
                if change < config.tolerance && remaining < config.tolerance {
                    return Ok(iteration);
                }
            }
        }
        Err(NonConvergent {
            iterations: config.max_iterations,
            last_change,
        })
    }

    /// Expected reward accumulated before first entering `target`; infinite
    /// where `target` is reached with probability below one.
    pub fn reach_reward(
        &self,
        rewards: &RewardStructure,
        target: &StateSet,
    ) -> Result<Vec<RewardValue>, NonConvergent> {
        self.reach_reward_with(rewards, target, &SolverConfig::default())
    }

    pub fn reach_reward_with(
        &self,
        rewards: &RewardStructure,
        target: &StateSet,
        config: &SolverConfig,
    ) -> Result<Vec<RewardValue>, NonConvergent> {
        let m = self.num_states();
        let all = StateSet::full(m);
        let no = self.prob0(&all, target);
        let sure = self.prob1(&all, target, &no);
        let unknown: Vec<usize> = sure.minus(target).iter().collect();
        let mut x = vec![0.0; m];
        self.gauss_seidel(&unknown, &mut x, |s| rewards.get(s), config)?;
        Ok((0..m)
            .map(|s| {
                if sure.contains(s) {
                    RewardValue::Finite(x[s])
                } else {
                    RewardValue::Infinite
                }
            })
            .collect())
    }

    /// Expected reward collected in the states occupied at steps
    /// `0..bound`.
    pub fn cumulative_reward(&self, rewards: &RewardStructure, bound: u64) -> Vec<f64> {
        let m = self.num_states();
        let mut current = vec![0.0; m];
        let mut next = vec![0.0; m];
        for _ in 0..bound {
            for s in 0..m {
                next[s] = rewards.get(s)
                    + self
                        .successors(s)
                        .iter()
                        .map(|&(t, p)| p * current[t])
                        .sum::<f64>();
            }
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    /// Long-run structure: BSCCs, their stationary vectors, and absorption
    /// probabilities into each.
    pub fn long_run(&self) -> Result<LongRun, NonConvergent> {
        self.long_run_with(&SolverConfig::default())
    }

    pub fn long_run_with(&self, config: &SolverConfig) -> Result<LongRun, NonConvergent> {
        let m = self.num_states();
        let bsccs = self.bsccs();
        let mut stationary = Vec::with_capacity(bsccs.len());
        for component in &bsccs {
            stationary.push(self.bscc_stationary(component, config)?);
        }
        let absorption = if bsccs.len() == 1 {
            vec![vec![1.0; m]]
        } else {
            let all = StateSet::full(m);
            bsccs
                .iter()
                .map(|c| {
                    let target = StateSet::from_indices(m, c.iter().copied());
                    self.unbounded_until_with(&all, &target, config)
                })
                .collect::<Result<_, _>>()?
        };
        Ok(LongRun {
            m,
            bsccs,
            stationary,
            absorption,
        })
    }

    /// Long-run occupation distribution starting from the initial distribution.
    pub fn steady_state(&self) -> Result<Vec<f64>, NonConvergent> {
        Ok(self.long_run()?.distribution(self.init()))
    }

    /// Stationary distribution of one BSCC. One state is pinned at 1 and
    /// Gauss-Seidel sweeps solve `x_j (1 - P_jj) = Σ_{i≠j} x_i P_ij` for the
    /// rest (a non-singular system, so the sweeps converge even on periodic
    /// components); the result is then normalized. The pinned state is the
    /// heaviest after a short lazy power iteration, since sweeps contract at
    /// the rate the chain returns to it.
    fn bscc_stationary(
        &self,
        component: &[usize],
        config: &SolverConfig,
    ) -> Result<Vec<f64>, NonConvergent> {
        let k = component.len();
        if k == 1 {
            return Ok(vec![1.0]);
        }
        let m = self.num_states();
        let mut local = vec![usize::MAX; m];
        for (i, &s) in component.iter().enumerate() {
            local[s] = i;
        }
        let normalized = |x: &[f64]| {
            let total: f64 = x.iter().sum();
            x.iter().map(|v| v / total).collect::<Vec<f64>>()
        };
        let pivot = self.heaviest_state(component, &local);
        let order: Vec<usize> = (0..k).filter(|&j| j != pivot).collect();
        let mut x = vec![1.0; k];
        let mut pi = normalized(&x);
        let mut last_change = f64::INFINITY;
        for _ in 0..config.max_iterations {
            for &j in &order {
                let s = component[j];
                let stay = self.prob(s, s);
                // transient predecessors outside the BSCC carry no long-run mass
                let inflow: f64 = self
                    .predecessors(s)
                    .iter()
                    .filter(|&&(i, _)| i != s && local[i] != usize::MAX)
                    .map(|&(i, p)| p * x[local[i]])
                    .sum();
                x[j] = inflow / (1.0 - stay);
            }
            let next = normalized(&x);
            let change = next
                .iter()
                .zip(&pi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let ratio = if last_change.is_finite() && last_change > 0.0 {
                change / last_change
            } else {
                0.0
            };
            pi = next;
            last_change = change;
            let remaining = if ratio < 1.0 {
                change * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            if change < config.tolerance && remaining < config.tolerance {
                return Ok(pi);
            }
        }
        Err(NonConvergent {
            iterations: config.max_iterations,
            last_change,
        })
    }

    /// Local index of the largest entry after a few steps of `(I + P) / 2`
    /// from the uniform distribution on `component`.
    fn heaviest_state(&self, component: &[usize], local: &[usize]) -> usize {
        const STEPS: usize = 64;
        let k = component.len();
        let mut v = vec![1.0 / k as f64; k];
        for _ in 0..STEPS {
            let mut next: Vec<f64> = v.iter().map(|p| p / 2.0).collect();
            for (i, &s) in component.iter().enumerate() {
                for &(t, p) in self.successors(s) {
                    next[local[t]] += v[i] * p / 2.0;
                }
            }
            v = next;
        }
        (0..k).fold(0, |best, j| if v[j] > v[best] { j } else { best })
    }
}

/// BSCC decomposition with per-BSCC stationary distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRun {
    m: usize,
    bsccs: Vec<Vec<usize>>,
    stationary: Vec<Vec<f64>>,
    /// `absorption[b][s]`: probability of eventually entering BSCC `b` from `s`.
    absorption: Vec<Vec<f64>>,
}

impl LongRun {
    pub fn bsccs(&self) -> &[Vec<usize>] {
        &self.bsccs
    }

    /// Long-run occupation distribution from a starting distribution.
    pub fn distribution(&self, start: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (b, component) in self.bsccs.iter().enumerate() {
            let weight: f64 = start
                .iter()
                .zip(&self.absorption[b])
                .map(|(p, a)| p * a)
                .sum();
            for (&s, &pi) in component.iter().zip(&self.stationary[b]) {
                out[s] += weight * pi;
            }
        }
        out
    }

    /// Long-run probability of being in `phi`, from each state.
    pub fn mass_per_state(&self, phi: &StateSet) -> Vec<f64> {
        let in_bscc: Vec<f64> = self
            .bsccs
            .iter()
            .zip(&self.stationary)
            .map(|(c, pi)| {
                c.iter()
                    .zip(pi)
                    .filter(|(s, _)| phi.contains(**s))
                    .map(|(_, p)| p)
                    .sum()
            })
            .collect();
        (0..self.m)
            .map(|s| {
                self.absorption
                    .iter()
                    .zip(&in_bscc)
                    .map(|(a, mass)| a[s] * mass)
                    .sum()
            })
            .collect()
    }
}
