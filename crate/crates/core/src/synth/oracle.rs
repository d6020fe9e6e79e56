use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{step, SynthError};
use crate::dtmc::{Dtmc, StateSet};
use crate::gpam::Gpam;
use crate::ingest::{Vocabulary, START_LABEL, STOP_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStart {
    /// Draw the first state from the initial distribution.
    Initial,
    State(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum McQuery {
    BoundedUntil {
        phi1: StateSet,
        phi2: StateSet,
        bound: u64,
    },
    UnboundedUntil {
        phi1: StateSet,
        phi2: StateSet,
    },
    /// Reward of the states occupied at steps `0..bound`.
    CumulativeReward { rewards: Vec<f64>, bound: u64 },
    /// Reward collected before first entering `target`.
    ReachReward { rewards: Vec<f64>, target: StateSet },
    /// Long-run fraction of time in `phi`, from one path of `samples` steps.
    SteadyOccupancy { phi: StateSet },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Step cap for unbounded queries.
    pub horizon: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            horizon: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Samples that contributed to the estimate.
    pub samples: usize,
    /// Samples that hit the horizon and were dropped.
    pub censored: usize,
}

impl McEstimate {
    pub fn censoring_rate(&self) -> f64 {
        let total = self.samples + self.censored;
        if total == 0 {
            0.0
        } else {
            self.censored as f64 / total as f64
        }
    }

    /// `|estimate - exact| <= z * std_error`, with a floor for
    /// zero-variance estimates.
    pub fn agrees_with(&self, exact: f64, z: f64) -> bool {
        (self.estimate - exact).abs() <= z * self.std_error + 1e-12
    }

    fn from_samples(values: &[f64], censored: usize) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            estimate: mean,
            std_error: (var / n.max(1) as f64).sqrt(),
            samples: n,
            censored,
        }
    }
}

fn start_state(model: &Dtmc, start: McStart, rng: &mut impl Rng) -> usize {
    match start {
        McStart::State(s) => s,
        McStart::Initial => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (s, &p) in model.init().iter().enumerate() {
                acc += p;
                if u < acc {
                    return s;
                }
            }
            model.init().iter().rposition(|&p| p > 0.0).unwrap_or(0)
        }
    }
}

/// Batches for the single-path occupancy estimate.
const BATCHES: usize = 100;

/// Sample mean and standard error of a query by simulation.
pub fn mc_estimate(model: &Dtmc, start: McStart, query: &McQuery, options: &McOptions) -> McEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    if let McQuery::SteadyOccupancy { phi } = query {
        let steps = options.samples.max(BATCHES);
        let per_batch = steps / BATCHES;
        let mut s = start_state(model, start, &mut rng);
        let means: Vec<f64> = (0..BATCHES)
            .map(|_| {
                let mut hits = 0usize;
                for _ in 0..per_batch {
                    s = step(model, s, &mut rng);
                    hits += usize::from(phi.contains(s));
                }
                hits as f64 / per_batch as f64
            })
            .collect();
        // batch means are approximately independent for long batches
        return McEstimate::from_samples(&means, 0);
    }

    let mut values = Vec::with_capacity(options.samples);
    let mut censored = 0;
    for _ in 0..options.samples {
        let mut s = start_state(model, start, &mut rng);
        let outcome: Option<f64> = match query {
            McQuery::BoundedUntil { phi1, phi2, bound } => {
                let mut k = 0;
                loop {
                    if phi2.contains(s) {
                        break Some(1.0);
                    }
                    if !phi1.contains(s) || k == *bound {
                        break Some(0.0);
                    }
                    s = step(model, s, &mut rng);
                    k += 1;
                }
            }
            McQuery::UnboundedUntil { phi1, phi2 } => {
                let mut k = 0;
                loop {
                    if phi2.contains(s) {
                        break Some(1.0);
                    }
                    if !phi1.contains(s) {
                        break Some(0.0);
                    }
                    if k == options.horizon {
                        break None;
                    }
                    s = step(model, s, &mut rng);
                    k += 1;
                }
            }
            McQuery::CumulativeReward { rewards, bound } => {
                let mut total = 0.0;
                for k in 0..*bound {
                    if k > 0 {
                        s = step(model, s, &mut rng);
                    }
                    total += rewards[s];
                }
                Some(total)
            }
            McQuery::ReachReward { rewards, target } => {
                let mut total = 0.0;
                let mut k = 0;
                loop {
                    if target.contains(s) {
                        break Some(total);
                    }
                    if k == options.horizon {
                        break None;
                    }
                    total += rewards[s];
                    s = step(model, s, &mut rng);
                    k += 1;
                }
            }
            McQuery::SteadyOccupancy { .. } => unreachable!(),
        };
        match outcome {
            Some(v) => values.push(v),
            None => censored += 1,
        }
    }
    if censored > 0 {
        log::warn!(
            "{censored} of {} samples hit the {}-step horizon and were dropped",
            options.samples,
            options.horizon
        );
    }
    McEstimate::from_samples(&values, censored)
}

const MAX_BRUTE_STATES: usize = 6;
const MAX_BRUTE_BOUND: u64 = 10;

fn guard(model: &Dtmc, bound: u64) -> Result<(), SynthError> {
    if model.num_states() > MAX_BRUTE_STATES || bound > MAX_BRUTE_BOUND {
        return Err(SynthError::Guard(format!(
            "path enumeration needs at most {MAX_BRUTE_STATES} states and bound {MAX_BRUTE_BOUND}, got {} and {bound}",
            model.num_states()
        )));
    }
    Ok(())
}

/// `phi1 U<=bound phi2` from every state by enumerating paths. A path is
/// extended only until its prefix decides the formula; the decided
/// prefix's probability is the mass of all its extensions.
pub fn brute_force_bounded(
    model: &Dtmc,
    phi1: &StateSet,
    phi2: &StateSet,
    bound: u64,
) -> Result<Vec<f64>, SynthError> {
    guard(model, bound)?;
    fn walk(model: &Dtmc, phi1: &StateSet, phi2: &StateSet, s: usize, prob: f64, left: u64) -> f64 {
        if phi2.contains(s) {
            return prob;
        }
        if !phi1.contains(s) || left == 0 {
            return 0.0;
        }
        model
            .successors(s)
            .iter()
            .map(|&(t, p)| walk(model, phi1, phi2, t, prob * p, left - 1))
            .sum()
    }
    Ok((0..model.num_states())
        .map(|s| walk(model, phi1, phi2, s, 1.0, bound))
        .collect())
}

/// Expected reward over the states at steps `0..bound`, summing over every
/// path of `bound` states.
pub fn brute_force_cumulative(model: &Dtmc, rewards: &[f64], bound: u64) -> Result<Vec<f64>, SynthError> {
    guard(model, bound)?;
    fn walk(model: &Dtmc, rewards: &[f64], s: usize, prob: f64, gained: f64, left: u64) -> f64 {
        let gained = gained + rewards[s];
        if left == 1 {
            return prob * gained;
        }
        model
            .successors(s)
            .iter()
            .map(|&(t, p)| walk(model, rewards, t, prob * p, gained, left - 1))
            .sum()
    }
    Ok((0..model.num_states())
        .map(|s| if bound == 0 { 0.0 } else { walk(model, rewards, s, 1.0, 0.0, bound) })
        .collect())
}

/// States in `within` that can reach `target` (plus `target`), by
/// fixed-point sweeps over the matrix.
fn can_reach(model: &Dtmc, within: &[bool], target: &[bool]) -> Vec<bool> {
    let m = model.num_states();
    let mut reach = target.to_vec();
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..m {
            if !reach[s] && within[s] && (0..m).any(|t| reach[t] && model.prob(s, t) > 0.0) {
                reach[s] = true;
                changed = true;
            }
        }
    }
    reach
}

/// Solves `x_s = base_s + sum_{t in unknown} P(s,t) x_t` for `s` in
/// `unknown` by LU decomposition.
fn solve(model: &Dtmc, unknown: &[usize], base: impl Fn(usize) -> f64) -> Vec<f64> {
    let u = unknown.len();
    if u == 0 {
        return Vec::new();
    }
    let mut a = DMatrix::<f64>::identity(u, u);
    let mut b = DVector::<f64>::zeros(u);
    for (r, &s) in unknown.iter().enumerate() {
        b[r] = base(s);
        for (c, &t) in unknown.iter().enumerate() {
            a[(r, c)] -= model.prob(s, t);
        }
    }
    let x = a.lu().solve(&b).expect("system is non-singular on the unknown states");
    x.iter().copied().collect()
}

/// `phi1 U phi2` from every state by a direct linear solve.
pub fn direct_unbounded_until(model: &Dtmc, phi1: &StateSet, phi2: &StateSet) -> Vec<f64> {
    let m = model.num_states();
    let p1: Vec<bool> = (0..m).map(|s| phi1.contains(s) && !phi2.contains(s)).collect();
    let p2: Vec<bool> = (0..m).map(|s| phi2.contains(s)).collect();
    let reach = can_reach(model, &p1, &p2);
    let unknown: Vec<usize> = (0..m).filter(|&s| reach[s] && !p2[s]).collect();
    let x = solve(model, &unknown, |s| {
        (0..m).filter(|&t| p2[t]).map(|t| model.prob(s, t)).sum()
    });
    let mut out: Vec<f64> = p2.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    for (&s, v) in unknown.iter().zip(x) {
        out[s] = v;
    }
    out
}

/// Expected reward before reaching `target`; `None` where the target is
/// missed with positive probability.
pub fn direct_reach_reward(model: &Dtmc, rewards: &[f64], target: &StateSet) -> Vec<Option<f64>> {
    let m = model.num_states();
    let all = vec![true; m];
    let t: Vec<bool> = (0..m).map(|s| target.contains(s)).collect();
    let reach = can_reach(model, &all, &t);
    let not_target: Vec<bool> = t.iter().map(|&x| !x).collect();
    let lost: Vec<bool> = reach.iter().map(|&r| !r).collect();
    let infinite = can_reach(model, &not_target, &lost);
    let unknown: Vec<usize> = (0..m).filter(|&s| !t[s] && !infinite[s]).collect();
    let x = solve(model, &unknown, |s| rewards[s]);
    let mut out: Vec<Option<f64>> = (0..m)
        .map(|s| if t[s] { Some(0.0) } else { None })
        .collect();
    for (&s, v) in unknown.iter().zip(x) {
        out[s] = Some(v);
    }
    out
}

fn dirichlet(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

fn sparse_row(rng: &mut impl Rng, m: usize, max_out: usize, forced: Option<usize>) -> Vec<f64> {
    let degree = rng.gen_range(1..=max_out.clamp(1, m));
    let mut targets: Vec<usize> = rand::seq::index::sample(rng, m, degree).into_vec();
    if let Some(f) = forced {
        if !targets.contains(&f) {
            targets.push(f);
        }
    }
    let w = dirichlet(rng, targets.len());
    let mut row = vec![0.0; m];
    for (t, p) in targets.into_iter().zip(w) {
        row[t] += p;
    }
    row
}

/// A chain on `m` states, each with 1 to `max_out` successors, started in
/// state 0.
pub fn random_dtmc(rng: &mut impl Rng, m: usize, max_out: usize) -> Dtmc {
    let rows = (0..m).map(|_| sparse_row(rng, m, max_out, None)).collect();
    Dtmc::with_initial_state(rows, 0).expect("rows are distributions")
}

/// As [`random_dtmc`] with an edge `i -> i+1 (mod m)` in every row, so the
/// chain is irreducible.
pub fn random_irreducible_dtmc(rng: &mut impl Rng, m: usize, max_out: usize) -> Dtmc {
    let rows = (0..m)
        .map(|i| sparse_row(rng, m, max_out, Some((i + 1) % m)))
        .collect();
    Dtmc::with_initial_state(rows, 0).expect("rows are distributions")
}

/// A dense random GPAM: Dirichlet(1) rows, no mass on `startS` inside a
/// session, and `stopS` always followed by `startS`.
pub fn random_gpam(rng: &mut impl Rng, vocab: Vocabulary, k: usize) -> Gpam {
    let n = vocab.len();
    let (start, stop) = (vocab.start_index(), vocab.stop_index());
    let pi = dirichlet(rng, k);
    let a = (0..k).map(|_| dirichlet(rng, k)).collect();
    let b = (0..k)
        .map(|_| {
            (0..n)
                .map(|y| {
                    if y == stop {
                        let mut row = vec![0.0; n];
                        row[start] = 1.0;
                        row
                    } else {
                        let mut row = dirichlet(rng, n);
                        let lost = row[start];
                        row[start] = 0.0;
                        row[stop] += lost;
                        row
                    }
                })
                .collect()
        })
        .collect();
    Gpam::new(vocab, pi, a, b).expect("rows are distributions")
}

/// A well-separated GPAM(2) over `startS`, `stopS` and `content` states
/// `s0..`. Both components walk the content states as a cycle, component 0
/// forwards and component 1 backwards: each content row puts 0.65 on its
/// cycle neighbour, 0.15 on `stopS` and spreads 0.2 over the other content
/// states, so every content row differs by total variation at least 0.55
/// while both components visit every state. Sessions open at `s0` or at the
/// last state with probability 0.7. `pi = [0.6, 0.4]`, and `A` stays put
/// with probability 0.95 and 0.96.
pub fn opposed_cycles_gpam(content: usize) -> Result<Gpam, SynthError> {
    if content < 3 {
        return Err(SynthError::Spec("opposed cycles need at least 3 content states".into()));
    }
    let n = content + 2;
    let mut labels = vec![START_LABEL.to_string(), STOP_LABEL.to_string()];
    labels.extend((0..content).map(|i| format!("s{i}")));
    let vocab = Vocabulary::new(labels).map_err(|e| SynthError::Spec(e.to_string()))?;
    let spread = |main: usize, weight: f64, stop: f64| {
        let rest = (1.0 - weight - stop) / (content - 1) as f64;
        let mut row = vec![0.0; n];
        row[1] = stop;
        for c in 0..content {
            row[c + 2] = if c == main { weight } else { rest };
        }
        row
    };
    let component = |forward: bool| {
        let mut rows = vec![spread(if forward { 0 } else { content - 1 }, 0.7, 0.0)];
        let mut stop_row = vec![0.0; n];
        stop_row[0] = 1.0;
        rows.push(stop_row);
        for c in 0..content {
            let next = if forward { (c + 1) % content } else { (c + content - 1) % content };
            rows.push(spread(next, 0.65, 0.15));
        }
        rows
    };
    Gpam::new(
        vocab,
        vec![0.6, 0.4],
        vec![vec![0.95, 0.05], vec![0.04, 0.96]],
        vec![component(true), component(false)],
    )
    .map_err(|e| SynthError::Spec(e.to_string()))
}
