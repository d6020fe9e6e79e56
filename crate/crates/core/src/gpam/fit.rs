//! Baum-Welch (EM) for GPAMs with seeded restarts.
//!
//! The E-step is a per-step-scaled forward-backward pass over each trace's
//! full event stream, where the label at `t + 1` is emitted by the component
//! occupied at `t + 1` conditioned on the label at `t`. Expected counts get
//! [`SMOOTHING`] added before normalization so every row stays stochastic.

use super::{Gpam, GpamError};
use crate::ingest::{count_bigrams, TransitionOccurrenceMatrix, UserTrace, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Pseudo-count added to every expected count before normalization.
pub const SMOOTHING: f64 = 1e-6;
/// A restart stops once the log-likelihood gains less than this per iteration.
const CONVERGENCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Run restarts on the rayon pool. Results do not depend on this.
    pub parallel: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 200,
            max_iters: 100,
            seed: 0,
            parallel: true,
        }
    }
}

/// Log-likelihood trajectory of one restart; entry 0 is the initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl RestartTrace {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihoods.last().expect("at least one evaluation")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub chosen_restart: usize,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub per_restart: Vec<RestartTrace>,
}

impl FitReport {
    pub fn summary(&self) -> super::FitSummary {
        super::FitSummary {
            seed: self.seed,
            restarts: self.restarts,
            max_iters: self.max_iters,
            chosen_restart: self.chosen_restart,
            iterations: self.iterations,
            log_likelihood: self.log_likelihood,
        }
    }
}

/// Fits a GPAM(K), keeping the restart with the highest final log-likelihood
/// (lowest restart index on ties).
pub fn fit(
    traces: &[UserTrace],
    vocab: &Vocabulary,
    k: usize,
    options: &FitOptions,
) -> Result<(Gpam, FitReport), GpamError> {
    if k < 1 {
        return Err(GpamError::InvalidArgument("K must be at least 1".into()));
    }
    if traces.is_empty() {
        return Err(GpamError::InvalidArgument("empty corpus".into()));
    }
    if vocab.len() < 3 {
        return Err(GpamError::InvalidArgument(format!(
            "need at least 3 observed states, got {}",
            vocab.len()
        )));
    }
    if options.restarts < 1 {
        return Err(GpamError::InvalidArgument("restarts must be at least 1".into()));
    }
    let mut sequences = Vec::with_capacity(traces.len());
    let mut bigrams = TransitionOccurrenceMatrix::zeros(vocab.len());
    for trace in traces {
        if trace.event_count() == 0 {
            return Err(GpamError::InvalidArgument(format!(
                "trace `{}` is empty",
                trace.user_id
            )));
        }
        sequences.push(trace.encode(vocab)?);
        bigrams.add(&count_bigrams(trace, vocab)?);
    }
    let mle = smoothed_bigram_mle(&bigrams);

    if k == 1 {
        // Closed form: the smoothed bigram MLE is the EM fixed point.
        let model = Gpam::from_flat(vocab.clone(), vec![1.0], vec![1.0], mle)?;
        let mut ws = Workspace::default();
        let ll = sequences.iter().map(|s| ws.forward(&model, s)).sum();
        let report = FitReport {
            k,
            seed: options.seed,
            restarts: options.restarts,
            max_iters: options.max_iters,
            chosen_restart: 0,
            iterations: 1,
            log_likelihood: ll,
            per_restart: vec![RestartTrace {
                log_likelihoods: vec![ll],
                iterations: 1,
                converged: true,
            }],
        };
        return Ok((model, report));
    }

    let run = |restart: usize| {
        let init = initialize(vocab, k, &mle, options.seed, restart);
        run_restart(init, &sequences, options.max_iters)
    };
    let results: Vec<(Gpam, RestartTrace)> = if options.parallel {
        (0..options.restarts).into_par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        (0..options.restarts).map(run).collect::<Result<_, _>>()?
    };

    let mut chosen = 0;
    for (i, (_, trace)) in results.iter().enumerate() {
        if trace.final_log_likelihood() > results[chosen].1.final_log_likelihood() {
            chosen = i;
        }
    }
    let per_restart: Vec<RestartTrace> = results.iter().map(|(_, t)| t.clone()).collect();
    let (model, best) = results.into_iter().nth(chosen).expect("chosen restart exists");
    let report = FitReport {
        k,
        seed: options.seed,
        restarts: options.restarts,
        max_iters: options.max_iters,
        chosen_restart: chosen,
        iterations: best.iterations,
        log_likelihood: best.final_log_likelihood(),
        per_restart,
    };
    Ok((model, report))
}

/// Runs EM from `model` on `traces`, at most `max_iters` M-steps, under the
/// same stopping rule as [`fit`].
pub fn refine(
    model: &Gpam,
    traces: &[UserTrace],
    max_iters: usize,
) -> Result<(Gpam, RestartTrace), GpamError> {
    let sequences = traces
        .iter()
        .map(|t| t.encode(model.vocab()))
        .collect::<Result<Vec<_>, _>>()?;
    run_restart(model.clone(), &sequences, max_iters)
}

/// Row-normalized `counts + ε`, flattened.
pub(crate) fn smoothed_bigram_mle(counts: &TransitionOccurrenceMatrix) -> Vec<f64> {
    let n = counts.size();
    let mut out = Vec::with_capacity(n * n);
    for y in 0..n {
        let row = counts.row(y);
        let total: f64 = row.iter().map(|c| *c as f64 + SMOOTHING).sum();
        out.extend(row.iter().map(|c| (*c as f64 + SMOOTHING) / total));
    }
    out
}

/// Symmetric Dirichlet(1) draw.
fn dirichlet_flat(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..len)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

fn initialize(vocab: &Vocabulary, k: usize, mle: &[f64], seed: u64, restart: usize) -> Gpam {
    let n = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let pi = dirichlet_flat(&mut rng, k);
    let a: Vec<f64> = (0..k).flat_map(|_| dirichlet_flat(&mut rng, k)).collect();
    let mut b = Vec::with_capacity(k * n * n);
    for _ in 0..k {
        for y in 0..n {
            let noise = dirichlet_flat(&mut rng, n);
            let row = &mle[y * n..(y + 1) * n];
            b.extend(noise.iter().zip(row).map(|(d, m)| 0.5 * d + 0.5 * m));
        }
    }
    Gpam::from_flat(vocab.clone(), pi, a, b).expect("initial parameters are stochastic")
}

/// EM from `model` until the log-likelihood gains less than [`CONVERGENCE`]
/// or `max_iters` M-steps have run.
pub(crate) fn run_restart(
    mut model: Gpam,
    sequences: &[Vec<usize>],
    max_iters: usize,
) -> Result<(Gpam, RestartTrace), GpamError> {
    let mut ws = Workspace::default();
    let mut stats = Counts::new(model.k, model.n());
    let mut current = ws.e_step(&model, sequences, &mut stats);
    let mut trace = RestartTrace {
        log_likelihoods: vec![current],
        iterations: 0,
        converged: false,
    };
    for _ in 0..max_iters {
        let candidate = stats.m_step(model.vocab())?;
        let ll = ws.e_step(&candidate, sequences, &mut stats);
        trace.iterations += 1;
        trace.log_likelihoods.push(ll);
        model = candidate;
        let gain = ll - current;
        current = ll;
        if gain < CONVERGENCE {
            trace.converged = true;
            break;
        }
    }
    Ok((model, trace))
}

/// Expected sufficient statistics of one E-step.
struct Counts {
    k: usize,
    n: usize,
    pi: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Counts {
    fn new(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            pi: vec![0.0; k],
            a: vec![0.0; k * k],
            b: vec![0.0; k * n * n],
        }
    }

    fn clear(&mut self) {
        self.pi.fill(0.0);
        self.a.fill(0.0);
        self.b.fill(0.0);
    }

    fn m_step(&self, vocab: &Vocabulary) -> Result<Gpam, GpamError> {
        fn normalize_rows(counts: &[f64], width: usize) -> Vec<f64> {
            counts
                .chunks(width)
                .flat_map(|row| {
                    let total: f64 = row.iter().map(|c| c + SMOOTHING).sum();
                    row.iter().map(move |c| (c + SMOOTHING) / total)
                })
                .collect()
        }
        Gpam::from_flat(
            vocab.clone(),
            normalize_rows(&self.pi, self.k),
            normalize_rows(&self.a, self.k),
            normalize_rows(&self.b, self.n),
        )
    }
}

/// Reusable forward-backward buffers.
#[derive(Default)]
pub(crate) struct Workspace {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    scale: Vec<f64>,
    predict: Vec<f64>,
    terms: Vec<f64>,
    sums: Vec<f64>,
}

/// Sum of `terms` in ascending order, so relabelling components cannot
/// change a single bit of the result.
fn ordered_sum(terms: &mut [f64]) -> f64 {
    match terms {
        [] => 0.0,
        [a] => *a,
        // a + b == b + a exactly
        [a, b] => *a + *b,
        _ => {
            terms.sort_unstable_by(f64::total_cmp);
            terms.iter().sum()
        }
    }
}

impl Workspace {
    /// Scaled forward pass; returns `log P(y_1..y_T | y_0)` and leaves the
    /// normalized forward variables in `alpha` and scales in `scale`.
    pub(crate) fn forward(&mut self, model: &Gpam, seq: &[usize]) -> f64 {
        let (k, n) = (model.k, model.n());
        let (pi, a, b) = model.flat();
        let len = seq.len();
        self.alpha.clear();
        self.alpha.resize(len * k, 0.0);
        self.scale.clear();
        self.scale.resize(len, 1.0);
        self.predict.resize(k, 0.0);

        self.terms.clear();
        self.terms.extend_from_slice(pi);
        let total = ordered_sum(&mut self.terms);
        for x in 0..k {
            self.alpha[x] = pi[x] / total;
        }
        let mut ll = total.ln();
        for t in 0..len.saturating_sub(1) {
            let (y, y2) = (seq[t], seq[t + 1]);
            let (past, future) = self.alpha.split_at_mut((t + 1) * k);
            let prev = &past[t * k..];
            let next = &mut future[..k];
            self.sums.clear();
            for x2 in 0..k {
                self.terms.clear();
                self.terms.extend((0..k).map(|x| prev[x] * a[x * k + x2]));
                let v = ordered_sum(&mut self.terms) * b[(x2 * n + y) * n + y2];
                next[x2] = v;
                self.sums.push(v);
            }
            let c = ordered_sum(&mut self.sums);
            for v in next.iter_mut() {
                *v /= c;
            }
            self.scale[t + 1] = c;
            ll += c.ln();
        }
        ll
    }

    /// Accumulates expected counts for all sequences into `stats` and returns
    /// the total log-likelihood.
    fn e_step(&mut self, model: &Gpam, sequences: &[Vec<usize>], stats: &mut Counts) -> f64 {
        stats.clear();
        let (k, n) = (model.k, model.n());
        let (_, a, b) = model.flat();
        let mut total = 0.0;
        for seq in sequences {
            total += self.forward(model, seq);
            let len = seq.len();
            self.beta.clear();
            self.beta.resize(len * k, 1.0);
            for t in (0..len.saturating_sub(1)).rev() {
                let (y, y2) = (seq[t], seq[t + 1]);
                let c = self.scale[t + 1];
                for x2 in 0..k {
                    self.predict[x2] = b[(x2 * n + y) * n + y2] * self.beta[(t + 1) * k + x2] / c;
                }
                for x in 0..k {
                    let mut s = 0.0;
                    for x2 in 0..k {
                        s += a[x * k + x2] * self.predict[x2];
                    }
                    self.beta[t * k + x] = s;
                }
                // Transition and emission counts for step t -> t+1.
                for x in 0..k {
                    let from = self.alpha[t * k + x];
                    if from == 0.0 {
                        continue;
                    }
                    for x2 in 0..k {
                        stats.a[x * k + x2] += from * a[x * k + x2] * self.predict[x2];
                    }
                }
                for x2 in 0..k {
                    let gamma = self.alpha[(t + 1) * k + x2] * self.beta[(t + 1) * k + x2];
                    stats.b[(x2 * n + y) * n + y2] += gamma;
                }
            }
            for x in 0..k {
                stats.pi[x] += self.alpha[x] * self.beta[x];
            }
        }
        total
    }
}
