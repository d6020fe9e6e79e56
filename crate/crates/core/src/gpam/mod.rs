//! Generalised population admixture models.
//!
//! A GPAM(K) is a first-order auto-regressive HMM over a vocabulary of `n`
//! observed states: latent components `x ∈ [0, K)` evolve by `A`, and the next
//! observed label is drawn from `B[x'][y][·]`, conditioned on both the new
//! component `x'` and the previous label `y`. Freezing one component gives an
//! activity pattern (a DTMC over labels started in `startS`); the joint process
//! over `(x, y)` pairs is the product chain.

mod fit;

pub use fit::{fit, refine, FitOptions, FitReport, RestartTrace, SMOOTHING};

use crate::dtmc::{Dtmc, DtmcError, STOCHASTIC_TOLERANCE};
use crate::ingest::{IngestError, UserTrace, Vocabulary};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpamError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("component {index} out of range for K = {k}")]
    ComponentOutOfRange { index: usize, k: usize },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dtmc(#[from] DtmcError),
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
}

/// A GPAM(K) over a fixed vocabulary. Parameters are stored flat:
/// `a[x * K + x2]` and `b[(x * n + y) * n + y2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gpam {
    vocab: Vocabulary,
    k: usize,
    pi: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Gpam {
    pub fn new(
        vocab: Vocabulary,
        pi: Vec<f64>,
        a: Vec<Vec<f64>>,
        b: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, GpamError> {
        let k = pi.len();
        let n = vocab.len();
        if a.len() != k || a.iter().any(|r| r.len() != k) {
            return Err(GpamError::InvalidModel(format!("A must be {k}x{k}")));
        }
        if b.len() != k || b.iter().any(|m| m.len() != n || m.iter().any(|r| r.len() != n)) {
            return Err(GpamError::InvalidModel(format!("B must be {k}x{n}x{n}")));
        }
        Self::from_flat(
            vocab,
            pi,
            a.concat(),
            b.into_iter().flat_map(|m| m.concat()).collect(),
        )
    }

    pub(crate) fn from_flat(
        vocab: Vocabulary,
        pi: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self, GpamError> {
        let k = pi.len();
        let n = vocab.len();
        if k == 0 {
            return Err(GpamError::InvalidModel("K must be at least 1".into()));
        }
        if n < 3 {
            return Err(GpamError::InvalidModel(format!(
                "need at least 3 observed states, got {n}"
            )));
        }
        check_distribution("pi", &pi)?;
        for (x, row) in a.chunks(k).enumerate() {
            check_distribution(&format!("A[{x}]"), row)?;
        }
        for (i, row) in b.chunks(n).enumerate() {
            check_distribution(&format!("B[{}][{}]", i / n, i % n), row)?;
        }
        Ok(Self { vocab, k, pi, a, b })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn a(&self, from: usize, to: usize) -> f64 {
        self.a[from * self.k + to]
    }

    pub fn a_row(&self, from: usize) -> &[f64] {
        &self.a[from * self.k..(from + 1) * self.k]
    }

    pub fn b(&self, x: usize, from: usize, to: usize) -> f64 {
        let n = self.n();
        self.b[(x * n + from) * n + to]
    }

    pub fn b_row(&self, x: usize, from: usize) -> &[f64] {
        let n = self.n();
        &self.b[(x * n + from) * n..(x * n + from + 1) * n]
    }

    pub(crate) fn flat(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.pi, &self.a, &self.b)
    }

    /// The same model with component `x` renamed to `perm[x]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, GpamError> {
        let k = self.k;
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        if sorted != (0..k).collect::<Vec<_>>() {
            return Err(GpamError::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{k}"
            )));
        }
        let n = self.n();
        let mut pi = vec![0.0; k];
        let mut a = vec![0.0; k * k];
        let mut b = vec![0.0; k * n * n];
        for x in 0..k {
            pi[perm[x]] = self.pi[x];
            for x2 in 0..k {
                a[perm[x] * k + perm[x2]] = self.a(x, x2);
            }
            let block = n * n;
            b[perm[x] * block..(perm[x] + 1) * block]
                .copy_from_slice(&self.b[x * block..(x + 1) * block]);
        }
        Self::from_flat(self.vocab.clone(), pi, a, b)
    }

    /// The activity pattern of component `x`: the DTMC `B[x]` over labels,
    /// started in `startS`.
    pub fn extract_pattern(&self, x: usize) -> Result<ActivityPatternDtmc, GpamError> {
        if x >= self.k {
            return Err(GpamError::ComponentOutOfRange {
                index: x,
                k: self.k,
            });
        }
        let n = self.n();
        Ok(ActivityPatternDtmc {
            vocab: self.vocab.clone(),
            initial: self.vocab.start_index(),
            matrix: (0..n).map(|y| self.b_row(x, y).to_vec()).collect(),
            component: x,
        })
    }

    /// Joint chain over `(x, y)`: `P((x,y),(x',y')) = A[x][x'] · B[x'][y][y']`,
    /// started with weight `π(x)` on `(x, startS)`.
    pub fn product_chain(&self) -> ProductChain {
        let (k, n) = (self.k, self.n());
        let size = k * n;
        let mut matrix = vec![vec![0.0; size]; size];
        for x in 0..k {
            for y in 0..n {
                let row = &mut matrix[x * n + y];
                for x2 in 0..k {
                    let switch = self.a(x, x2);
                    for (y2, emit) in self.b_row(x2, y).iter().enumerate() {
                        row[x2 * n + y2] = switch * emit;
                    }
                }
            }
        }
        let mut init = vec![0.0; size];
        for x in 0..k {
            init[x * n + self.vocab.start_index()] = self.pi[x];
        }
        ProductChain {
            vocab: self.vocab.clone(),
            k,
            matrix,
            init,
        }
    }

    /// Σ over traces of `log P(trace | model)` by the scaled forward algorithm.
    pub fn log_likelihood(&self, traces: &[UserTrace]) -> Result<f64, GpamError> {
        let mut total = 0.0;
        let mut scratch = fit::Workspace::default();
        for trace in traces {
            let seq = trace.encode(&self.vocab)?;
            total += scratch.forward(self, &seq);
        }
        Ok(total)
    }

    pub fn to_document(&self, fit: Option<FitSummary>) -> ModelDocument {
        let n = self.n();
        ModelDocument {
            k: self.k,
            labels: self.vocab.labels().to_vec(),
            pi: self.pi.clone(),
            a: self.a.chunks(self.k).map(<[f64]>::to_vec).collect(),
            b: (0..self.k)
                .map(|x| (0..n).map(|y| self.b_row(x, y).to_vec()).collect())
                .collect(),
            fit,
        }
    }

    pub fn to_json(&self, fit: Option<FitSummary>) -> String {
        serde_json::to_string_pretty(&self.to_document(fit)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<(Self, Option<FitSummary>), GpamError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.into_model()
    }
}

fn check_distribution(what: &str, row: &[f64]) -> Result<(), GpamError> {
    if let Some(bad) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(GpamError::InvalidModel(format!("{what} has entry {bad}")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(GpamError::InvalidModel(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// Fit metadata stored alongside a serialized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub chosen_restart: usize,
    pub iterations: usize,
    pub log_likelihood: f64,
}

/// On-disk model: `{K, labels, pi, A, B, fit}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(rename = "K")]
    pub k: usize,
    pub labels: Vec<String>,
    pub pi: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
}

impl ModelDocument {
    pub fn into_model(self) -> Result<(Gpam, Option<FitSummary>), GpamError> {
        if self.pi.len() != self.k {
            return Err(GpamError::InvalidModel(format!(
                "K = {} but pi has {} entries",
                self.k,
                self.pi.len()
            )));
        }
        let vocab = Vocabulary::new(self.labels)?;
        Ok((Gpam::new(vocab, self.pi, self.a, self.b)?, self.fit))
    }
}

/// One latent component viewed as a DTMC over observed labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityPatternDtmc {
    pub vocab: Vocabulary,
    /// Index of `startS`.
    pub initial: usize,
    pub matrix: Vec<Vec<f64>>,
    pub component: usize,
}

impl ActivityPatternDtmc {
    pub fn to_dtmc(&self) -> Result<Dtmc, DtmcError> {
        let mut d = Dtmc::with_initial_state(self.matrix.clone(), self.initial)?;
        d.set_state_names(self.vocab.labels().to_vec());
        Ok(d)
    }
}

/// The GPAM's joint chain over `(component, label)`; state `x * n + y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductChain {
    pub vocab: Vocabulary,
    pub k: usize,
    pub matrix: Vec<Vec<f64>>,
    pub init: Vec<f64>,
}

impl ProductChain {
    pub fn state(&self, x: usize, y: usize) -> usize {
        x * self.vocab.len() + y
    }

    pub fn num_states(&self) -> usize {
        self.init.len()
    }

    pub fn to_dtmc(&self) -> Result<Dtmc, DtmcError> {
        let mut d = Dtmc::new(self.matrix.clone(), self.init.clone())?;
        let n = self.vocab.len();
        d.set_state_names(
            (0..self.num_states())
                .map(|s| format!("({},{})", s / n, self.vocab.label(s % n)))
                .collect(),
        );
        Ok(d)
    }
}
