//! Atom registries for activity patterns and product chains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtmc::{Dtmc, DtmcError, StateSet};
use crate::gpam::{ActivityPatternDtmc, ProductChain};
use crate::ingest::Vocabulary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupingError {
    #[error("grouping file: {0}")]
    Json(String),
    #[error("group `{group}` names unknown label `{label}`")]
    UnknownLabel { group: String, label: String },
    #[error(transparent)]
    Dtmc(#[from] DtmcError),
}

/// Named, possibly overlapping sets of labels, read from a JSON object
/// `{"<group>": ["<label>", ...], ...}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grouping(BTreeMap<String, Vec<String>>);

impl Grouping {
    pub fn new(groups: BTreeMap<String, Vec<String>>) -> Self {
        Self(groups)
    }

    /// Blank text is the empty grouping.
    pub fn from_json(text: &str) -> Result<Self, GroupingError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(text).map_err(|e| GroupingError::Json(e.to_string()))
    }

    pub fn groups(&self) -> &BTreeMap<String, Vec<String>> {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Label indices per group, failing on labels outside `vocab`.
    pub fn resolve(&self, vocab: &Vocabulary) -> Result<BTreeMap<String, Vec<usize>>, GroupingError> {
        self.0
            .iter()
            .map(|(g, labels)| {
                let idx = labels
                    .iter()
                    .map(|l| {
                        vocab.index_of(l).ok_or_else(|| GroupingError::UnknownLabel {
                            group: g.clone(),
                            label: l.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((g.clone(), idx))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum AtomSource<'a> {
    Pattern(&'a ActivityPatternDtmc),
    Product(&'a ProductChain),
}

impl AtomSource<'_> {
    fn vocab(&self) -> &Vocabulary {
        match self {
            AtomSource::Pattern(p) => &p.vocab,
            AtomSource::Product(c) => &c.vocab,
        }
    }
}

/// `y=<label>` for every label, `x=<i>` per component on product chains,
/// and `group=<name>` per group.
pub fn atoms_for(
    source: AtomSource<'_>,
    grouping: &Grouping,
) -> Result<BTreeMap<String, StateSet>, GroupingError> {
    let vocab = source.vocab();
    let n = vocab.len();
    let groups = grouping.resolve(vocab)?;
    let mut out = BTreeMap::new();
    match source {
        AtomSource::Pattern(_) => {
            for (y, label) in vocab.labels().iter().enumerate() {
                out.insert(format!("y={label}"), StateSet::from_indices(n, [y]));
            }
            for (g, idx) in groups {
                out.insert(format!("group={g}"), StateSet::from_indices(n, idx));
            }
        }
        AtomSource::Product(chain) => {
            let m = chain.num_states();
            for (y, label) in vocab.labels().iter().enumerate() {
                out.insert(
                    format!("y={label}"),
                    StateSet::from_fn(m, |s| s % n == y),
                );
            }
            for x in 0..chain.k {
                out.insert(format!("x={x}"), StateSet::from_fn(m, |s| s / n == x));
            }
            for (g, idx) in groups {
                out.insert(
                    format!("group={g}"),
                    StateSet::from_fn(m, |s| idx.contains(&(s % n))),
                );
            }
        }
    }
    Ok(out)
}

/// The source as a [`Dtmc`] with its atoms registered.
pub fn labelled_dtmc(source: AtomSource<'_>, grouping: &Grouping) -> Result<Dtmc, GroupingError> {
    let mut d = match source {
        AtomSource::Pattern(p) => p.to_dtmc()?,
        AtomSource::Product(c) => c.to_dtmc()?,
    };
    for (name, set) in atoms_for(source, grouping)? {
        d.add_atom(name, set)?;
    }
    Ok(d)
}
