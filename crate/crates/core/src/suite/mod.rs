//! The named property templates, per-pattern result tables with rank
//! marks, and the analyses built on them.

mod jenks;
mod latent;
mod predominance;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gpam::{Gpam, GpamError};
use crate::ingest::{Vocabulary, START_LABEL, STOP_LABEL};
use crate::pctl::{
    expand, labelled_dtmc, parse_property, AtomSource, At, CheckError, Checker, Grouping,
    GroupingError, ParseError, Property, PropertyResult, TemplateError, TemplateParams,
    TemplateValue,
};

pub use jenks::{jenks_breaks, JenksClassification};
pub use latent::{
    long_run_pattern, long_run_vector, state_to_pattern, state_to_stop, switching_analysis,
    LatentAnalysis, SwitchCell, SwitchingAnalysis,
};
pub use predominance::{predominant_states, PredominanceReport};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("invalid suite parameters: {0}")]
    Params(String),
    #[error("template for {property}: {source}")]
    Template {
        property: PropertyKind,
        #[source]
        source: TemplateError,
    },
    #[error("template for {property} does not parse: {source}")]
    Parse {
        property: PropertyKind,
        #[source]
        source: ParseError,
    },
    #[error("{property} at `{state}`: {source}")]
    Check {
        property: PropertyKind,
        state: String,
        #[source]
        source: CheckError,
    },
    #[error("missing cell {property} for state `{state}`")]
    MissingCell { property: PropertyKind, state: String },
    #[error("natural breaks: {0}")]
    Jenks(String),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    Model(#[from] GpamError),
}

/// The ten named properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropertyKind {
    VisitProbInit,
    StepCountInit,
    VisitCountInit,
    SessionLength,
    SessionCount,
    VisitProbBtw,
    StepCountBtw,
    StateToPattern,
    StateToStop,
    LongRunPattern,
}

impl PropertyKind {
    pub const ALL: [PropertyKind; 10] = [
        PropertyKind::VisitProbInit,
        PropertyKind::StepCountInit,
        PropertyKind::VisitCountInit,
        PropertyKind::SessionLength,
        PropertyKind::SessionCount,
        PropertyKind::VisitProbBtw,
        PropertyKind::StepCountBtw,
        PropertyKind::StateToPattern,
        PropertyKind::StateToStop,
        PropertyKind::LongRunPattern,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropertyKind::VisitProbInit => "VisitProbInit",
            PropertyKind::StepCountInit => "StepCountInit",
            PropertyKind::VisitCountInit => "VisitCountInit",
            PropertyKind::SessionLength => "SessionLength",
            PropertyKind::SessionCount => "SessionCount",
            PropertyKind::VisitProbBtw => "VisitProbBtw",
            PropertyKind::StepCountBtw => "StepCountBtw",
            PropertyKind::StateToPattern => "StateToPattern",
            PropertyKind::StateToStop => "StateToStop",
            PropertyKind::LongRunPattern => "LongRunPattern",
        }
    }

    /// Property text with `${N}`, `${p}`, `${j}`, `${j1}`, `${j2}`,
    /// `${i}`, `${i1}` and `${i2}` placeholders.
    ///
    /// StateToStop's inner until targets `x=i & y=stopS`: with a bare
    /// `stopS` target a step that switches component and stops at once
    /// would count as stopping inside the component.
    pub fn template(self) -> &'static str {
        match self {
            PropertyKind::VisitProbInit => "P=?[ true U<=${N} (y=${j}) ]",
            PropertyKind::StepCountInit => "R{rSteps}=?[ F (y=${j}) ]",
            PropertyKind::VisitCountInit => "R{\"rState${j}\"}=?[ C<=${N} ]",
            PropertyKind::SessionLength => "R{rSteps}=?[ F (y=stopS) ]",
            PropertyKind::SessionCount => "R{rStatestopS}=?[ C<=${N} ]",
            PropertyKind::VisitProbBtw => {
                "filter(state, P=?[ !(y=stopS) U<=${N} (y=${j2}) ], (y=${j1}))"
            }
            PropertyKind::StepCountBtw => "filter(state, R{rSteps}=?[ F (y=${j2}) ], (y=${j1}))",
            PropertyKind::StateToPattern => {
                "P>=1[ F (x=${i1} & y=${j}) ] & P>=1[ G ((x=${i1} & y=${j}) => P>${p}[ (x=${i1} & !(y=stopS)) U (x=${i2}) ]) ]"
            }
            PropertyKind::StateToStop => {
                "P>=1[ F (x=${i} & y=${j}) ] & P>=1[ G ((x=${i} & y=${j}) => P>${p}[ (x=${i}) U (x=${i} & y=stopS) ]) ]"
            }
            PropertyKind::LongRunPattern => "S=?[ x=${i} ]",
        }
    }

    /// `Some(true)` when larger values are better, `Some(false)` when
    /// smaller are, `None` when the property is not ranked.
    pub fn higher_is_better(self) -> Option<bool> {
        match self {
            PropertyKind::VisitProbInit | PropertyKind::VisitProbBtw | PropertyKind::VisitCountInit => {
                Some(true)
            }
            PropertyKind::StepCountInit | PropertyKind::StepCountBtw => Some(false),
            _ => None,
        }
    }

    pub fn instantiate(self, params: &TemplateParams) -> Result<Property, SuiteError> {
        let text = expand(self.template(), params).map_err(|source| SuiteError::Template {
            property: self,
            source,
        })?;
        parse_property(&text).map_err(|source| SuiteError::Parse {
            property: self,
            source,
        })
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    /// Step bound `N`.
    pub n_bound: u64,
    /// Switching threshold `p`.
    pub p_threshold: f64,
    /// `(j1, j2)` pairs for the between-state properties.
    pub btw_pairs: Vec<(String, String)>,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            n_bound: 50,
            p_threshold: 0.5,
            btw_pairs: Vec::new(),
        }
    }
}

impl SuiteParams {
    pub fn validate(&self, vocab: Option<&Vocabulary>) -> Result<(), SuiteError> {
        if self.n_bound < 1 {
            return Err(SuiteError::Params("N must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_threshold) {
            return Err(SuiteError::Params(format!(
                "p = {} is outside [0, 1]",
                self.p_threshold
            )));
        }
        if let Some(v) = vocab {
            for (a, b) in &self.btw_pairs {
                for l in [a, b] {
                    if v.index_of(l).is_none() {
                        return Err(SuiteError::Params(format!("unknown state `{l}` in pair")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Substitutions shared by every template.
    pub fn base_template_params(&self) -> TemplateParams {
        let mut p = TemplateParams::new();
        p.insert("N".into(), TemplateValue::raw(self.n_bound));
        p.insert("p".into(), TemplateValue::raw(self.p_threshold));
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    Best,
    Worst,
    Middle,
}

/// One property at one state (or state pair) across all patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub property: PropertyKind,
    /// A label, `j1>j2` for between-state rows, or `stopS` for the
    /// session-level rows.
    pub state: String,
    pub results: Vec<PropertyResult>,
    /// `None` for unavailable cells and unranked properties.
    pub ranks: Vec<Option<Rank>>,
}

/// Ranks available values: a unique best and worst (lowest pattern index
/// on ties) when at least two differ, `Middle` elsewhere.
pub fn rank_marks(results: &[PropertyResult], higher_is_better: Option<bool>) -> Vec<Option<Rank>> {
    let Some(higher) = higher_is_better else {
        return vec![None; results.len()];
    };
    let avail: Vec<(usize, f64)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.value().map(|v| (i, v)))
        .collect();
    let mut out: Vec<Option<Rank>> = results
        .iter()
        .map(|r| r.value().map(|_| Rank::Middle))
        .collect();
    let all_equal = avail.windows(2).all(|w| w[0].1 == w[1].1);
    if avail.len() < 2 || all_equal {
        return out;
    }
    let better = |a: f64, b: f64| if higher { a > b } else { a < b };
    let mut best = avail[0];
    let mut worst = avail[0];
    for &(i, v) in &avail[1..] {
        if better(v, best.1) {
            best = (i, v);
        }
        if better(worst.1, v) {
            worst = (i, v);
        }
    }
    out[best.0] = Some(Rank::Best);
    out[worst.0] = Some(Rank::Worst);
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-pattern results for every (property, state) row, in insertion
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternResultTable {
    pub patterns: usize,
    pub rows: Vec<SuiteRow>,
}

impl PatternResultTable {
    pub fn new(patterns: usize) -> Self {
        Self {
            patterns,
            rows: Vec::new(),
        }
    }

    /// Adds a row, computing its rank marks. Panics if `results` does not
    /// have one entry per pattern.
    pub fn insert(
        &mut self,
        property: PropertyKind,
        state: impl Into<String>,
        results: Vec<PropertyResult>,
    ) {
        assert_eq!(results.len(), self.patterns, "one result per pattern");
        let ranks = rank_marks(&results, property.higher_is_better());
        self.rows.push(SuiteRow {
            property,
            state: state.into(),
            results,
            ranks,
        });
    }

    pub fn get(&self, property: PropertyKind, state: &str) -> Option<&SuiteRow> {
        self.rows
            .iter()
            .find(|r| r.property == property && r.state == state)
    }

    pub fn states(&self, property: PropertyKind) -> impl Iterator<Item = &str> {
        self.rows
            .iter()
            .filter(move |r| r.property == property)
            .map(|r| r.state.as_str())
    }

    /// `property,state,AP1..APK`, one line per row, `---` for missing
    /// values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("property,state");
        for a in 1..=self.patterns {
            out.push_str(&format!(",AP{a}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(row.property.name());
            out.push(',');
            out.push_str(&csv_field(&row.state));
            for r in &row.results {
                out.push(',');
                out.push_str(&r.render());
            }
            out.push('\n');
        }
        out
    }
}

/// Labels the per-state properties range over: all but `startS`.
pub fn target_states(vocab: &Vocabulary) -> Vec<&str> {
    vocab
        .labels()
        .iter()
        .map(String::as_str)
        .filter(|l| *l != START_LABEL)
        .collect()
}

/// Model-checks the per-pattern properties on every activity pattern.
pub fn run_suite(
    model: &Gpam,
    grouping: &Grouping,
    params: &SuiteParams,
) -> Result<PatternResultTable, SuiteError> {
    let vocab = model.vocab();
    params.validate(Some(vocab))?;
    let dtmcs = (0..model.k())
        .map(|x| {
            let pattern = model.extract_pattern(x)?;
            Ok(labelled_dtmc(AtomSource::Pattern(&pattern), grouping)?)
        })
        .collect::<Result<Vec<_>, SuiteError>>()?;
    let checkers: Vec<Checker<'_>> = dtmcs.iter().map(Checker::new).collect();
    let base = params.base_template_params();
    let mut table = PatternResultTable::new(model.k());

    let mut run = |kind: PropertyKind, state: String, extra: &[(&str, &str)]| {
        let mut p = base.clone();
        for (k, v) in extra {
            p.insert((*k).to_string(), TemplateValue::label(*v));
        }
        let property = kind.instantiate(&p)?;
        let results = checkers
            .iter()
            .map(|c| c.check(&property, At::Initial))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| SuiteError::Check {
                property: kind,
                state: state.clone(),
                source,
            })?;
        table.insert(kind, state, results);
        Ok::<(), SuiteError>(())
    };

    for kind in [
        PropertyKind::VisitProbInit,
        PropertyKind::StepCountInit,
        PropertyKind::VisitCountInit,
    ] {
        for j in target_states(vocab) {
            run(kind, j.to_string(), &[("j", j)])?;
        }
    }
    run(PropertyKind::SessionLength, STOP_LABEL.to_string(), &[])?;
    run(PropertyKind::SessionCount, STOP_LABEL.to_string(), &[])?;
    for kind in [PropertyKind::VisitProbBtw, PropertyKind::StepCountBtw] {
        for (j1, j2) in &params.btw_pairs {
            run(kind, format!("{j1}>{j2}"), &[("j1", j1), ("j2", j2)])?;
        }
    }
    Ok(table)
}

/// Everything the suite reports for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteBundle {
    pub k: usize,
    pub labels: Vec<String>,
    pub params: SuiteParams,
    pub table: PatternResultTable,
    pub predominance: PredominanceReport,
    pub latent: LatentAnalysis,
}

pub fn analyze(
    model: &Gpam,
    grouping: &Grouping,
    params: &SuiteParams,
) -> Result<SuiteBundle, SuiteError> {
    let table = run_suite(model, grouping, params)?;
    let predominance = predominant_states(&table, params)?;
    let latent = latent::latent_analysis(model, params)?;
    Ok(SuiteBundle {
        k: model.k(),
        labels: model.vocab().labels().to_vec(),
        params: params.clone(),
        table,
        predominance,
        latent,
    })
}

impl SuiteBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    /// Session count and length per pattern, for pooled categorisation.
    pub fn session_characteristics(&self) -> Vec<(Option<f64>, Option<f64>)> {
        let count = self.table.get(PropertyKind::SessionCount, STOP_LABEL);
        let length = self.table.get(PropertyKind::SessionLength, STOP_LABEL);
        (0..self.k)
            .map(|a| {
                (
                    count.and_then(|r| r.results[a].value()),
                    length.and_then(|r| r.results[a].value()),
                )
            })
            .collect()
    }
}

/// Binds the placeholders a template line uses, over labels (all but
/// `startS`) and components, and returns each expansion with its bindings.
/// Pair placeholders `j1`/`j2` range over `pairs` when given, otherwise
/// over all ordered pairs of distinct labels; `i1`/`i2` over distinct
/// components.
pub fn expand_over_model(
    line: &str,
    vocab: &Vocabulary,
    k: usize,
    params: &SuiteParams,
) -> Vec<BTreeMap<String, String>> {
    let uses = |name: &str| line.contains(&format!("${{{name}}}"));
    let labels = target_states(vocab);
    let mut bindings: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    let mut extend = |choices: Vec<Vec<(&str, String)>>| {
        bindings = bindings
            .iter()
            .flat_map(|b| {
                choices.iter().map(move |c| {
                    let mut nb = b.clone();
                    for (k, v) in c {
                        nb.insert((*k).to_string(), v.clone());
                    }
                    nb
                })
            })
            .collect();
    };
    if uses("j") {
        extend(labels.iter().map(|l| vec![("j", l.to_string())]).collect());
    }
    if uses("j1") || uses("j2") {
        let pairs: Vec<(String, String)> = if params.btw_pairs.is_empty() {
            labels
                .iter()
                .flat_map(|a| {
                    labels
                        .iter()
                        .filter(move |b| *b != a)
                        .map(move |b| (a.to_string(), b.to_string()))
                })
                .collect()
        } else {
            params.btw_pairs.clone()
        };
        extend(
            pairs
                .into_iter()
                .map(|(a, b)| vec![("j1", a), ("j2", b)])
                .collect(),
        );
    }
    if uses("i") {
        extend((0..k).map(|i| vec![("i", i.to_string())]).collect());
    }
    if uses("i1") || uses("i2") {
        extend(
            (0..k)
                .flat_map(|a| {
                    (0..k)
                        .filter(move |&b| b != a)
                        .map(move |b| vec![("i1", a.to_string()), ("i2", b.to_string())])
                })
                .collect(),
        );
    }
    bindings
}

/// Template parameters for one set of bindings; component indices are
/// raw, labels are quoted as needed.
pub fn binding_params(params: &SuiteParams, binding: &BTreeMap<String, String>) -> TemplateParams {
    let mut p = params.base_template_params();
    for (k, v) in binding {
        let value = if k.starts_with('i') {
            TemplateValue::raw(v)
        } else {
            TemplateValue::label(v.clone())
        };
        p.insert(k.clone(), value);
    }
    p
}
