//! End-to-end runs: segment, fit, analyse, and render reports per
//! (interval, K) cell. The CLI is a thin layer over this module.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gpam::{fit, FitOptions, FitReport, Gpam, GpamError};
use crate::ingest::{segment, TimeInterval, UserTrace, Vocabulary};
use crate::pctl::{
    labelled_dtmc, parse_property_file, At, AtomSource, Checker, CheckError, Grouping,
    GroupingError, PropertyFileError, PropertyResult, SENTINEL,
};
use crate::suite::{
    analyze, binding_params, expand_over_model, jenks_breaks, JenksClassification, SuiteBundle,
    SuiteError, SuiteParams,
};

/// Jenks classes for session counts and lengths.
pub const SESSION_CLASSES: usize = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no sessions in interval {0}")]
    EmptyInterval(String),
    #[error("fit failed: {0}")]
    Fit(#[from] GpamError),
    #[error("analysis failed: {0}")]
    Suite(#[from] SuiteError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Empty means the whole corpus, reported as `all`.
    pub intervals: Vec<TimeInterval>,
    pub ks: Vec<usize>,
    pub fit: FitOptions,
    pub suite: SuiteParams,
    pub grouping: Grouping,
}

/// Directory name for an optional interval.
pub fn interval_slug(interval: Option<TimeInterval>) -> String {
    interval.map_or_else(|| "all".to_string(), |i| i.slug())
}

/// Traces restricted to `interval`, dropping those left without sessions.
pub fn interval_traces(traces: &[UserTrace], interval: Option<TimeInterval>) -> Vec<UserTrace> {
    traces
        .iter()
        .map(|t| match interval {
            Some(i) => segment(t, i),
            None => t.clone(),
        })
        .filter(|t| !t.sessions().is_empty())
        .collect()
}

/// Fitted model and report for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FitCell {
    pub interval: Option<TimeInterval>,
    pub k: usize,
    pub traces: usize,
    pub model: Gpam,
    pub report: FitReport,
}

impl FitCell {
    pub fn dir(&self) -> PathBuf {
        PathBuf::from(interval_slug(self.interval)).join(format!("K{}", self.k))
    }

    pub fn model_json(&self) -> String {
        with_newline(self.model.to_json(Some(self.report.summary())))
    }

    pub fn report_json(&self) -> String {
        with_newline(serde_json::to_string_pretty(&self.report).expect("report serializes"))
    }
}

pub fn fit_cell(
    traces: &[UserTrace],
    vocab: &Vocabulary,
    interval: Option<TimeInterval>,
    k: usize,
    options: &FitOptions,
) -> Result<FitCell, PipelineError> {
    let selected = interval_traces(traces, interval);
    if selected.is_empty() {
        return Err(PipelineError::EmptyInterval(interval_slug(interval)));
    }
    let (model, report) = fit(&selected, vocab, k, options)?;
    Ok(FitCell {
        interval,
        k,
        traces: selected.len(),
        model,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCell {
    pub fit: FitCell,
    pub bundle: SuiteBundle,
}

impl SuiteCell {
    /// Files relative to the output root.
    pub fn files(&self) -> Vec<(PathBuf, String)> {
        let dir = self.fit.dir();
        vec![
            (dir.join("model.json"), self.fit.model_json()),
            (dir.join("fitreport.json"), self.fit.report_json()),
            (dir.join("suite.csv"), self.bundle.table.to_csv()),
            (dir.join("suite.json"), with_newline(self.bundle.to_json())),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFailure {
    pub interval: String,
    pub k: usize,
    pub message: String,
}

/// One pattern's session characteristics with its categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub interval: String,
    pub pattern: String,
    pub session_count: Option<f64>,
    pub session_length: Option<f64>,
    pub count_class: Option<usize>,
    pub length_class: Option<usize>,
    pub predominant: Vec<String>,
}

/// Pooled categorisation of every pattern fitted with the same K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCategories {
    pub k: usize,
    pub counts: Option<JenksClassification>,
    pub lengths: Option<JenksClassification>,
    /// Why a classification is missing, if one is.
    pub notes: Vec<String>,
    pub entries: Vec<SessionEntry>,
    /// `cross[count_class][length_class]` = number of patterns.
    pub cross: Vec<Vec<usize>>,
}

fn classify(values: &[f64], what: &str, notes: &mut Vec<String>) -> Option<JenksClassification> {
    match jenks_breaks(values, SESSION_CLASSES) {
        Ok(c) => Some(c),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    }
}

/// Classifies session counts and lengths with natural breaks and tabulates
/// the two categorisations against each other.
pub fn categorize(k: usize, mut entries: Vec<SessionEntry>) -> SessionCategories {
    let mut notes = Vec::new();
    let count_values: Vec<f64> = entries.iter().filter_map(|e| e.session_count).collect();
    let length_values: Vec<f64> = entries.iter().filter_map(|e| e.session_length).collect();
    let counts = classify(&count_values, "session count", &mut notes);
    let lengths = classify(&length_values, "session length", &mut notes);
    let mut cross = vec![vec![0; SESSION_CLASSES]; SESSION_CLASSES];
    for e in &mut entries {
        e.count_class = counts.as_ref().zip(e.session_count).map(|(c, v)| c.class_of(v));
        e.length_class = lengths.as_ref().zip(e.session_length).map(|(c, v)| c.class_of(v));
        if let (Some(a), Some(b)) = (e.count_class, e.length_class) {
            cross[a][b] += 1;
        }
    }
    SessionCategories {
        k,
        counts,
        lengths,
        notes,
        entries,
        cross,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub cells: Vec<String>,
    pub failures: Vec<CellFailure>,
    pub categories: Vec<SessionCategories>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub cells: Vec<SuiteCell>,
    pub failures: Vec<CellFailure>,
    pub summary: RunSummary,
}

impl PipelineOutcome {
    /// Every output file, relative to the root, in a fixed order.
    pub fn files(&self) -> BTreeMap<PathBuf, String> {
        let mut files: BTreeMap<PathBuf, String> =
            self.cells.iter().flat_map(SuiteCell::files).collect();
        files.insert(
            PathBuf::from("summary.json"),
            with_newline(serde_json::to_string_pretty(&self.summary).expect("summary serializes")),
        );
        files
    }
}

/// Fits and analyses every (interval, K) cell. A failing cell is recorded
/// and the run continues.
pub fn run_pipeline(traces: &[UserTrace], vocab: &Vocabulary, config: &PipelineConfig) -> PipelineOutcome {
    let intervals: Vec<Option<TimeInterval>> = if config.intervals.is_empty() {
        vec![None]
    } else {
        config.intervals.iter().copied().map(Some).collect()
    };
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for &interval in &intervals {
        for &k in &config.ks {
            log::info!("interval {} K={k}", interval_slug(interval));
            let result = fit_cell(traces, vocab, interval, k, &config.fit).and_then(|fit| {
                let bundle = analyze(&fit.model, &config.grouping, &config.suite)?;
                Ok(SuiteCell { fit, bundle })
            });
            match result {
                Ok(cell) => cells.push(cell),
                Err(e) => {
                    log::error!("interval {} K={k}: {e}", interval_slug(interval));
                    failures.push(CellFailure {
                        interval: interval_slug(interval),
                        k,
                        message: e.to_string(),
                    });
                }
            }
        }
    }

    let mut by_k: BTreeMap<usize, Vec<SessionEntry>> = BTreeMap::new();
    for cell in &cells {
        let chars = cell.bundle.session_characteristics();
        for (a, (count, length)) in chars.into_iter().enumerate() {
            by_k.entry(cell.fit.k).or_default().push(SessionEntry {
                interval: interval_slug(cell.fit.interval),
                pattern: format!("AP{}", a + 1),
                session_count: count,
                session_length: length,
                count_class: None,
                length_class: None,
                predominant: cell.bundle.predominance.patterns[a].clone(),
            });
        }
    }
    let summary = RunSummary {
        cells: cells
            .iter()
            .map(|c| c.fit.dir().to_string_lossy().replace('\\', "/"))
            .collect(),
        failures: failures.clone(),
        categories: by_k.into_iter().map(|(k, e)| categorize(k, e)).collect(),
    };
    PipelineOutcome {
        cells,
        failures,
        summary,
    }
}

#[derive(Debug, Error)]
pub enum CheckRunError {
    #[error(transparent)]
    File(#[from] PropertyFileError),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error("line {line}: {source}")]
    Check {
        line: usize,
        #[source]
        source: CheckError,
    },
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Model(#[from] GpamError),
}

/// Where a property was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Once per activity pattern.
    Pattern,
    /// On the product chain; the property mentions components.
    Product,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub property: String,
    pub state: String,
    pub line: usize,
    pub text: String,
    pub scope: Scope,
    pub results: Vec<PropertyResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub k: usize,
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    /// `property,state,AP1..APK,product`; pattern rows leave `product`
    /// empty and product rows leave the pattern columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("property,state");
        for a in 1..=self.k {
            out.push_str(&format!(",AP{a}"));
        }
        out.push_str(",product\n");
        for row in &self.rows {
            out.push_str(&csv_field(&row.property));
            out.push(',');
            out.push_str(&csv_field(&row.state));
            let cells: Vec<String> = match row.scope {
                Scope::Pattern => row
                    .results
                    .iter()
                    .map(PropertyResult::render)
                    .chain([String::new()])
                    .collect(),
                Scope::Product => std::iter::repeat_n(String::new(), self.k)
                    .chain([row.results[0].render()])
                    .collect(),
            };
            for c in cells {
                out.push(',');
                out.push_str(&c);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        with_newline(serde_json::to_string_pretty(self).expect("report serializes"))
    }

    /// True when any result is a sentinel.
    pub fn has_sentinels(&self) -> bool {
        self.rows
            .iter()
            .flat_map(|r| &r.results)
            .any(|r| r.render() == SENTINEL)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Row key for a binding: the label for `j`, `j1>j2` for pairs, and
/// `key=value` pairs otherwise.
fn binding_key(binding: &BTreeMap<String, String>) -> String {
    let get = |k: &str| binding.get(k).map(String::as_str);
    match (binding.len(), get("j"), get("j1"), get("j2")) {
        (1, Some(j), _, _) => j.to_string(),
        (2, _, Some(a), Some(b)) => format!("{a}>{b}"),
        _ => binding
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";"),
    }
}

fn shift_line(e: PropertyFileError, line: usize) -> PropertyFileError {
    match e {
        PropertyFileError::Template { source, .. } => PropertyFileError::Template { line, source },
        PropertyFileError::Parse(mut p) => {
            p.line += line - 1;
            PropertyFileError::Parse(p)
        }
    }
}

/// Checks every line of a property file against a model. Placeholders
/// other than `N` and `p` are expanded over labels and components; a
/// property that mentions components runs on the product chain, anything
/// else runs on each activity pattern from its initial state.
pub fn check_properties(
    model: &Gpam,
    grouping: &Grouping,
    params: &SuiteParams,
    text: &str,
) -> Result<CheckReport, CheckRunError> {
    params.validate(Some(model.vocab()))?;
    let patterns = (0..model.k())
        .map(|x| {
            let p = model.extract_pattern(x)?;
            Ok(labelled_dtmc(AtomSource::Pattern(&p), grouping)?)
        })
        .collect::<Result<Vec<_>, CheckRunError>>()?;
    let chain = model.product_chain();
    let product = labelled_dtmc(AtomSource::Product(&chain), grouping)?;
    let pattern_checkers: Vec<Checker<'_>> = patterns.iter().map(Checker::new).collect();
    let product_checker = Checker::new(&product);

    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        for binding in expand_over_model(line, model.vocab(), model.k(), params) {
            let tp = binding_params(params, &binding);
            let parsed = parse_property_file(line, &tp).map_err(|e| shift_line(e, line_no))?;
            let Some(np) = parsed.into_iter().next() else {
                continue;
            };
            let uses_components = np
                .property
                .atoms()
                .iter()
                .any(|a| matches!(a, crate::pctl::Atom::Component(_)));
            let check = |c: &Checker<'_>| {
                c.check(&np.property, At::Initial)
                    .map_err(|source| CheckRunError::Check {
                        line: line_no,
                        source,
                    })
            };
            let (scope, results) = if uses_components {
                (Scope::Product, vec![check(&product_checker)?])
            } else {
                (
                    Scope::Pattern,
                    pattern_checkers.iter().map(check).collect::<Result<_, _>>()?,
                )
            };
            rows.push(CheckRow {
                property: np.name.unwrap_or_else(|| format!("line{line_no}")),
                state: binding_key(&binding),
                line: line_no,
                text: np.text,
                scope,
                results,
            });
        }
    }
    Ok(CheckReport { k: model.k(), rows })
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}
