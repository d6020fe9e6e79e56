//! Event traces: parsing, session repair, time segmentation, vocabularies and
//! transition-occurrence (bigram) matrices.
//!
//! A trace is one user's ordered list of sessions. Every session opens with
//! [`START_LABEL`] and closes with [`STOP_LABEL`]; neither marker appears
//! anywhere else in the session.

mod format;
mod repair;

pub use format::{parse_traces, write_traces, ParsedCorpus};
pub use repair::{repair_sessions, RepairReport};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Session-opening marker (app launched or brought to the foreground).
pub const START_LABEL: &str = "startS";
/// Session-closing marker (app closed or sent to the background).
pub const STOP_LABEL: &str = "stopS";

const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("malformed trace document at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("label `{label}` is not in the vocabulary")]
    UnknownLabel { label: String },
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("invalid session: {0}")]
    Session(String),
    #[error("invalid time interval: {0}")]
    Interval(String),
}

/// One logged event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SessionEvent {
    pub label: String,
    /// Seconds since the epoch.
    pub ts: u64,
}

impl SessionEvent {
    pub fn new(label: impl Into<String>, ts: u64) -> Self {
        Self {
            label: label.into(),
            ts,
        }
    }

    fn is_start(&self) -> bool {
        self.label == START_LABEL
    }

    fn is_stop(&self) -> bool {
        self.label == STOP_LABEL
    }
}

/// A `startS ... stopS` run of events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    events: Vec<SessionEvent>,
}

impl Session {
    pub fn new(events: Vec<SessionEvent>) -> Result<Self, IngestError> {
        let (first, last) = match (events.first(), events.last()) {
            (Some(f), Some(l)) if events.len() >= 2 => (f, l),
            _ => return Err(IngestError::Session("fewer than two events".into())),
        };
        if !first.is_start() || !last.is_stop() {
            return Err(IngestError::Session(format!(
                "must run from {START_LABEL} to {STOP_LABEL}, got {} .. {}",
                first.label, last.label
            )));
        }
        let inner = &events[1..events.len() - 1];
        if inner.iter().any(|e| e.is_start() || e.is_stop()) {
            return Err(IngestError::Session(
                "session marker inside a session".into(),
            ));
        }
        if events.windows(2).any(|w| w[0].ts > w[1].ts) {
            return Err(IngestError::Session("timestamps decrease".into()));
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn start_ts(&self) -> u64 {
        self.events[0].ts
    }

    pub fn end_ts(&self) -> u64 {
        self.events[self.events.len() - 1].ts
    }
}

/// One user's sessions in time order.
///
/// `origin` is the start of the user's first-ever session; it anchors
/// time-interval offsets and survives [`segment`], so segmenting twice with the
/// same interval is a no-op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserTrace {
    pub user_id: String,
    sessions: Vec<Session>,
    origin: Option<u64>,
}

impl UserTrace {
    pub fn new(user_id: impl Into<String>, mut sessions: Vec<Session>) -> Self {
        sessions.sort_by_key(Session::start_ts);
        let origin = sessions.first().map(Session::start_ts);
        Self {
            user_id: user_id.into(),
            sessions,
            origin,
        }
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn origin(&self) -> Option<u64> {
        self.origin
    }

    pub fn event_count(&self) -> usize {
        self.sessions.iter().map(Session::len).sum()
    }

    /// The session-concatenated event stream.
    pub fn events(&self) -> impl Iterator<Item = &SessionEvent> {
        self.sessions.iter().flat_map(|s| s.events.iter())
    }

    /// Maps the event stream onto vocabulary indices.
    pub fn encode(&self, vocab: &Vocabulary) -> Result<Vec<usize>, IngestError> {
        self.events()
            .map(|e| {
                vocab
                    .index_of(&e.label)
                    .ok_or_else(|| IngestError::UnknownLabel {
                        label: e.label.clone(),
                    })
            })
            .collect()
    }
}

/// Ordered label set with a label ↔ index bijection.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    start: usize,
    stop: usize,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl Vocabulary {
    pub fn new(labels: Vec<String>) -> Result<Self, IngestError> {
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(IngestError::Vocabulary("empty label".into()));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(IngestError::Vocabulary(format!("duplicate label `{label}`")));
            }
        }
        let marker = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| IngestError::Vocabulary(format!("missing `{name}`")))
        };
        let start = marker(START_LABEL)?;
        let stop = marker(STOP_LABEL)?;
        Ok(Self {
            labels,
            index,
            start,
            stop,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn start_index(&self) -> usize {
        self.start
    }

    pub fn stop_index(&self) -> usize {
        self.stop
    }
}

/// Every label seen in `traces` plus the two session markers: `startS` first,
/// `stopS` second, the rest in lexicographic order.
pub fn build_vocabulary(traces: &[UserTrace]) -> Vocabulary {
    let mut seen: Vec<&str> = traces
        .iter()
        .flat_map(|t| t.events())
        .map(|e| e.label.as_str())
        .filter(|l| *l != START_LABEL && *l != STOP_LABEL)
        .collect();
    seen.sort_unstable();
    seen.dedup();
    let labels = [START_LABEL, STOP_LABEL]
        .into_iter()
        .chain(seen)
        .map(str::to_owned)
        .collect();
    Vocabulary::new(labels).expect("markers present and labels unique")
}

/// Half-open interval `[start_day, end_day)` of day offsets from a user's
/// first session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start_day: u64,
    pub end_day: u64,
}

impl TimeInterval {
    pub fn new(start_day: u64, end_day: u64) -> Result<Self, IngestError> {
        if start_day >= end_day {
            return Err(IngestError::Interval(format!(
                "start {start_day} must precede end {end_day}"
            )));
        }
        Ok(Self { start_day, end_day })
    }

    /// Directory-safe name, e.g. `0-30`.
    pub fn slug(&self) -> String {
        format!("{}-{}", self.start_day, self.end_day)
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start_day, self.end_day)
    }
}

impl FromStr for TimeInterval {
    type Err = IngestError;

    /// Parses `t1:t2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| IngestError::Interval(format!("expected `t1:t2`, got `{s}`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<u64>()
                .map_err(|e| IngestError::Interval(format!("`{v}`: {e}")))
        };
        Self::new(parse(a)?, parse(b)?)
    }
}

/// Parses a comma-separated interval list such as `0:1,0:7,30:60`.
pub fn parse_intervals(s: &str) -> Result<Vec<TimeInterval>, IngestError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Keeps the sessions that start on or after day `t1` and end strictly before
/// day `t2`, measured from the trace's origin.
pub fn segment(trace: &UserTrace, interval: TimeInterval) -> UserTrace {
    let Some(origin) = trace.origin else {
        return trace.clone();
    };
    let lo = interval.start_day.saturating_mul(SECONDS_PER_DAY);
    let hi = interval.end_day.saturating_mul(SECONDS_PER_DAY);
    let sessions = trace
        .sessions
        .iter()
        .filter(|s| {
            let first = s.start_ts().saturating_sub(origin);
            let last = s.end_ts().saturating_sub(origin);
            first >= lo && last < hi
        })
        .cloned()
        .collect();
    UserTrace {
        user_id: trace.user_id.clone(),
        sessions,
        origin: trace.origin,
    }
}

/// Drops traces with fewer than `min` sessions.
pub fn filter_min_sessions(traces: Vec<UserTrace>, min: usize) -> Vec<UserTrace> {
    traces
        .into_iter()
        .filter(|t| t.sessions.len() >= min)
        .collect()
}

/// `counts[i][j]` = occurrences of the adjacent label pair `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionOccurrenceMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl TransitionOccurrenceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, from: usize, to: usize) -> u64 {
        self.counts[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[u64] {
        &self.counts[from * self.n..(from + 1) * self.n]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, other: &Self) {
        assert_eq!(self.n, other.n, "matrix sizes differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Bigram counts over the trace's session-concatenated event stream; the
/// `stopS → startS` step between consecutive sessions counts as a bigram.
pub fn count_bigrams(
    trace: &UserTrace,
    vocab: &Vocabulary,
) -> Result<TransitionOccurrenceMatrix, IngestError> {
    let encoded = trace.encode(vocab)?;
    let mut m = TransitionOccurrenceMatrix::zeros(vocab.len());
    for w in encoded.windows(2) {
        m.counts[w[0] * m.n + w[1]] += 1;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(labels: &[&str], start: u64) -> Session {
        let events = labels
            .iter()
            .enumerate()
            .map(|(i, l)| SessionEvent::new(*l, start + i as u64))
            .collect();
        Session::new(events).unwrap()
    }

    fn trace_at_days(days: &[u64]) -> UserTrace {
        let sessions = days
            .iter()
            .map(|d| session(&["startS", "Main", "stopS"], d * SECONDS_PER_DAY + 100))
            .collect();
        UserTrace::new("u", sessions)
    }

    fn start_days(t: &UserTrace) -> Vec<u64> {
        let origin = t.origin().unwrap();
        t.sessions()
            .iter()
            .map(|s| (s.start_ts() - origin) / SECONDS_PER_DAY)
            .collect()
    }

    #[test]
    fn session_rejects_inner_markers_and_bad_ends() {
        let ev = |l: &str, t| SessionEvent::new(l, t);
        assert!(Session::new(vec![ev("startS", 0), ev("Main", 1)]).is_err());
        assert!(Session::new(vec![ev("Main", 0), ev("stopS", 1)]).is_err());
        assert!(Session::new(vec![ev("startS", 0), ev("startS", 1), ev("stopS", 2)]).is_err());
        assert!(Session::new(vec![ev("startS", 5), ev("stopS", 1)]).is_err());
        assert!(Session::new(vec![ev("startS", 0), ev("stopS", 0)]).is_ok());
    }

    #[test]
    fn segment_examples() {
        let t = trace_at_days(&[0, 10, 40]);
        let seg = |a, b| segment(&t, TimeInterval::new(a, b).unwrap());
        assert_eq!(start_days(&seg(0, 30)), vec![0, 10]);
        assert_eq!(start_days(&seg(30, 60)), vec![40]);
        assert!(seg(90, 120).sessions().is_empty());
    }

    #[test]
    fn segment_is_idempotent_with_late_interval() {
        let t = trace_at_days(&[0, 10, 40, 41]);
        let iv = TimeInterval::new(30, 60).unwrap();
        let once = segment(&t, iv);
        assert_eq!(segment(&once, iv), once);
        assert_eq!(once.sessions().len(), 2);
    }

    #[test]
    fn segment_excludes_session_ending_on_bound() {
        let s = Session::new(vec![
            SessionEvent::new("startS", 0),
            SessionEvent::new("stopS", 0),
        ])
        .unwrap();
        let straddle = Session::new(vec![
            SessionEvent::new("startS", 30 * SECONDS_PER_DAY - 1),
            SessionEvent::new("stopS", 30 * SECONDS_PER_DAY),
        ])
        .unwrap();
        let t = UserTrace::new("u", vec![s, straddle]);
        let seg = segment(&t, TimeInterval::new(0, 30).unwrap());
        assert_eq!(seg.sessions().len(), 1);
    }

    #[test]
    fn filter_examples() {
        let mk = |n: usize| {
            UserTrace::new(
                format!("u{n}"),
                (0..n).map(|i| session(&["startS", "stopS"], i as u64 * 10)).collect(),
            )
        };
        let traces = vec![mk(3), mk(5), mk(7)];
        let kept = filter_min_sessions(traces.clone(), 5);
        assert_eq!(
            kept.iter().map(|t| t.sessions().len()).collect::<Vec<_>>(),
            vec![5, 7]
        );
        assert_eq!(filter_min_sessions(traces.clone(), 1), traces);
        assert!(filter_min_sessions(traces, 8).is_empty());
    }

    #[test]
    fn vocabulary_ordering() {
        let t = UserTrace::new(
            "u",
            vec![
                session(&["startS", "Stats", "Main", "stopS"], 0),
                session(&["startS", "Main", "stopS"], 10),
            ],
        );
        let v = build_vocabulary(&[t]);
        assert_eq!(v.labels(), ["startS", "stopS", "Main", "Stats"]);
        assert_eq!(v.len(), 4);
        assert_eq!(v.index_of("Stats"), Some(3));
        assert_eq!(v.start_index(), 0);
        assert_eq!(v.stop_index(), 1);
    }

    #[test]
    fn vocabulary_markers_only() {
        let t = UserTrace::new("u", vec![session(&["startS", "stopS"], 0)]);
        assert_eq!(build_vocabulary(&[t]).len(), 2);
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_missing_markers() {
        let v = |ls: &[&str]| Vocabulary::new(ls.iter().map(|s| s.to_string()).collect());
        assert!(v(&["startS", "stopS", "A", "A"]).is_err());
        assert!(v(&["startS", "A"]).is_err());
        assert!(v(&["startS", "stopS", ""]).is_err());
    }

    #[test]
    fn bigram_single_session() {
        let t = UserTrace::new("u", vec![session(&["startS", "Main", "stopS"], 0)]);
        let v = build_vocabulary(std::slice::from_ref(&t));
        let m = count_bigrams(&t, &v).unwrap();
        let (s, e, main) = (0, 1, v.index_of("Main").unwrap());
        assert_eq!(m.get(s, main), 1);
        assert_eq!(m.get(main, e), 1);
        assert_eq!(m.total(), 2);
    }

    #[test]
    fn bigram_crosses_session_boundary() {
        let t = UserTrace::new(
            "u",
            vec![
                session(&["startS", "Main", "stopS"], 0),
                session(&["startS", "Stats", "stopS"], 10),
            ],
        );
        let v = build_vocabulary(std::slice::from_ref(&t));
        let m = count_bigrams(&t, &v).unwrap();
        assert_eq!(m.get(v.stop_index(), v.start_index()), 1);
        assert_eq!(m.total() as usize, t.event_count() - 1);
    }

    #[test]
    fn bigram_unknown_label() {
        let t = UserTrace::new("u", vec![session(&["startS", "Ghost", "stopS"], 0)]);
        let v = Vocabulary::new(vec!["startS".into(), "stopS".into(), "Main".into()]).unwrap();
        assert_eq!(
            count_bigrams(&t, &v),
            Err(IngestError::UnknownLabel {
                label: "Ghost".into()
            })
        );
    }

    #[test]
    fn interval_parsing() {
        let ivs = parse_intervals("0:1, 0:7,30:60").unwrap();
        assert_eq!(ivs[1], TimeInterval::new(0, 7).unwrap());
        assert_eq!(ivs[2].slug(), "30-60");
        assert!("5:5".parse::<TimeInterval>().is_err());
        assert!("5".parse::<TimeInterval>().is_err());
    }
}
