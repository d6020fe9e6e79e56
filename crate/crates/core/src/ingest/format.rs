//! Trace file format: one JSON object per line, `{"user": .., "label": .., "ts": ..}`,
//! or a single JSON array of such objects. Unknown fields are ignored.

use super::{repair_sessions, IngestError, RepairReport, SessionEvent, UserTrace};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Deserialize)]
struct RawEvent {
    user: String,
    label: String,
    ts: u64,
}

#[derive(Serialize)]
struct OutEvent<'a> {
    user: &'a str,
    label: &'a str,
    ts: u64,
}

/// Parsed traces (ordered by user id) plus what had to be repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCorpus {
    pub traces: Vec<UserTrace>,
    pub repairs: RepairReport,
    /// Users that needed at least one repair.
    pub repairs_by_user: BTreeMap<String, RepairReport>,
}

pub fn parse_traces(raw: &[u8]) -> Result<ParsedCorpus, IngestError> {
    let text = std::str::from_utf8(raw).map_err(|e| IngestError::Parse {
        offset: e.valid_up_to(),
        message: "invalid UTF-8".into(),
    })?;

    let raw_events = match text.trim_start().as_bytes().first() {
        Some(b'[') => serde_json::from_str::<Vec<RawEvent>>(text)
            .map_err(|e| json_error(text, 0, &e))?,
        _ => parse_lines(text)?,
    };

    let mut by_user: BTreeMap<String, Vec<SessionEvent>> = BTreeMap::new();
    for e in raw_events {
        by_user
            .entry(e.user)
            .or_default()
            .push(SessionEvent::new(e.label, e.ts));
    }

    let mut corpus = ParsedCorpus {
        traces: Vec::with_capacity(by_user.len()),
        repairs: RepairReport::default(),
        repairs_by_user: BTreeMap::new(),
    };
    for (user, mut events) in by_user {
        events.sort_by_key(|e| e.ts);
        let (sessions, report) = repair_sessions(&events);
        corpus.repairs.merge(&report);
        if report.total() > 0 {
            corpus.repairs_by_user.insert(user.clone(), report);
        }
        corpus.traces.push(UserTrace::new(user, sessions));
    }
    Ok(corpus)
}

fn parse_lines(text: &str) -> Result<Vec<RawEvent>, IngestError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if !line.trim().is_empty() {
            let event = serde_json::from_str::<RawEvent>(line)
                .map_err(|e| json_error(line, offset, &e))?;
            out.push(event);
        }
        offset += line.len();
    }
    Ok(out)
}

/// Converts serde_json's 1-based line/column into a byte offset into `text`.
fn json_error(text: &str, base: usize, err: &serde_json::Error) -> IngestError {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(err.line().saturating_sub(1))
        .map(str::len)
        .sum();
    IngestError::Parse {
        offset: base + line_start + err.column().saturating_sub(1),
        message: err.to_string(),
    }
}

/// Serializes traces in the line-delimited trace format.
pub fn write_traces(traces: &[UserTrace]) -> String {
    let mut out = String::new();
    for trace in traces {
        for e in trace.events() {
            let line = serde_json::to_string(&OutEvent {
                user: &trace.user_id,
                label: &e.label,
                ts: e.ts,
            })
            .expect("plain struct serializes");
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}
