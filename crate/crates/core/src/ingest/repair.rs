use super::{Session, SessionEvent};
use serde::{Deserialize, Serialize};

/// Counts of each repair kind applied while sessionizing an event stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    pub inserted_start: usize,
    pub inserted_stop: usize,
    pub dropped_duplicate: usize,
}

impl RepairReport {
    pub fn total(&self) -> usize {
        self.inserted_start + self.inserted_stop + self.dropped_duplicate
    }

    pub fn merge(&mut self, other: &RepairReport) {
        self.inserted_start += other.inserted_start;
        self.inserted_stop += other.inserted_stop;
        self.dropped_duplicate += other.dropped_duplicate;
    }
}

/// Splits a time-ordered event stream into well-formed sessions.
///
/// Policy:
/// - an exact duplicate of the preceding event (same label, same timestamp) is dropped;
/// - a `startS` inside an open session closes it with a `stopS` stamped at the new `startS`;
/// - an event outside any session opens one with a `startS` stamped at that event;
/// - a session still open at the end of the stream is closed at its last timestamp.
pub fn repair_sessions(events: &[SessionEvent]) -> (Vec<Session>, RepairReport) {
    let mut report = RepairReport::default();
    let mut sessions = Vec::new();
    let mut open: Option<Vec<SessionEvent>> = None;
    let mut previous: Option<&SessionEvent> = None;

    let close = |events: Vec<SessionEvent>, sessions: &mut Vec<Session>| {
        sessions.push(Session::new(events).expect("repair emits well-formed sessions"));
    };

    for event in events {
        if previous == Some(event) {
            report.dropped_duplicate += 1;
            continue;
        }
        previous = Some(event);

        if event.is_start() {
            if let Some(mut current) = open.take() {
                current.push(SessionEvent::new(super::STOP_LABEL, event.ts));
                report.inserted_stop += 1;
                close(current, &mut sessions);
            }
            open = Some(vec![event.clone()]);
            continue;
        }

        let current = open.get_or_insert_with(|| {
            report.inserted_start += 1;
            vec![SessionEvent::new(super::START_LABEL, event.ts)]
        });
        current.push(event.clone());
        if event.is_stop() {
            close(open.take().expect("session is open"), &mut sessions);
        }
    }

    if let Some(mut current) = open {
        let ts = current.last().map_or(0, |e| e.ts);
        current.push(SessionEvent::new(super::STOP_LABEL, ts));
        report.inserted_stop += 1;
        close(current, &mut sessions);
    }

    (sessions, report)
}
