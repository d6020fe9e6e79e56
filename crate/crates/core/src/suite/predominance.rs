use serde::{Deserialize, Serialize};

use super::{PatternResultTable, PropertyKind, SuiteError, SuiteParams};
use crate::ingest::{START_LABEL, STOP_LABEL};

/// Predominant states per pattern, strongest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredominanceReport {
    pub patterns: Vec<Vec<String>>,
}

struct Scores {
    prob: Option<f64>,
    count: Option<f64>,
    steps: Option<f64>,
}

/// A state is predominant in pattern `a` when its visit probability
/// exceeds 0.5, its visit count exceeds 1 and its step count is below `N`,
/// and no other pattern has both a visit count at least three times as high
/// and a step count at most a third. Session markers are never
/// predominant.
pub fn predominant_states(
    table: &PatternResultTable,
    params: &SuiteParams,
) -> Result<PredominanceReport, SuiteError> {
    let k = table.patterns;
    let n = params.n_bound as f64;
    let mut patterns: Vec<Vec<(String, f64, f64)>> = vec![Vec::new(); k];
    let states: Vec<&str> = table
        .states(PropertyKind::VisitProbInit)
        .filter(|s| *s != START_LABEL && *s != STOP_LABEL)
        .collect();
    for state in states {
        let row = |p: PropertyKind| {
            table.get(p, state).ok_or_else(|| SuiteError::MissingCell {
                property: p,
                state: state.to_string(),
            })
        };
        let (prob, count, steps) = (
            row(PropertyKind::VisitProbInit)?,
            row(PropertyKind::VisitCountInit)?,
            row(PropertyKind::StepCountInit)?,
        );
        let scores: Vec<Scores> = (0..k)
            .map(|a| Scores {
                prob: prob.results[a].value(),
                count: count.results[a].value(),
                steps: steps.results[a].value(),
            })
            .collect();
        for a in 0..k {
            let (Some(p), Some(c), Some(s)) = (scores[a].prob, scores[a].count, scores[a].steps)
            else {
                continue;
            };
            if !(p > 0.5 && c > 1.0 && s < n) {
                continue;
            }
            let dominated = scores.iter().enumerate().any(|(b, other)| {
                b != a
                    && matches!(
                        (other.count, other.steps),
                        (Some(cb), Some(sb)) if cb >= 3.0 * c && sb <= s / 3.0
                    )
            });
            if !dominated {
                patterns[a].push((state.to_string(), c, s));
            }
        }
    }
    Ok(PredominanceReport {
        patterns: patterns
            .into_iter()
            .map(|mut list| {
                list.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.2.total_cmp(&y.2)));
                list.into_iter().map(|(s, _, _)| s).collect()
            })
            .collect(),
    })
}
