//! Exact one-dimensional natural breaks.

use serde::{Deserialize, Serialize};

use super::SuiteError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JenksClassification {
    pub k: usize,
    /// Upper bound (largest member) of every class but the last.
    pub breaks: Vec<f64>,
    /// Members of each class, ascending.
    pub classes: Vec<Vec<f64>>,
    /// Goodness of variance fit, `1 - SDCM / SDAM`.
    pub gvf: f64,
}

impl JenksClassification {
    /// Class index of `v`: the first class whose upper bound is >= `v`.
    pub fn class_of(&self, v: f64) -> usize {
        self.breaks.iter().position(|&b| v <= b).unwrap_or(self.k - 1)
    }
}

/// Partitions `values` into `k` contiguous classes minimising the total
/// within-class squared deviation. Equal values always share a class. Among
/// optimal partitions the one with the smallest first break wins.
pub fn jenks_breaks(values: &[f64], k: usize) -> Result<JenksClassification, SuiteError> {
    if values.is_empty() {
        return Err(SuiteError::Jenks("no values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SuiteError::Jenks("values must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for &v in &sorted {
        match distinct.last_mut() {
            Some((d, w)) if *d == v => *w += 1.0,
            _ => distinct.push((v, 1.0)),
        }
    }
    let m = distinct.len();
    if k == 0 || k > m {
        return Err(SuiteError::Jenks(format!(
            "cannot form {k} classes from {m} distinct values"
        )));
    }

    // centred prefix sums keep the variance formula well conditioned
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let mut w = vec![0.0; m + 1];
    let mut s1 = vec![0.0; m + 1];
    let mut s2 = vec![0.0; m + 1];
    for (i, &(v, c)) in distinct.iter().enumerate() {
        let d = v - mean;
        w[i + 1] = w[i] + c;
        s1[i + 1] = s1[i] + c * d;
        s2[i + 1] = s2[i] + c * d * d;
    }
    // squared deviation of distinct[a..b]
    let cost = |a: usize, b: usize| {
        let (ww, x1, x2) = (w[b] - w[a], s1[b] - s1[a], s2[b] - s2[a]);
        (x2 - x1 * x1 / ww).max(0.0)
    };

    // best[c][i]: optimal cost of splitting distinct[i..] into c classes
    let mut best = vec![vec![f64::INFINITY; m + 1]; k + 1];
    best[0][m] = 0.0;
    for c in 1..=k {
        for i in (0..m).rev() {
            let mut b = f64::INFINITY;
            for e in i + 1..=m - (c - 1) {
                let v = cost(i, e) + best[c - 1][e];
                if v < b {
                    b = v;
                }
            }
            best[c][i] = b;
        }
    }

    let mut bounds = Vec::with_capacity(k);
    let mut i = 0;
    for c in (1..=k).rev() {
        let target = best[c][i];
        let mut chosen = m;
        for e in i + 1..=m - (c - 1) {
            let v = cost(i, e) + best[c - 1][e];
            // relative slack so rounding does not break exact ties
            if v <= target + 1e-12 * (1.0 + target.abs()) {
                chosen = e;
                break;
            }
        }
        bounds.push((i, chosen));
        i = chosen;
    }

    let classes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(a, b)| {
            distinct[a..b]
                .iter()
                .flat_map(|&(v, c)| std::iter::repeat(v).take(c as usize))
                .collect()
        })
        .collect();
    let breaks = classes[..k - 1]
        .iter()
        .map(|c| *c.last().expect("classes are non-empty"))
        .collect();
    let sdam = cost(0, m);
    let sdcm = best[k][0];
    let gvf = if sdam > 0.0 { 1.0 - sdcm / sdam } else { 1.0 };
    Ok(JenksClassification {
        k,
        breaks,
        classes,
        gvf,
    })
}
