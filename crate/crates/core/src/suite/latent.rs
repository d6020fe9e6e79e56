//! Long-run pattern occupancy and latent switching on the product chain.

use serde::{Deserialize, Serialize};

use super::{target_states, PropertyKind, SuiteError, SuiteParams};
use crate::dtmc::Dtmc;
use crate::gpam::Gpam;
use crate::ingest::STOP_LABEL;
use crate::pctl::{
    labelled_dtmc, parse_formula, At, AtomSource, Checker, Grouping, PropertyResult,
    TemplateValue,
};

/// Result of a switching property at one product state `(from, state)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchCell {
    pub state: String,
    pub reachable: bool,
    /// The property's truth value from the initial distribution.
    pub holds: PropertyResult,
    /// The inner until probability at `(from, state)`.
    pub likelihood: PropertyResult,
}

/// StateToPattern (`to = Some(i2)`) or StateToStop (`to = None`) from
/// component `from`, for every state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingAnalysis {
    pub from: usize,
    pub to: Option<usize>,
    pub cells: Vec<SwitchCell>,
    /// Mean likelihood over reachable non-stop states with a value.
    pub average: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentAnalysis {
    pub long_run: Vec<PropertyResult>,
    /// `switching[i1][i2]`: average StateToPattern likelihood; `None` on
    /// the diagonal.
    pub switching: Vec<Vec<Option<f64>>>,
    /// Average StateToStop likelihood per component.
    pub to_stop: Vec<Option<f64>>,
    pub details: Vec<SwitchingAnalysis>,
}

struct Product<'m> {
    model: &'m Gpam,
    dtmc: Dtmc,
}

impl<'m> Product<'m> {
    fn new(model: &'m Gpam) -> Result<Self, SuiteError> {
        let chain = model.product_chain();
        let dtmc = labelled_dtmc(AtomSource::Product(&chain), &Grouping::default())?;
        Ok(Self { model, dtmc })
    }

    fn component(&self, i: usize) -> Result<(), SuiteError> {
        if i >= self.model.k() {
            return Err(SuiteError::Params(format!(
                "component {i} out of range for K={}",
                self.model.k()
            )));
        }
        Ok(())
    }

    fn long_run(&self, checker: &Checker<'_>, i: usize) -> Result<PropertyResult, SuiteError> {
        self.component(i)?;
        let mut p = SuiteParams::default().base_template_params();
        p.insert("i".into(), TemplateValue::raw(i));
        let property = PropertyKind::LongRunPattern.instantiate(&p)?;
        checker
            .check(&property, At::Initial)
            .map_err(|source| SuiteError::Check {
                property: PropertyKind::LongRunPattern,
                state: format!("x={i}"),
                source,
            })
    }

    fn switching(
        &self,
        checker: &Checker<'_>,
        from: usize,
        to: Option<usize>,
        threshold: f64,
        only: Option<&str>,
    ) -> Result<SwitchingAnalysis, SuiteError> {
        self.component(from)?;
        let kind = match to {
            Some(i2) => {
                self.component(i2)?;
                if i2 == from {
                    return Err(SuiteError::Params("switching needs two distinct components".into()));
                }
                PropertyKind::StateToPattern
            }
            None => PropertyKind::StateToStop,
        };
        let inner_text = match to {
            Some(i2) => format!("P=?[ (x={from} & !(y=stopS)) U (x={i2}) ]"),
            None => format!("P=?[ (x={from}) U (x={from} & y=stopS) ]"),
        };
        let inner = parse_formula(&inner_text).expect("inner formula parses");
        let err = |state: &str| {
            let state = state.to_string();
            move |source| SuiteError::Check {
                property: kind,
                state,
                source,
            }
        };
        let likelihoods = checker.values(&inner).map_err(err("*"))?;
        let reachable = self.dtmc.reachable_states();
        let vocab = self.model.vocab();
        let n = vocab.len();

        let mut base = SuiteParams::default().base_template_params();
        base.insert("p".into(), TemplateValue::raw(threshold));
        let mut cells = Vec::new();
        for j in target_states(vocab) {
            if only.is_some_and(|o| o != j) {
                continue;
            }
            let mut params = base.clone();
            params.insert("j".into(), TemplateValue::label(j));
            match to {
                Some(i2) => {
                    params.insert("i1".into(), TemplateValue::raw(from));
                    params.insert("i2".into(), TemplateValue::raw(i2));
                }
                None => {
                    params.insert("i".into(), TemplateValue::raw(from));
                }
            }
            let property = kind.instantiate(&params)?;
            let holds = checker.check(&property, At::Initial).map_err(err(j))?;
            let s = from * n + vocab.index_of(j).expect("target state is in vocabulary");
            cells.push(SwitchCell {
                state: j.to_string(),
                reachable: reachable.contains(s),
                holds,
                likelihood: likelihoods[s],
            });
        }
        let used: Vec<f64> = cells
            .iter()
            .filter(|c| c.reachable && c.state != STOP_LABEL)
            .filter_map(|c| c.likelihood.value())
            .collect();
        let average = (!used.is_empty()).then(|| used.iter().sum::<f64>() / used.len() as f64);
        Ok(SwitchingAnalysis {
            from,
            to,
            cells,
            average,
        })
    }
}

/// `S=?[x=i]` on the product chain.
pub fn long_run_pattern(model: &Gpam, i: usize) -> Result<PropertyResult, SuiteError> {
    let product = Product::new(model)?;
    let checker = Checker::new(&product.dtmc);
    product.long_run(&checker, i)
}

pub fn long_run_vector(model: &Gpam) -> Result<Vec<PropertyResult>, SuiteError> {
    let product = Product::new(model)?;
    let checker = Checker::new(&product.dtmc);
    (0..model.k()).map(|i| product.long_run(&checker, i)).collect()
}

fn single_cell(
    model: &Gpam,
    from: usize,
    to: Option<usize>,
    j: &str,
    p: f64,
) -> Result<SwitchCell, SuiteError> {
    if model.vocab().index_of(j).is_none() {
        return Err(SuiteError::Params(format!("unknown state `{j}`")));
    }
    let product = Product::new(model)?;
    let checker = Checker::new(&product.dtmc);
    let analysis = product.switching(&checker, from, to, p, Some(j))?;
    analysis
        .cells
        .into_iter()
        .next()
        .ok_or_else(|| SuiteError::Params(format!("`{j}` is not a target state")))
}

/// StateToPattern from `i1` to `i2` at state `j`.
pub fn state_to_pattern(
    model: &Gpam,
    i1: usize,
    i2: usize,
    j: &str,
    p: f64,
) -> Result<SwitchCell, SuiteError> {
    single_cell(model, i1, Some(i2), j, p)
}

/// StateToStop within component `i` at state `j`.
pub fn state_to_stop(model: &Gpam, i: usize, j: &str, p: f64) -> Result<SwitchCell, SuiteError> {
    single_cell(model, i, None, j, p)
}

/// StateToPattern (`to = Some`) or StateToStop for every state.
pub fn switching_analysis(
    model: &Gpam,
    from: usize,
    to: Option<usize>,
    p: f64,
) -> Result<SwitchingAnalysis, SuiteError> {
    let product = Product::new(model)?;
    let checker = Checker::new(&product.dtmc);
    product.switching(&checker, from, to, p, None)
}

pub(crate) fn latent_analysis(model: &Gpam, params: &SuiteParams) -> Result<LatentAnalysis, SuiteError> {
    let k = model.k();
    let product = Product::new(model)?;
    let checker = Checker::new(&product.dtmc);
    let long_run = (0..k)
        .map(|i| product.long_run(&checker, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut switching = vec![vec![None; k]; k];
    let mut to_stop = vec![None; k];
    let mut details = Vec::new();
    for i1 in 0..k {
        for i2 in (0..k).filter(|&i2| i2 != i1) {
            let a = product.switching(&checker, i1, Some(i2), params.p_threshold, None)?;
            switching[i1][i2] = a.average;
            details.push(a);
        }
        let a = product.switching(&checker, i1, None, params.p_threshold, None)?;
        to_stop[i1] = a.average;
        details.push(a);
    }
    Ok(LatentAnalysis {
        long_run,
        switching,
        to_stop,
        details,
    })
}
