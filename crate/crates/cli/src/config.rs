//! Flat JSON run configuration. Keys match the long flag names; either
//! `max_iters` or `max-iters` style is accepted.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

pub const SEED_ENV: &str = "TRACE_STYLES_SEED";

/// Accepts `2`, `[1, 2]` or `"1,2"`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum KList {
    One(usize),
    Many(Vec<usize>),
    Text(String),
}

impl KList {
    pub fn resolve(&self) -> Result<Vec<usize>> {
        match self {
            KList::One(k) => Ok(vec![*k]),
            KList::Many(ks) => Ok(ks.clone()),
            KList::Text(s) => parse_k_list(s),
        }
    }
}

pub fn parse_k_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .with_context(|| format!("invalid K `{p}`"))
        })
        .collect()
}

/// Accepts `"0:1,0:7"` or `["0:1", "0:7"]`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum IntervalList {
    Text(String),
    Many(Vec<String>),
}

impl IntervalList {
    pub fn joined(&self) -> String {
        match self {
            IntervalList::Text(s) => s.clone(),
            IntervalList::Many(v) => v.join(","),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub intervals: Option<IntervalList>,
    pub k: Option<KList>,
    pub restarts: Option<usize>,
    #[serde(alias = "max-iters")]
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    #[serde(alias = "n-bound")]
    pub n_bound: Option<u64>,
    #[serde(alias = "p-threshold")]
    pub p_threshold: Option<f64>,
    pub grouping: Option<PathBuf>,
    pub props: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub btw: Option<String>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag, then config file, then `TRACE_STYLES_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}=`{v}` is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

/// Parses `A>B,C>D` into label pairs.
pub fn parse_pairs(s: &str) -> Result<Vec<(String, String)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p
                .split_once('>')
                .with_context(|| format!("expected `from>to`, got `{p}`"))?;
            Ok((a.trim().to_string(), b.trim().to_string()))
        })
        .collect()
}
