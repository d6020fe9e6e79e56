//! Interaction-style analytics over logged app usage.
//!
//! The pipeline: [`ingest`] event traces into sessions, [`gpam`] fits admixture
//! Markov models, [`pctl`] model-checks reward-extended PCTL properties on the
//! resulting chains (numerics in [`dtmc`]), and [`suite`] turns the results into
//! ranked tables, predominant states and session categories. [`synth`] generates
//! synthetic corpora and independent oracles; [`pipeline`] bundles everything
//! per time interval and model size.

pub mod dtmc;
pub mod gpam;
pub mod ingest;
pub mod pctl;
pub mod pipeline;
pub mod synth;
pub mod suite;
