//! Reward-extended PCTL: formulas, a textual property language, and a
//! recursive checker over labelled DTMCs.

mod ast;
mod atoms;
mod check;
mod parser;
mod props;

pub use ast::{Atom, Comparison, FilterExpr, FilterKind, PathFormula, Property, Query, StateFormula};
pub use atoms::{atoms_for, labelled_dtmc, AtomSource, Grouping, GroupingError};
pub use check::{check, At, CheckError, Checker, PropertyResult, Unavailable, SENTINEL};
pub use parser::{parse_formula, parse_property, ParseError};
pub use props::{
    expand, parse_property_file, NamedProperty, PropertyFileError, TemplateError, TemplateParams,
    TemplateValue,
};
