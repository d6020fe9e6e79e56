//! Property files and `${param}` templates.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{is_plain_ident, Property};
use super::parser::{parse_property, ParseError};

/// A substitution for `${name}`. Labels are quoted when they do not lex as
/// a bare identifier; raw text is inserted verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateValue {
    Label(String),
    Raw(String),
}

impl TemplateValue {
    pub fn raw(v: impl ToString) -> Self {
        TemplateValue::Raw(v.to_string())
    }

    pub fn label(v: impl Into<String>) -> Self {
        TemplateValue::Label(v.into())
    }
}

pub type TemplateParams = BTreeMap<String, TemplateValue>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown template parameter `{0}`")]
    UnknownParameter(String),
    #[error("unterminated `${{` at byte {0}")]
    Unterminated(usize),
}

pub fn expand(template: &str, params: &TemplateParams) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = template;
    let mut offset = 0;
    while let Some(c) = rest.chars().next() {
        if !escaped && c == '$' && rest[1..].starts_with('{') {
            let close = rest.find('}').ok_or(TemplateError::Unterminated(offset))?;
            let name = &rest[2..close];
            let value = params
                .get(name)
                .ok_or_else(|| TemplateError::UnknownParameter(name.to_string()))?;
            match value {
                TemplateValue::Raw(v) => out.push_str(v),
                TemplateValue::Label(l) if in_string => {
                    out.push_str(&l.replace('\\', "\\\\").replace('"', "\\\""))
                }
                TemplateValue::Label(l) if is_plain_ident(l) => out.push_str(l),
                TemplateValue::Label(l) => {
                    out.push('"');
                    out.push_str(&l.replace('\\', "\\\\").replace('"', "\\\""));
                    out.push('"');
                }
            }
            rest = &rest[close + 1..];
            offset += close + 1;
            continue;
        }
        if in_string && !escaped && c == '\\' {
            escaped = true;
        } else {
            if c == '"' && !escaped {
                in_string = !in_string;
            }
            escaped = false;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
        offset += c.len_utf8();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedProperty {
    pub name: Option<String>,
    /// Property text after expansion.
    pub text: String,
    pub property: Property,
    /// 1-based line in the source file.
    pub line: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PropertyFileError {
    #[error("line {line}: {source}")]
    Template {
        line: usize,
        #[source]
        source: TemplateError,
    },
    #[error("{0}")]
    Parse(ParseError),
}

/// Splits an optional `Name:` prefix; returns the name and the byte offset
/// of the body.
fn split_name(line: &str) -> (Option<&str>, usize) {
    if let Some(colon) = line.find(':') {
        let head = line[..colon].trim();
        if !head.is_empty()
            && head.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
        {
            return (Some(head), colon + 1);
        }
    }
    (None, 0)
}

/// One property per line; blank lines and `#` comments are skipped.
/// Parse errors carry file line numbers.
pub fn parse_property_file(
    text: &str,
    params: &TemplateParams,
) -> Result<Vec<NamedProperty>, PropertyFileError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (name, body_at) = split_name(raw);
        let body = expand(&raw[body_at..], params).map_err(|source| PropertyFileError::Template {
            line: line_no,
            source,
        })?;
        let property = parse_property(&body).map_err(|e| {
            PropertyFileError::Parse(ParseError {
                line: line_no + e.line - 1,
                column: if e.line == 1 { e.column + body_at } else { e.column },
                message: e.message,
            })
        })?;
        out.push(NamedProperty {
            name: name.map(str::to_string),
            text: body.trim().to_string(),
            property,
            line: line_no,
        });
    }
    Ok(out)
}
