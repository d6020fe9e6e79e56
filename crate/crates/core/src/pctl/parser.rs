//! Recursive-descent parser for property text.

use thiserror::Error;

use super::ast::{
    Atom, Comparison, FilterExpr, FilterKind, PathFormula, Property, Query, StateFormula,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

const KEYWORDS: &[&str] = &[
    "true", "false", "P", "S", "R", "X", "F", "G", "U", "C", "filter", "x", "y", "group",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Bang,
    Amp,
    Pipe,
    Implies,
    Eq,
    EqQuery,
    Lt,
    Le,
    Gt,
    Ge,
    Number(String),
    Ident(String),
    Str(String),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::End => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Bang => "!",
            Tok::Amp => "&",
            Tok::Pipe => "|",
            Tok::Implies => "=>",
            Tok::Eq => "=",
            Tok::EqQuery => "=?",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            _ => "",
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let peek = chars.get(i + 1).copied();
        let (tok, width) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            ',' => (Tok::Comma, 1),
            '!' => (Tok::Bang, 1),
            '&' => (Tok::Amp, 1),
            '|' => (Tok::Pipe, 1),
            '=' if peek == Some('>') => (Tok::Implies, 2),
            '=' if peek == Some('?') => (Tok::EqQuery, 2),
            '=' => (Tok::Eq, 1),
            '<' if peek == Some('=') => (Tok::Le, 2),
            '<' => (Tok::Lt, 1),
            '>' if peek == Some('=') => (Tok::Ge, 2),
            '>' => (Tok::Gt, 1),
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None | Some('\n') => {
                            return Err(err(start_line, start_col, "unterminated string".into()))
                        }
                        Some('"') => break,
                        Some('\\') => {
                            match chars.get(j + 1) {
                                Some(&e @ ('"' | '\\')) => s.push(e),
                                _ => {
                                    return Err(err(
                                        start_line,
                                        start_col + (j - i),
                                        "invalid escape in string".into(),
                                    ))
                                }
                            }
                            j += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                (Tok::Str(s), j + 1 - i)
            }
            d if d.is_ascii_digit() || (d == '.' && peek.is_some_and(|p| p.is_ascii_digit())) => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                (Tok::Number(chars[i..j].iter().collect()), j - i)
            }
            a if a.is_alphabetic() || a == '_' => {
                let mut j = i + 1;
                while j < chars.len()
                    && (chars[j].is_alphanumeric()
                        || chars[j] == '_'
                        || chars[j] == '.'
                        || chars[j] == '-')
                {
                    j += 1;
                }
                (Tok::Ident(chars[i..j].iter().collect()), j - i)
            }
            other => {
                return Err(err(
                    start_line,
                    start_col,
                    format!("unexpected character `{other}`"),
                ))
            }
        };
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
        i += width;
        col += width;
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError {
            line: s.line,
            column: s.column,
            message: message.into(),
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{}`", tok.symbol())))
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn property(&mut self) -> Result<Property, ParseError> {
        if self.is_ident("filter") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.bump();
            let kind = match self.bump() {
                Tok::Ident(s) => match s.as_str() {
                    "state" => FilterKind::State,
                    "min" => FilterKind::Min,
                    "max" => FilterKind::Max,
                    "avg" => FilterKind::Avg,
                    "sum" => FilterKind::Sum,
                    _ => {
                        self.pos -= 1;
                        return Err(self.error(format!("unknown filter kind `{s}`")));
                    }
                },
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("filter kind"));
                }
            };
            self.expect(Tok::Comma)?;
            let inner = self.state()?;
            self.expect(Tok::Comma)?;
            let condition = self.state()?;
            self.expect(Tok::RParen)?;
            return Ok(Property::Filter(FilterExpr {
                kind,
                inner,
                condition,
            }));
        }
        Ok(Property::Formula(self.state()?))
    }

    fn state(&mut self) -> Result<StateFormula, ParseError> {
        let left = self.disjunction()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let right = self.state()?;
            return Ok(StateFormula::implies(left, right));
        }
        Ok(left)
    }

    fn disjunction(&mut self) -> Result<StateFormula, ParseError> {
        let mut left = self.conjunction()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let right = self.conjunction()?;
            left = StateFormula::or(left, right);
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> Result<StateFormula, ParseError> {
        let mut left = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let right = self.unary()?;
            left = StateFormula::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<StateFormula, ParseError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(StateFormula::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<StateFormula, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.state()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Str(s) => {
                self.bump();
                Ok(StateFormula::label(s))
            }
            Tok::Ident(name) => match name.as_str() {
                "true" => {
                    self.bump();
                    Ok(StateFormula::True)
                }
                "false" => {
                    self.bump();
                    Ok(StateFormula::not(StateFormula::True))
                }
                "P" if self.starts_query() => {
                    self.bump();
                    let q = self.query()?;
                    self.expect(Tok::LBracket)?;
                    let path = self.path()?;
                    self.expect(Tok::RBracket)?;
                    Ok(StateFormula::Prob(q, Box::new(path)))
                }
                "S" if self.starts_query() => {
                    self.bump();
                    let q = self.query()?;
                    self.expect(Tok::LBracket)?;
                    let inner = self.state()?;
                    self.expect(Tok::RBracket)?;
                    Ok(StateFormula::Steady(q, Box::new(inner)))
                }
                "R" if *self.peek_at(1) == Tok::LBrace => self.reward(),
                "y" | "x" | "group" if *self.peek_at(1) == Tok::Eq => {
                    self.bump();
                    self.bump();
                    match name.as_str() {
                        "x" => match self.peek().clone() {
                            Tok::Number(n) => {
                                let i = n.parse::<usize>().map_err(|_| {
                                    self.error(format!("component index `{n}` is not an integer"))
                                })?;
                                self.bump();
                                Ok(StateFormula::Atom(Atom::Component(i)))
                            }
                            _ => Err(self.unexpected("component index")),
                        },
                        "y" => Ok(StateFormula::label(self.name("label")?)),
                        _ => Ok(StateFormula::Atom(Atom::Group(self.name("group name")?))),
                    }
                }
                _ if is_keyword(&name) => Err(self.unexpected("state formula")),
                _ => {
                    self.bump();
                    Ok(StateFormula::label(name))
                }
            },
            _ => Err(self.unexpected("state formula")),
        }
    }

    fn starts_query(&self) -> bool {
        matches!(
            self.peek_at(1),
            Tok::EqQuery | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
        )
    }

    fn name(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) | Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        let cmp = match self.bump() {
            Tok::EqQuery => return Ok(Query::Value),
            Tok::Lt => Comparison::Lt,
            Tok::Le => Comparison::Le,
            Tok::Gt => Comparison::Gt,
            Tok::Ge => Comparison::Ge,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("`=?` or a comparison"));
            }
        };
        match self.peek().clone() {
            Tok::Number(n) => {
                let p: f64 = n
                    .parse()
                    .map_err(|_| self.error(format!("invalid number `{n}`")))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(self.error(format!("bound {n} is outside [0, 1]")));
                }
                self.bump();
                Ok(Query::Bound(cmp, p))
            }
            _ => Err(self.unexpected("probability bound")),
        }
    }

    fn step_bound(&mut self) -> Result<Option<u64>, ParseError> {
        if *self.peek() != Tok::Le {
            return Ok(None);
        }
        self.bump();
        match self.peek().clone() {
            Tok::Number(n) => {
                let v = n
                    .parse::<u64>()
                    .map_err(|_| self.error(format!("step bound `{n}` is not an integer")))?;
                self.bump();
                Ok(Some(v))
            }
            _ => Err(self.unexpected("step bound")),
        }
    }

    fn path(&mut self) -> Result<PathFormula, ParseError> {
        if let Tok::Ident(s) = self.peek().clone() {
            match s.as_str() {
                "X" => {
                    self.bump();
                    return Ok(PathFormula::Next(self.state()?));
                }
                "F" => {
                    self.bump();
                    let b = self.step_bound()?;
                    return Ok(PathFormula::Eventually(self.state()?, b));
                }
                "G" => {
                    self.bump();
                    let b = self.step_bound()?;
                    return Ok(PathFormula::Globally(self.state()?, b));
                }
                _ => {}
            }
        }
        let left = self.state()?;
        if !self.is_ident("U") {
            return Err(self.unexpected("`U`"));
        }
        self.bump();
        let b = self.step_bound()?;
        let right = self.state()?;
        Ok(PathFormula::Until(left, right, b))
    }

    fn reward(&mut self) -> Result<StateFormula, ParseError> {
        self.bump();
        self.expect(Tok::LBrace)?;
        let reward = self.name("reward name")?;
        self.expect(Tok::RBrace)?;
        if *self.peek() != Tok::EqQuery {
            return Err(self.unexpected("`=?`"));
        }
        self.bump();
        self.expect(Tok::LBracket)?;
        let f = if self.is_ident("F") {
            self.bump();
            let target = self.state()?;
            StateFormula::RewardReach {
                reward,
                target: Box::new(target),
            }
        } else if self.is_ident("C") {
            self.bump();
            match self.step_bound()? {
                Some(bound) => StateFormula::RewardCumulative { reward, bound },
                None => return Err(self.unexpected("`<=`")),
            }
        } else {
            return Err(self.unexpected("`F` or `C`"));
        };
        self.expect(Tok::RBracket)?;
        Ok(f)
    }
}

/// Parses one property.
pub fn parse_property(text: &str) -> Result<Property, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let prop = p.property()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("end of property"));
    }
    Ok(prop)
}

/// Parses a state formula; filters are rejected.
pub fn parse_formula(text: &str) -> Result<StateFormula, ParseError> {
    match parse_property(text)? {
        Property::Formula(f) => Ok(f),
        Property::Filter(_) => Err(ParseError {
            line: 1,
            column: 1,
            message: "a filter is not allowed here".into(),
        }),
    }
}
