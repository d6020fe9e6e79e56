use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparison::Lt => value < bound,
            Comparison::Le => value <= bound,
            Comparison::Gt => value > bound,
            Comparison::Ge => value >= bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }
}

/// `=?` asks for the value; a bound turns the operator into a predicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Query {
    Value,
    Bound(Comparison, f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    /// `y=<label>`: the observed state.
    Label(String),
    /// `x=<i>`: the latent component (product chains only).
    Component(usize),
    /// `group=<name>`: a user-defined state group.
    Group(String),
}

impl Atom {
    /// Name of the atom set this atom resolves to.
    pub fn key(&self) -> String {
        match self {
            Atom::Label(l) => format!("y={l}"),
            Atom::Component(i) => format!("x={i}"),
            Atom::Group(g) => format!("group={g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    True,
    Atom(Atom),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Prob(Query, Box<PathFormula>),
    Steady(Query, Box<StateFormula>),
    /// `R{reward}=?[ F target ]`
    RewardReach {
        reward: String,
        target: Box<StateFormula>,
    },
    /// `R{reward}=?[ C<=bound ]`
    RewardCumulative { reward: String, bound: u64 },
}

impl StateFormula {
    pub fn atom(a: Atom) -> Self {
        StateFormula::Atom(a)
    }

    pub fn label(l: impl Into<String>) -> Self {
        StateFormula::Atom(Atom::Label(l.into()))
    }

    pub fn not(f: StateFormula) -> Self {
        StateFormula::Not(Box::new(f))
    }

    pub fn and(a: StateFormula, b: StateFormula) -> Self {
        StateFormula::And(Box::new(a), Box::new(b))
    }

    /// `a | b` as `!(!a & !b)`.
    pub fn or(a: StateFormula, b: StateFormula) -> Self {
        Self::not(Self::and(Self::not(a), Self::not(b)))
    }

    /// `a => b` as `!(a & !b)`.
    pub fn implies(a: StateFormula, b: StateFormula) -> Self {
        Self::not(Self::and(a, Self::not(b)))
    }

    /// True for formulas that denote a number rather than a truth value.
    pub fn is_quantitative(&self) -> bool {
        matches!(
            self,
            StateFormula::Prob(Query::Value, _)
                | StateFormula::Steady(Query::Value, _)
                | StateFormula::RewardReach { .. }
                | StateFormula::RewardCumulative { .. }
        )
    }

    /// Every atom mentioned, in syntax order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            StateFormula::True | StateFormula::RewardCumulative { .. } => {}
            StateFormula::Atom(a) => out.push(a),
            StateFormula::Not(f) | StateFormula::Steady(_, f) => f.collect_atoms(out),
            StateFormula::RewardReach { target, .. } => target.collect_atoms(out),
            StateFormula::And(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            StateFormula::Prob(_, path) => match path.as_ref() {
                PathFormula::Next(f)
                | PathFormula::Eventually(f, _)
                | PathFormula::Globally(f, _) => f.collect_atoms(out),
                PathFormula::Until(a, b, _) => {
                    a.collect_atoms(out);
                    b.collect_atoms(out);
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Next(StateFormula),
    /// `left U<=bound right`; `None` is unbounded.
    Until(StateFormula, StateFormula, Option<u64>),
    /// `F<=bound f`, i.e. `true U<=bound f`.
    Eventually(StateFormula, Option<u64>),
    /// `G<=bound f`, i.e. `!F<=bound !f`.
    Globally(StateFormula, Option<u64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    State,
    Min,
    Max,
    Avg,
    Sum,
}

impl FilterKind {
    fn name(self) -> &'static str {
        match self {
            FilterKind::State => "state",
            FilterKind::Min => "min",
            FilterKind::Max => "max",
            FilterKind::Avg => "avg",
            FilterKind::Sum => "sum",
        }
    }
}

/// `filter(kind, inner, condition)`: `inner` evaluated over the states
/// satisfying `condition`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterExpr {
    pub kind: FilterKind,
    pub inner: StateFormula,
    pub condition: StateFormula,
}

/// A top-level property: a state formula or a filter.
#[derive(Debug, Clone, PartialEq)]
pub enum Property {
    Formula(StateFormula),
    Filter(FilterExpr),
}

impl Property {
    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            Property::Formula(f) => f.atoms(),
            Property::Filter(fe) => {
                let mut a = fe.inner.atoms();
                a.extend(fe.condition.atoms());
                a
            }
        }
    }
}

pub(crate) fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '.' || c == '-')
        && !super::parser::is_keyword(s)
}

/// Writes `s` bare when it lexes as one identifier, quoted otherwise.
pub(crate) fn write_name(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if is_plain_ident(s) {
        f.write_str(s)
    } else {
        write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Value => f.write_str("=?"),
            Query::Bound(c, p) => write!(f, "{}{}", c.symbol(), p),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Label(l) => {
                f.write_str("y=")?;
                write_name(f, l)
            }
            Atom::Component(i) => write!(f, "x={i}"),
            Atom::Group(g) => {
                f.write_str("group=")?;
                write_name(f, g)
            }
        }
    }
}

fn write_bound(f: &mut fmt::Formatter<'_>, bound: Option<u64>) -> fmt::Result {
    match bound {
        Some(n) => write!(f, "<={n}"),
        None => Ok(()),
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => f.write_str("true"),
            StateFormula::Atom(a) => write!(f, "{a}"),
            StateFormula::Not(inner) => write!(f, "!{inner}"),
            StateFormula::And(a, b) => write!(f, "({a} & {b})"),
            StateFormula::Prob(q, path) => write!(f, "P{q}[ {path} ]"),
            StateFormula::Steady(q, inner) => write!(f, "S{q}[ {inner} ]"),
            StateFormula::RewardReach { reward, target } => {
                f.write_str("R{")?;
                write_name(f, reward)?;
                write!(f, "}}=?[ F {target} ]")
            }
            StateFormula::RewardCumulative { reward, bound } => {
                f.write_str("R{")?;
                write_name(f, reward)?;
                write!(f, "}}=?[ C<={bound} ]")
            }
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(inner) => write!(f, "X {inner}"),
            PathFormula::Until(a, b, bound) => {
                write!(f, "{a} U")?;
                write_bound(f, *bound)?;
                write!(f, " {b}")
            }
            PathFormula::Eventually(inner, bound) => {
                f.write_str("F")?;
                write_bound(f, *bound)?;
                write!(f, " {inner}")
            }
            PathFormula::Globally(inner, bound) => {
                f.write_str("G")?;
                write_bound(f, *bound)?;
                write!(f, " {inner}")
            }
        }
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "filter({}, {}, {})",
            self.kind.name(),
            self.inner,
            self.condition
        )
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Formula(x) => write!(f, "{x}"),
            Property::Filter(x) => write!(f, "{x}"),
        }
    }
}
