//! Syntax tree for Resin programs. `Display` renders the canonical source form,
//! which parses back to an equal tree.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Pos;

/// Source position attached to a syntax node.
///
/// Spans are metadata only: two spans always compare equal so that structural
/// equality of trees ignores where they were parsed from.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span(pub Pos);

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalType {
    Boolean,
    Number,
    Probability,
    Density,
}

impl SignalType {
    pub const ALL: [SignalType; 4] = [
        SignalType::Boolean,
        SignalType::Number,
        SignalType::Probability,
        SignalType::Density,
    ];
}

impl fmt::Display for SignalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalType::Boolean => "Boolean",
            SignalType::Number => "Number",
            SignalType::Probability => "Probability",
            SignalType::Density => "Density",
        })
    }
}

impl FromStr for SignalType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SignalType::ALL
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelOp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

impl RelOp {
    /// The operator with its operands swapped: `a op b` iff `b op.flip() a`.
    pub fn flip(self) -> RelOp {
        match self {
            RelOp::Gt => RelOp::Lt,
            RelOp::Lt => RelOp::Gt,
            RelOp::Ge => RelOp::Le,
            RelOp::Le => RelOp::Ge,
            RelOp::Eq => RelOp::Eq,
        }
    }

    /// Evaluates the comparison; equality holds within `tolerance`.
    pub fn holds(self, lhs: f64, rhs: f64, tolerance: f64) -> bool {
        match self {
            RelOp::Gt => lhs > rhs,
            RelOp::Lt => lhs < rhs,
            RelOp::Ge => lhs >= rhs,
            RelOp::Le => lhs <= rhs,
            RelOp::Eq => (lhs - rhs).abs() <= tolerance,
        }
    }
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelOp::Gt => ">",
            RelOp::Lt => "<",
            RelOp::Eq => "==",
            RelOp::Ge => ">=",
            RelOp::Le => "<=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub statements: Vec<Statement>,
}

impl Program {
    pub fn sources(&self) -> impl Iterator<Item = &SourceDecl> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Source(d) => Some(d),
            _ => None,
        })
    }

    pub fn targets(&self) -> impl Iterator<Item = &TargetDecl> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Target(d) => Some(d),
            _ => None,
        })
    }

    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Clause(c) => Some(c),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Source(SourceDecl),
    Target(TargetDecl),
    Clause(Clause),
    Comment(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceDecl {
    pub atom: Predicate,
    pub channel: String,
    pub dtype: SignalType,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetDecl {
    pub atom: Predicate,
    pub channel: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub head: Predicate,
    pub body: Vec<Literal>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Literal {
    pub negated: bool,
    pub atom: Atom,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Pred(Predicate),
    Cmp(Comparison),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<Term>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub lhs: Term,
    pub op: RelOp,
    pub rhs: Term,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var(String),
    Const(String),
    Number(f64),
    Pred(Predicate),
}

impl Term {
    pub fn variables<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => out.push(v),
            Term::Pred(p) => p.variables(out),
            Term::Const(_) | Term::Number(_) => {}
        }
    }
}

impl Predicate {
    pub fn variables<'a>(&'a self, out: &mut Vec<&'a str>) {
        for a in &self.args {
            a.variables(out);
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

pub(crate) fn fmt_number(n: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        write!(f, "{n:.1}")
    } else {
        write!(f, "{n}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Const(v) => f.write_str(v),
            Term::Number(n) => fmt_number(*n, f),
            Term::Pred(p) => p.fmt(f),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                a.fmt(f)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Pred(p) => p.fmt(f),
            Atom::Cmp(c) => write!(f, "{} {} {}", c.lhs, c.op, c.rhs),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        self.atom.fmt(f)
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Source(s) => {
                write!(f, "{} <- source(\"{}\", {}).", s.atom, s.channel, s.dtype)
            }
            Statement::Target(t) => write!(f, "{} -> target(\"{}\").", t.atom, t.channel),
            Statement::Clause(c) => {
                write!(f, "{} if ", c.head)?;
                for (i, l) in c.body.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" and ")?;
                    }
                    l.fmt(f)?;
                }
                f.write_str(".")
            }
            Statement::Comment(text) => write!(f, "# {text}"),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
