//! Name resolution and type rules.
//!
//! Every atom in a clause body must resolve to a declared source or to the head
//! of some clause. `Probability` and `Boolean` sources are plain literals;
//! `Number` and `Density` sources only occur inside comparisons, where they are
//! coerced into weights at run time.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::{Diagnostic, ErrorClass, Pos};

/// A variable-free atom such as `distance(drone_1, drone_2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub name: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(name: impl Into<String>, args: Vec<String>) -> Self {
        GroundAtom {
            name: name.into(),
            args,
        }
    }

    pub fn signature(&self) -> (&str, usize) {
        (&self.name, self.args.len())
    }

    /// Converts a predicate without variables or nested terms.
    pub fn from_predicate(p: &Predicate) -> Option<GroundAtom> {
        let args = p
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Number(n) => Some(Term::Number(*n).to_string()),
                Term::Var(_) | Term::Pred(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom::new(p.name.clone(), args))
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub atom: GroundAtom,
    pub channel: String,
    pub dtype: SignalType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetInfo {
    pub atom: GroundAtom,
    pub channel: String,
}

/// A program that passed the type checker, with its signal tables.
#[derive(Debug, Clone)]
pub struct TypedProgram {
    pub program: Program,
    pub sources: Vec<SourceInfo>,
    pub targets: Vec<TargetInfo>,
    /// Predicate signatures defined by clause heads.
    pub derived: BTreeSet<(String, usize)>,
}

impl TypedProgram {
    pub fn source_index(&self, atom: &GroundAtom) -> Option<usize> {
        self.sources.iter().position(|s| &s.atom == atom)
    }

    pub fn sources_with_signature<'a>(
        &'a self,
        name: &'a str,
        arity: usize,
    ) -> impl Iterator<Item = (usize, &'a SourceInfo)> + 'a {
        self.sources
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.atom.signature() == (name, arity))
    }
}

struct Checker<'p> {
    errors: Vec<Diagnostic>,
    source_types: HashMap<(String, usize), Vec<SignalType>>,
    derived: &'p BTreeSet<(String, usize)>,
}

impl Checker<'_> {
    fn error(&mut self, class: ErrorClass, pos: Pos, message: String) {
        self.errors
            .push(Diagnostic::with_class(class, pos, message));
    }

    fn types_of(&self, p: &Predicate) -> Option<&Vec<SignalType>> {
        self.source_types.get(&(p.name.clone(), p.arity()))
    }

    fn is_derived(&self, p: &Predicate) -> bool {
        self.derived.contains(&(p.name.clone(), p.arity()))
    }

    fn no_function_terms(&mut self, p: &Predicate) -> bool {
        if let Some(Term::Pred(inner)) = p.args.iter().find(|t| matches!(t, Term::Pred(_))) {
            self.error(
                ErrorClass::FunctionTerm,
                inner.span.0,
                format!("function terms unsupported: `{inner}` inside `{p}`"),
            );
            return false;
        }
        true
    }

    /// Resolves one side of a comparison to the types of the sources it names.
    fn operand(&mut self, t: &Term, pos: Pos) -> Operand {
        match t {
            Term::Number(_) => Operand::Literal,
            Term::Var(v) => {
                self.error(
                    ErrorClass::InvalidComparison,
                    pos,
                    format!("variable `{v}` cannot be compared directly; compare a source instead"),
                );
                Operand::Invalid
            }
            Term::Const(name) => {
                let p = Predicate {
                    name: name.clone(),
                    args: vec![],
                    span: Span(pos),
                };
                self.source_operand(&p, pos)
            }
            Term::Pred(p) => {
                if !self.no_function_terms(p) {
                    return Operand::Invalid;
                }
                self.source_operand(p, pos)
            }
        }
    }

    fn source_operand(&mut self, p: &Predicate, pos: Pos) -> Operand {
        match self.types_of(p).cloned() {
            Some(types) => Operand::Source(types),
            None => {
                self.error(
                    ErrorClass::UnknownAtom,
                    pos,
                    format!("`{p}` in comparison is not a declared source"),
                );
                Operand::Invalid
            }
        }
    }

    fn comparison(&mut self, c: &Comparison) {
        let pos = c.span.0;
        let lhs = self.operand(&c.lhs, pos);
        let rhs = self.operand(&c.rhs, pos);
        if matches!(lhs, Operand::Invalid) || matches!(rhs, Operand::Invalid) {
            return;
        }
        for side in [&lhs, &rhs] {
            if let Operand::Source(types) = side {
                if let Some(bad) = types
                    .iter()
                    .find(|t| matches!(t, SignalType::Probability | SignalType::Boolean))
                {
                    self.error(
                        ErrorClass::ComparisonType,
                        pos,
                        format!("cannot compare a {bad} source; only Number and Density sources take part in comparisons"),
                    );
                    return;
                }
            }
        }
        let has_density = |o: &Operand| match o {
            Operand::Source(ts) => ts.contains(&SignalType::Density),
            _ => false,
        };
        match (&lhs, &rhs) {
            (Operand::Literal, Operand::Literal) => self.error(
                ErrorClass::InvalidComparison,
                pos,
                format!(
                    "comparison `{} {} {}` does not involve any source",
                    c.lhs, c.op, c.rhs
                ),
            ),
            (Operand::Source(_), Operand::Source(_)) if has_density(&lhs) && has_density(&rhs) => {
                self.error(
                    ErrorClass::InvalidComparison,
                    pos,
                    "comparisons between two Density sources are not supported".to_string(),
                )
            }
            _ => {}
        }
    }
}

enum Operand {
    Literal,
    Source(Vec<SignalType>),
    Invalid,
}

/// Resolves names and enforces the typing and safety rules.
pub fn typecheck(program: Program) -> Result<TypedProgram, Vec<Diagnostic>> {
    let mut errors = Vec::new();
    let mut sources: Vec<SourceInfo> = Vec::new();
    let mut targets: Vec<TargetInfo> = Vec::new();
    let mut channels: HashSet<String> = HashSet::new();

    for decl in program.sources() {
        let pos = decl.span.0;
        let Some(atom) = GroundAtom::from_predicate(&decl.atom) else {
            errors.push(Diagnostic::with_class(
                ErrorClass::NonGroundSignal,
                pos,
                format!("source atom `{}` must be ground", decl.atom),
            ));
            continue;
        };
        if sources.iter().any(|s| s.atom == atom) {
            errors.push(Diagnostic::with_class(
                ErrorClass::RedeclaredSource,
                pos,
                format!("source `{atom}` is declared more than once"),
            ));
            continue;
        }
        if !channels.insert(decl.channel.clone()) {
            errors.push(Diagnostic::with_class(
                ErrorClass::DuplicateChannel,
                pos,
                format!("channel \"{}\" is already in use", decl.channel),
            ));
            continue;
        }
        sources.push(SourceInfo {
            atom,
            channel: decl.channel.clone(),
            dtype: decl.dtype,
        });
    }

    let mut source_types: HashMap<(String, usize), Vec<SignalType>> = HashMap::new();
    for s in &sources {
        source_types
            .entry((s.atom.name.clone(), s.atom.args.len()))
            .or_default()
            .push(s.dtype);
    }

    let derived: BTreeSet<(String, usize)> = program
        .clauses()
        .map(|c| (c.head.name.clone(), c.head.arity()))
        .collect();

    let mut ck = Checker {
        errors,
        source_types,
        derived: &derived,
    };

    for clause in program.clauses() {
        let pos = clause.span.0;
        let head = &clause.head;
        if ck.types_of(head).is_some() {
            ck.error(
                ErrorClass::RedeclaredSource,
                pos,
                format!(
                    "source predicate `{}/{}` cannot be the head of a clause",
                    head.name,
                    head.arity()
                ),
            );
        }
        ck.no_function_terms(head);

        let mut bound: HashSet<&str> = HashSet::new();
        let mut used: Vec<(&str, &'static str)> = Vec::new();
        let mut head_vars = Vec::new();
        head.variables(&mut head_vars);
        used.extend(head_vars.into_iter().map(|v| (v, "the head")));

        for lit in &clause.body {
            match &lit.atom {
                Atom::Pred(p) => {
                    ck.no_function_terms(p);
                    let mut vars = Vec::new();
                    p.variables(&mut vars);
                    if lit.negated {
                        used.extend(vars.into_iter().map(|v| (v, "a negated literal")));
                    } else {
                        bound.extend(vars);
                    }
                    if let Some(types) = ck.types_of(p).cloned() {
                        if let Some(t) = types
                            .iter()
                            .find(|t| matches!(t, SignalType::Number | SignalType::Density))
                        {
                            ck.error(
                                ErrorClass::MissingComparison,
                                p.span.0,
                                format!("{t} source `{p}` can only be used inside a comparison"),
                            );
                        }
                    } else if !ck.is_derived(p) {
                        ck.error(
                            ErrorClass::UnknownAtom,
                            p.span.0,
                            format!("unknown atom `{p}`: neither a declared source nor defined by a clause"),
                        );
                    }
                }
                Atom::Cmp(c) => {
                    ck.comparison(c);
                    for side in [&c.lhs, &c.rhs] {
                        match side {
                            // Source terms are enumerated over declared sources, which binds them.
                            Term::Pred(p) if !lit.negated => {
                                let mut vars = Vec::new();
                                p.variables(&mut vars);
                                bound.extend(vars);
                            }
                            other => {
                                let mut vars = Vec::new();
                                other.variables(&mut vars);
                                used.extend(vars.into_iter().map(|v| (v, "a comparison")));
                            }
                        }
                    }
                }
            }
        }

        let mut reported = HashSet::new();
        for (v, place) in used {
            if !bound.contains(v) && reported.insert(v) {
                ck.error(
                    ErrorClass::UnsafeVariable,
                    pos,
                    format!(
                        "unsafe variable `{v}` in {place}: it must occur in a positive body atom"
                    ),
                );
            }
        }
    }

    for decl in program.targets() {
        let pos = decl.span.0;
        let Some(atom) = GroundAtom::from_predicate(&decl.atom) else {
            ck.error(
                ErrorClass::NonGroundSignal,
                pos,
                format!("target atom `{}` must be ground", decl.atom),
            );
            continue;
        };
        let resolvable = derived.contains(&(atom.name.clone(), atom.args.len()))
            || sources.iter().any(|s| s.atom == atom);
        if !resolvable {
            ck.error(
                ErrorClass::UnknownAtom,
                pos,
                format!("target `{atom}` is neither a source nor defined by a clause"),
            );
            continue;
        }
        if targets.iter().any(|t| t.channel == decl.channel) || channels.contains(&decl.channel) {
            ck.error(
                ErrorClass::DuplicateChannel,
                pos,
                format!("channel \"{}\" is already in use", decl.channel),
            );
            continue;
        }
        targets.push(TargetInfo {
            atom,
            channel: decl.channel.clone(),
        });
    }

    if ck.errors.is_empty() {
        Ok(TypedProgram {
            program,
            sources,
            targets,
            derived,
        })
    } else {
        let mut errors = ck.errors;
        errors.sort_by_key(|d| d.pos);
        Err(errors)
    }
}
