//! Grounding, stable-model enumeration and weighted model counting.
//!
//! Sources become choice atoms; each distinct ground comparison becomes a
//! virtual choice atom whose weight is computed from the compared signals at
//! run time. Derived atoms are computed by a stratified least fixpoint.

mod artifact;
mod models;
mod polynomial;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::ast::{Atom, Clause, Predicate, RelOp, Term};
use crate::lang::{Diagnostic, ErrorClass, GroundAtom, SourceInfo, TargetInfo, TypedProgram};

pub use artifact::{compile, compile_target, CompiledSource, CompiledTarget};
pub use models::{derive_atoms, enumerate_stable_models, verify_stable, StableModel};
pub use polynomial::{build_wmc_polynomial, Literal, WmcPolynomial};

/// Default bound on the number of choice atoms per target.
pub const DEFAULT_MAX_SOURCES: usize = 24;

const MAX_SUBSTITUTIONS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundError {
    #[error("program is not stratified: negation cycle through {}", .0.join(" -> "))]
    NonStratified(Vec<String>),
    #[error("model space too large: {n} sources exceed the limit of {limit}")]
    TooManySources { n: usize, limit: usize },
    #[error("grounding clause `{clause}` needs {count} substitutions")]
    GroundingTooLarge { clause: String, count: usize },
}

impl GroundError {
    pub fn to_diagnostic(&self) -> Diagnostic {
        let class = match self {
            GroundError::NonStratified(_) => ErrorClass::NonStratified,
            _ => ErrorClass::InvalidComparison,
        };
        Diagnostic::with_class(class, Default::default(), self.to_string())
    }
}

/// An operand of a ground comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    /// Index into the raw source table.
    Source(usize),
    Const(f64),
}

/// A ground comparison; the left operand is always a source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSite {
    pub lhs: usize,
    pub op: RelOp,
    pub rhs: Operand,
}

/// What a choice atom stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceKind {
    /// A `Probability` or `Boolean` source used directly.
    Source(usize),
    /// A comparison over `Number`/`Density` sources.
    Comparison(ComparisonSite),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceAtom {
    pub name: String,
    pub kind: ChoiceKind,
}

impl ChoiceAtom {
    /// Raw source indices this atom's weight depends on.
    pub fn inputs(&self) -> Vec<usize> {
        match &self.kind {
            ChoiceKind::Source(s) => vec![*s],
            ChoiceKind::Comparison(c) => match c.rhs {
                Operand::Source(r) if r != c.lhs => vec![c.lhs, r],
                _ => vec![c.lhs],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomRef {
    Choice(usize),
    Derived(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundRule {
    pub head: usize,
    pub pos: Vec<AtomRef>,
    pub neg: Vec<AtomRef>,
}

/// The ground program of one target, restricted to the atoms it depends on.
#[derive(Debug, Clone)]
pub struct GroundProgram {
    /// Raw source table (all declared sources, indexed by `Operand::Source`).
    pub sources: Vec<SourceInfo>,
    pub choices: Vec<ChoiceAtom>,
    pub derived: Vec<GroundAtom>,
    pub rules: Vec<GroundRule>,
    /// Stratum of each derived atom.
    pub strata: Vec<usize>,
    pub target: AtomRef,
    pub target_info: TargetInfo,
}

impl GroundProgram {
    pub fn num_choices(&self) -> usize {
        self.choices.len()
    }

    pub fn choice_names(&self) -> Vec<String> {
        self.choices.iter().map(|c| c.name.clone()).collect()
    }
}

impl fmt::Display for GroundProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |a: &AtomRef| match a {
            AtomRef::Choice(i) => self.choices[*i].name.clone(),
            AtomRef::Derived(i) => self.derived[*i].to_string(),
        };
        if !self.choices.is_empty() {
            writeln!(
                f,
                "0{{{}}}{}.",
                self.choices
                    .iter()
                    .map(|c| c.name.as_str())
                    .collect::<Vec<_>>()
                    .join("; "),
                self.choices.len()
            )?;
        }
        for r in &self.rules {
            let body: Vec<String> = r
                .pos
                .iter()
                .map(&name)
                .chain(r.neg.iter().map(|a| format!("not {}", name(a))))
                .collect();
            writeln!(f, "{} :- {}.", self.derived[r.head], body.join(", "))?;
        }
        writeln!(f, ":- not {}.", name(&self.target))
    }
}

#[derive(Default)]
struct Tables {
    choices: Vec<ChoiceAtom>,
    choice_ids: HashMap<String, usize>,
    derived: Vec<GroundAtom>,
    derived_ids: HashMap<GroundAtom, usize>,
}

impl Tables {
    fn choice(&mut self, atom: ChoiceAtom) -> usize {
        if let Some(&i) = self.choice_ids.get(&atom.name) {
            return i;
        }
        let i = self.choices.len();
        self.choice_ids.insert(atom.name.clone(), i);
        self.choices.push(atom);
        i
    }

    fn derived(&mut self, atom: GroundAtom) -> usize {
        if let Some(&i) = self.derived_ids.get(&atom) {
            return i;
        }
        let i = self.derived.len();
        self.derived_ids.insert(atom.clone(), i);
        self.derived.push(atom);
        i
    }
}

fn collect_constants(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Const(c) => {
            out.insert(c.clone());
        }
        Term::Pred(p) => p.args.iter().for_each(|a| collect_constants(a, out)),
        Term::Var(_) | Term::Number(_) => {}
    }
}

fn herbrand_universe(tp: &TypedProgram) -> Vec<String> {
    let mut u = BTreeSet::new();
    for s in &tp.sources {
        u.extend(s.atom.args.iter().cloned());
    }
    for t in &tp.targets {
        u.extend(t.atom.args.iter().cloned());
    }
    for c in tp.program.clauses() {
        c.head
            .args
            .iter()
            .for_each(|a| collect_constants(a, &mut u));
        for lit in &c.body {
            match &lit.atom {
                Atom::Pred(p) => p.args.iter().for_each(|a| collect_constants(a, &mut u)),
                Atom::Cmp(cmp) => {
                    // A bare identifier operand names a source, not a constant.
                    for side in [&cmp.lhs, &cmp.rhs] {
                        if let Term::Pred(p) = side {
                            p.args.iter().for_each(|a| collect_constants(a, &mut u));
                        }
                    }
                }
            }
        }
    }
    u.into_iter().collect()
}

fn substitute(p: &Predicate, subst: &HashMap<&str, &str>) -> GroundAtom {
    let args = p
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => subst[v.as_str()].to_string(),
            Term::Const(c) => c.clone(),
            other => other.to_string(),
        })
        .collect();
    GroundAtom::new(p.name.clone(), args)
}

fn clause_vars(c: &Clause) -> Vec<&str> {
    let mut vars = Vec::new();
    c.head.variables(&mut vars);
    for lit in &c.body {
        match &lit.atom {
            Atom::Pred(p) => p.variables(&mut vars),
            Atom::Cmp(cmp) => {
                cmp.lhs.variables(&mut vars);
                cmp.rhs.variables(&mut vars);
            }
        }
    }
    let mut seen = HashSet::new();
    vars.retain(|v| seen.insert(*v));
    vars
}

enum GroundOperand {
    Source(usize),
    Const(f64),
}

fn ground_operand(
    tp: &TypedProgram,
    t: &Term,
    subst: &HashMap<&str, &str>,
) -> Option<GroundOperand> {
    match t {
        Term::Number(n) => Some(GroundOperand::Const(*n)),
        Term::Const(name) => tp
            .source_index(&GroundAtom::new(name.clone(), vec![]))
            .map(GroundOperand::Source),
        Term::Pred(p) => tp
            .source_index(&substitute(p, subst))
            .map(GroundOperand::Source),
        Term::Var(_) => None,
    }
}

fn comparison_name(tp: &TypedProgram, site: &ComparisonSite) -> String {
    let rhs = match site.rhs {
        Operand::Source(s) => tp.sources[s].atom.to_string(),
        Operand::Const(c) => Term::Number(c).to_string(),
    };
    format!("{} {} {}", tp.sources[site.lhs].atom, site.op, rhs)
}

/// Grounds every clause over the Herbrand universe. Returns the shared tables
/// and the list of ground rules (deduplicated).
fn ground_rules(tp: &TypedProgram) -> Result<(Tables, Vec<GroundRule>), GroundError> {
    let universe = herbrand_universe(tp);
    let mut tables = Tables::default();
    let mut rules = Vec::new();
    let mut seen = HashSet::new();

    for clause in tp.program.clauses() {
        let vars = clause_vars(clause);
        let count = universe
            .len()
            .checked_pow(vars.len() as u32)
            .filter(|&c| c <= MAX_SUBSTITUTIONS)
            .ok_or_else(|| GroundError::GroundingTooLarge {
                clause: format!("{}", crate::lang::ast::Statement::Clause(clause.clone())),
                count: universe.len().saturating_pow(vars.len() as u32),
            })?;
        if vars.is_empty() || !universe.is_empty() {
            for n in 0..count.max(1) {
                let mut subst = HashMap::new();
                let mut k = n;
                for v in &vars {
                    subst.insert(*v, universe[k % universe.len()].as_str());
                    k /= universe.len();
                }
                if let Some(rule) = ground_clause(tp, clause, &subst, &mut tables) {
                    if seen.insert(rule.clone()) {
                        rules.push(rule);
                    }
                }
            }
        }
    }
    Ok((tables, rules))
}

fn ground_clause(
    tp: &TypedProgram,
    clause: &Clause,
    subst: &HashMap<&str, &str>,
    tables: &mut Tables,
) -> Option<GroundRule> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for lit in &clause.body {
        let atom = match &lit.atom {
            Atom::Pred(p) => {
                let g = substitute(p, subst);
                if tp.derived.contains(&(g.name.clone(), g.args.len())) {
                    Some(AtomRef::Derived(tables.derived(g)))
                } else {
                    tp.source_index(&g).map(|s| {
                        AtomRef::Choice(tables.choice(ChoiceAtom {
                            name: g.to_string(),
                            kind: ChoiceKind::Source(s),
                        }))
                    })
                }
            }
            Atom::Cmp(cmp) => {
                let lhs = ground_operand(tp, &cmp.lhs, subst)?;
                let rhs = ground_operand(tp, &cmp.rhs, subst)?;
                let site = match (lhs, rhs) {
                    (GroundOperand::Source(l), GroundOperand::Source(r)) => {
                        // Keep a Density on the left; the right side is then a Number.
                        if tp.sources[r].dtype == crate::lang::SignalType::Density {
                            ComparisonSite {
                                lhs: r,
                                op: cmp.op.flip(),
                                rhs: Operand::Source(l),
                            }
                        } else {
                            ComparisonSite {
                                lhs: l,
                                op: cmp.op,
                                rhs: Operand::Source(r),
                            }
                        }
                    }
                    (GroundOperand::Source(l), GroundOperand::Const(c)) => ComparisonSite {
                        lhs: l,
                        op: cmp.op,
                        rhs: Operand::Const(c),
                    },
                    (GroundOperand::Const(c), GroundOperand::Source(r)) => ComparisonSite {
                        lhs: r,
                        op: cmp.op.flip(),
                        rhs: Operand::Const(c),
                    },
                    (GroundOperand::Const(_), GroundOperand::Const(_)) => return None,
                };
                Some(AtomRef::Choice(tables.choice(ChoiceAtom {
                    name: comparison_name(tp, &site),
                    kind: ChoiceKind::Comparison(site),
                })))
            }
        };
        match (atom, lit.negated) {
            (Some(a), false) => pos.push(a),
            (Some(a), true) => neg.push(a),
            // An undeclared source instance is false: the rule cannot fire.
            (None, false) => return None,
            (None, true) => {}
        }
    }
    let head = tables.derived(substitute(&clause.head, subst));
    pos.sort();
    pos.dedup();
    neg.sort();
    neg.dedup();
    Some(GroundRule { head, pos, neg })
}

/// Assigns strata to derived atoms; fails on a cycle through negation.
fn stratify(derived: &[GroundAtom], rules: &[GroundRule]) -> Result<Vec<usize>, GroundError> {
    let mut graph = DiGraph::<usize, bool>::new();
    let nodes: Vec<_> = (0..derived.len()).map(|i| graph.add_node(i)).collect();
    for r in rules {
        for (body, negative) in r
            .pos
            .iter()
            .map(|a| (a, false))
            .chain(r.neg.iter().map(|a| (a, true)))
        {
            if let AtomRef::Derived(b) = body {
                graph.add_edge(nodes[*b], nodes[r.head], negative);
            }
        }
    }
    for scc in tarjan_scc(&graph) {
        let members: HashSet<_> = scc.iter().copied().collect();
        for &n in &scc {
            for e in graph.edges(n) {
                use petgraph::visit::EdgeRef;
                if *e.weight() && members.contains(&e.target()) {
                    let mut names: Vec<String> =
                        scc.iter().map(|m| derived[graph[*m]].to_string()).collect();
                    names.sort();
                    names.push(names[0].clone());
                    return Err(GroundError::NonStratified(names));
                }
            }
        }
    }

    let mut strata = vec![0usize; derived.len()];
    loop {
        let mut changed = false;
        for r in rules {
            for (body, step) in r
                .pos
                .iter()
                .map(|a| (a, 0))
                .chain(r.neg.iter().map(|a| (a, 1)))
            {
                if let AtomRef::Derived(b) = body {
                    let need = strata[*b] + step;
                    if strata[r.head] < need {
                        strata[r.head] = need;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return Ok(strata);
        }
    }
}

/// Grounds a type-checked program into one ground program per target.
pub fn ground(tp: &TypedProgram) -> Result<Vec<GroundProgram>, GroundError> {
    let (mut tables, rules) = ground_rules(tp)?;
    stratify(&tables.derived, &rules)?;

    let mut out = Vec::new();
    for target in &tp.targets {
        let target_ref = match tp.source_index(&target.atom) {
            Some(s)
                if !tp
                    .derived
                    .contains(&(target.atom.name.clone(), target.atom.args.len())) =>
            {
                AtomRef::Choice(tables.choice(ChoiceAtom {
                    name: target.atom.to_string(),
                    kind: ChoiceKind::Source(s),
                }))
            }
            _ => AtomRef::Derived(tables.derived(target.atom.clone())),
        };
        out.push(restrict(tp, &tables, &rules, target_ref, target.clone())?);
    }
    Ok(out)
}

/// Keeps only rules reachable backwards from the target and renumbers atoms.
fn restrict(
    tp: &TypedProgram,
    tables: &Tables,
    rules: &[GroundRule],
    target: AtomRef,
    target_info: TargetInfo,
) -> Result<GroundProgram, GroundError> {
    let mut relevant = HashSet::new();
    let mut stack = vec![target];
    while let Some(a) = stack.pop() {
        if !relevant.insert(a) {
            continue;
        }
        if let AtomRef::Derived(d) = a {
            for r in rules.iter().filter(|r| r.head == d) {
                stack.extend(r.pos.iter().chain(r.neg.iter()).copied());
            }
        }
    }

    let mut choice_map = HashMap::new();
    let mut derived_map = HashMap::new();
    let mut choices = Vec::new();
    let mut derived = Vec::new();
    for (i, c) in tables.choices.iter().enumerate() {
        if relevant.contains(&AtomRef::Choice(i)) {
            choice_map.insert(i, choices.len());
            choices.push(c.clone());
        }
    }
    for (i, d) in tables.derived.iter().enumerate() {
        if relevant.contains(&AtomRef::Derived(i)) {
            derived_map.insert(i, derived.len());
            derived.push(d.clone());
        }
    }
    let remap = |a: &AtomRef| match a {
        AtomRef::Choice(i) => AtomRef::Choice(choice_map[i]),
        AtomRef::Derived(i) => AtomRef::Derived(derived_map[i]),
    };
    let new_rules: Vec<GroundRule> = rules
        .iter()
        .filter(|r| relevant.contains(&AtomRef::Derived(r.head)))
        .map(|r| GroundRule {
            head: derived_map[&r.head],
            pos: r.pos.iter().map(remap).collect(),
            neg: r.neg.iter().map(remap).collect(),
        })
        .collect();
    let strata = stratify(&derived, &new_rules)?;
    Ok(GroundProgram {
        sources: tp.sources.clone(),
        choices,
        derived,
        rules: new_rules,
        strata,
        target: remap(&target),
        target_info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::check;

    pub(crate) const D_PROGRAM: &str = r#"a <- source("/a", Probability).
b <- source("/b", Probability).
c <- source("/c", Probability).
d if a and b and not c.
d if not a and b and c.
d -> target("/d")."#;

    #[test]
    fn d_program_grounds() {
        let tp = check(D_PROGRAM).unwrap();
        let gps = ground(&tp).unwrap();
        assert_eq!(gps.len(), 1);
        let gp = &gps[0];
        assert_eq!(gp.choice_names(), vec!["a", "b", "c"]);
        assert_eq!(gp.rules.len(), 2);
        assert_eq!(gp.derived[0].to_string(), "d");
        let text = gp.to_string();
        assert!(text.contains("0{a; b; c}3."));
        assert!(text.contains("d :- a, b, not c."));
        assert!(text.contains(":- not d."));
    }

    #[test]
    fn drone_rules_ground_pairwise() {
        let tp = check(
            r#"distance(drone_1, drone_2) <- source("/drone1_drone2", Density).
               distance(drone_1, drone_3) <- source("/drone1_drone3", Density).
               unsafe if distance(X, Y) < 25.
               unsafe -> target("/safety")."#,
        )
        .unwrap();
        let gp = &ground(&tp).unwrap()[0];
        assert_eq!(gp.rules.len(), 2);
        assert_eq!(
            gp.choice_names(),
            vec![
                "distance(drone_1, drone_2) < 25.0",
                "distance(drone_1, drone_3) < 25.0"
            ]
        );
    }

    #[test]
    fn negation_cycle_rejected() {
        let tp = check(
            r#"a <- source("/a", Probability).
               p if not q and a.
               q if not p and a.
               p -> target("/p")."#,
        )
        .unwrap();
        match ground(&tp) {
            Err(GroundError::NonStratified(cycle)) => {
                assert!(cycle.contains(&"p".to_string()) && cycle.contains(&"q".to_string()))
            }
            other => panic!("expected stratification error, got {other:?}"),
        }
    }

    #[test]
    fn strata_follow_negation() {
        let tp = check(
            r#"a <- source("/a", Probability).
               b <- source("/b", Probability).
               p if a.
               q if b and not p.
               r if q and not p.
               r -> target("/r")."#,
        )
        .unwrap();
        let gp = &ground(&tp).unwrap()[0];
        let s = |n: &str| gp.strata[gp.derived.iter().position(|d| d.name == n).unwrap()];
        assert_eq!(s("p"), 0);
        assert_eq!(s("q"), 1);
        assert_eq!(s("r"), 1);
    }

    #[test]
    fn irrelevant_sources_are_excluded() {
        let tp = check(
            r#"a <- source("/a", Probability).
               b <- source("/b", Probability).
               p if a.
               q if b.
               p -> target("/p").
               q -> target("/q")."#,
        )
        .unwrap();
        let gps = ground(&tp).unwrap();
        assert_eq!(gps[0].choice_names(), vec!["a"]);
        assert_eq!(gps[1].choice_names(), vec!["b"]);
    }

    #[test]
    fn flipped_comparison_normalizes() {
        let tp = check(
            r#"x <- source("/x", Number).
               p if 3 < x.
               p -> target("/p")."#,
        )
        .unwrap();
        let gp = &ground(&tp).unwrap()[0];
        assert_eq!(gp.choice_names(), vec!["x > 3.0"]);
    }
}
