//! Reactive circuits: memoized sub-formulas of a weighted model count arranged
//! in a DAG, re-evaluated selectively when signal weights change.
//!
//! Every formula is a sum of products. A product is a set of signal literals
//! times at most one memory reference to a child formula. Formula ids are
//! always topological indices (root = 0, ancestors before descendants); the
//! arena is renumbered after every structural change.

mod adapt;
mod dump;

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::grounder::{Literal, WmcPolynomial};
use crate::semiring::{Semiring, SemiringError, SemiringInstance};

pub use dump::dump;

pub type FormulaId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("unknown signal index {0}")]
    UnknownSignal(usize),
    #[error("signal `{0}` has not been evaluated")]
    UnevaluatedSignal(String),
    #[error(transparent)]
    Semiring(#[from] SemiringError),
    #[error("negative rate {rate} for signal `{signal}`")]
    NegativeRate { signal: String, rate: f64 },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// A product gate: `lits[0] ⊗ ... ⊗ lits[k-1] ⊗ m_mem`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Product {
    /// Sorted and duplicate-free.
    pub lits: Vec<Literal>,
    pub mem: Option<FormulaId>,
}

impl Product {
    pub fn new(mut lits: Vec<Literal>, mem: Option<FormulaId>) -> Self {
        lits.sort_unstable();
        lits.dedup();
        Product { lits, mem }
    }

    pub fn arity(&self) -> usize {
        self.lits.len() + usize::from(self.mem.is_some())
    }

    /// Binary applications needed to evaluate this gate.
    pub fn cost(&self) -> u64 {
        self.arity().saturating_sub(1) as u64
    }

    pub fn mentions(&self, var: usize) -> bool {
        self.lits.iter().any(|l| l.var == var)
    }

    pub(crate) fn insert(&mut self, lit: Literal) {
        if let Err(at) = self.lits.binary_search(&lit) {
            self.lits.insert(at, lit);
        }
    }

    pub(crate) fn take(&mut self, var: usize) -> Option<Literal> {
        let at = self.lits.iter().position(|l| l.var == var)?;
        Some(self.lits.remove(at))
    }
}

/// A formula node: a sum over products with its memoized value.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub products: Vec<Product>,
    pub memo: Option<f64>,
}

impl Formula {
    pub fn new(products: Vec<Product>) -> Self {
        Formula {
            products,
            memo: None,
        }
    }

    /// ω of this formula: product applications plus the sum's applications.
    pub fn omega(&self) -> u64 {
        let sum = self.products.len().saturating_sub(1) as u64;
        sum + self.products.iter().map(Product::cost).sum::<u64>()
    }

    pub fn mentions(&self, var: usize) -> bool {
        self.products.iter().any(|p| p.mentions(var))
    }

    pub fn children(&self) -> impl Iterator<Item = FormulaId> + '_ {
        self.products.iter().filter_map(|p| p.mem)
    }
}

/// Operation counts accumulated by a circuit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    /// Applications performed by `react`.
    pub react: u64,
    /// Applications performed by `evaluate_full`.
    pub full: u64,
    /// Applications spent refreshing memos after lift/drop.
    pub adaptation: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub rho_max: f64,
    pub rho_rc: f64,
    pub gain: f64,
}

#[derive(Debug, Clone)]
pub struct ReactiveCircuit {
    sr: SemiringInstance,
    variables: Vec<String>,
    /// Indexed by `Literal::index`.
    weights: Vec<Option<f64>>,
    formulas: Vec<Formula>,
    parents: Vec<Vec<FormulaId>>,
    depth: Vec<usize>,
    /// Dep(s) per variable, ascending.
    dep: Vec<Vec<FormulaId>>,
    /// Formulas holding a literal of each variable, ascending.
    holders: Vec<Vec<FormulaId>>,
    queue: BTreeSet<FormulaId>,
    ops: OpCounters,
}

impl ReactiveCircuit {
    /// Flat circuit: one root summing one product per polynomial term.
    pub fn from_polynomial(poly: &WmcPolynomial, sr: SemiringInstance) -> Self {
        let products = poly
            .terms
            .iter()
            .map(|t| Product::new(t.clone(), None))
            .collect();
        let mut rc = ReactiveCircuit {
            sr,
            variables: poly.variables.clone(),
            weights: vec![None; 2 * poly.num_vars()],
            formulas: vec![Formula::new(products)],
            parents: Vec::new(),
            depth: Vec::new(),
            dep: Vec::new(),
            holders: Vec::new(),
            queue: BTreeSet::new(),
            ops: OpCounters::default(),
        };
        rc.rebuild_caches();
        rc
    }

    pub fn semiring(&self) -> SemiringInstance {
        self.sr
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn formula(&self, id: FormulaId) -> &Formula {
        &self.formulas[id]
    }

    pub fn parents(&self, id: FormulaId) -> &[FormulaId] {
        &self.parents[id]
    }

    pub fn ops(&self) -> OpCounters {
        self.ops
    }

    pub fn root_value(&self) -> Option<f64> {
        self.formulas[0].memo
    }

    pub fn omega(&self, id: FormulaId) -> u64 {
        self.formulas[id].omega()
    }

    /// Ω: applications for a full evaluation.
    pub fn total_omega(&self) -> u64 {
        self.formulas.iter().map(Formula::omega).sum()
    }

    /// Number of formula nodes (memo cells).
    pub fn memo_nodes(&self) -> usize {
        self.formulas.len()
    }

    /// Number of distinct formula depths.
    pub fn layers(&self) -> usize {
        self.depth.iter().max().map_or(0, |d| d + 1)
    }

    pub fn depth_of(&self, id: FormulaId) -> usize {
        self.depth[id]
    }

    /// Formulas directly containing a literal of `var`, plus their ancestors.
    pub fn dep(&self, var: usize) -> &[FormulaId] {
        &self.dep[var]
    }

    /// Σ ω over Dep(var): the cost of one update of `var` under `react`.
    pub fn dep_omega(&self, var: usize) -> u64 {
        self.dep[var].iter().map(|&i| self.omega(i)).sum()
    }

    /// Formulas whose own products mention `var`.
    pub fn holders(&self, var: usize) -> &[FormulaId] {
        &self.holders[var]
    }

    /// Smallest and largest depth at which `var` occurs.
    pub fn signal_depths(&self, var: usize) -> Option<(usize, usize)> {
        let depths = self.holders[var].iter().map(|&i| self.depth[i]);
        Some((depths.clone().min()?, depths.max()?))
    }

    fn check_var(&self, var: usize) -> Result<(), CircuitError> {
        if var < self.variables.len() {
            Ok(())
        } else {
            Err(CircuitError::UnknownSignal(var))
        }
    }

    /// Sets the weight of `var` and derives the negated literal's weight from
    /// the semiring complement where one exists.
    pub fn set_weight(&mut self, var: usize, positive: f64) -> Result<(), CircuitError> {
        self.check_var(var)?;
        let negative = if self.sr.has_negation_complement() {
            Some(self.sr.complement(positive)?)
        } else {
            None
        };
        self.weights[Literal::pos(var).index()] = Some(positive);
        self.weights[Literal::neg(var).index()] = negative;
        Ok(())
    }

    /// Sets both literal weights of `var` explicitly.
    pub fn set_literal_weights(
        &mut self,
        var: usize,
        positive: f64,
        negative: f64,
    ) -> Result<(), CircuitError> {
        self.check_var(var)?;
        self.weights[Literal::pos(var).index()] = Some(positive);
        self.weights[Literal::neg(var).index()] = Some(negative);
        Ok(())
    }

    pub fn weight(&self, lit: Literal) -> Option<f64> {
        self.weights[lit.index()]
    }

    fn literal_value(&self, lit: Literal) -> Result<f64, CircuitError> {
        match self.weights[lit.index()] {
            Some(w) => Ok(w),
            None if !lit.positive
                && self.weights[Literal::pos(lit.var).index()].is_some()
                && !self.sr.has_negation_complement() =>
            {
                Err(SemiringError::UnsupportedNegation(self.sr.name()).into())
            }
            None => {
                let name = &self.variables[lit.var];
                Err(CircuitError::UnevaluatedSignal(if lit.positive {
                    name.clone()
                } else {
                    format!("not {name}")
                }))
            }
        }
    }

    /// Evaluates formula `id` from literal weights and child memos.
    fn eval_formula(&self, id: FormulaId) -> Result<f64, CircuitError> {
        let sr = &self.sr;
        let mut acc = sr.zero();
        for p in &self.formulas[id].products {
            let mut prod = sr.one();
            for &l in &p.lits {
                prod = sr.times(prod, self.literal_value(l)?);
            }
            if let Some(c) = p.mem {
                let m = self.formulas[c].memo.ok_or_else(|| {
                    CircuitError::Invariant(format!("formula {id} read stale memo of {c}"))
                })?;
                prod = sr.times(prod, m);
            }
            acc = sr.plus(acc, prod);
        }
        Ok(acc)
    }

    /// Re-evaluates every formula bottom-up and returns the root value.
    pub fn evaluate_full(&mut self) -> Result<f64, CircuitError> {
        for id in (0..self.formulas.len()).rev() {
            let v = self.eval_formula(id)?;
            self.formulas[id].memo = Some(v);
            self.ops.full += self.omega(id);
        }
        self.queue.clear();
        Ok(self.formulas[0].memo.expect("root evaluated"))
    }

    /// Queues Dep(var) for re-evaluation.
    pub fn invalidate(&mut self, var: usize) -> Result<(), CircuitError> {
        self.check_var(var)?;
        self.queue.extend(self.dep[var].iter().copied());
        Ok(())
    }

    /// Pending formula indices, in processing (descending) order.
    pub fn queue(&self) -> Vec<FormulaId> {
        self.queue.iter().rev().copied().collect()
    }

    /// Processes the queue in descending index order. Returns the root value
    /// and the number of applications performed.
    pub fn react(&mut self) -> Result<(f64, u64), CircuitError> {
        let mut ops = 0;
        while let Some(id) = self.queue.pop_last() {
            let v = self.eval_formula(id)?;
            self.formulas[id].memo = Some(v);
            ops += self.omega(id);
        }
        self.ops.react += ops;
        let root = self.formulas[0]
            .memo
            .ok_or_else(|| CircuitError::Invariant("root memo unset".into()))?;
        Ok((root, ops))
    }

    /// Operation rates of full versus reactive evaluation for per-signal
    /// update rates `lambda`.
    pub fn rates(&self, lambda: &[f64]) -> Result<Rates, CircuitError> {
        if lambda.len() != self.num_vars() {
            return Err(CircuitError::UnknownSignal(lambda.len()));
        }
        if let Some((i, &rate)) = lambda.iter().enumerate().find(|(_, l)| !(**l >= 0.0)) {
            return Err(CircuitError::NegativeRate {
                signal: self.variables[i].clone(),
                rate,
            });
        }
        let omega = self.total_omega() as f64;
        let rho_max: f64 = lambda.iter().map(|l| l * omega).sum();
        let rho_rc: f64 = lambda
            .iter()
            .enumerate()
            .map(|(v, l)| l * self.dep_omega(v) as f64)
            .sum();
        let gain = if rho_rc == 0.0 {
            assert!(
                rho_max == 0.0,
                "reactive rate vanished with traffic present"
            );
            1.0
        } else {
            rho_max / rho_rc
        };
        Ok(Rates {
            rho_max,
            rho_rc,
            gain,
        })
    }

    /// Renumbers formulas in reverse DFS postorder from the root, drops
    /// unreachable ones and recomputes parents, depths and Dep sets.
    fn rebuild_caches(&mut self) {
        self.renumber(0);
        self.rebuild_dep();
    }

    fn renumber(&mut self, root: FormulaId) {
        let n = self.formulas.len();
        let mut state = vec![0u8; n];
        let mut post = Vec::with_capacity(n);
        // Iterative DFS: (node, children left to visit, reversed so that
        // earlier products get smaller ids).
        let mut stack: Vec<(FormulaId, Vec<FormulaId>)> =
            vec![(root, self.formulas[root].children().collect())];
        state[root] = 1;
        while let Some((node, pending)) = stack.last_mut() {
            if let Some(c) = pending.pop() {
                if state[c] == 0 {
                    state[c] = 1;
                    stack.push((c, self.formulas[c].children().collect()));
                }
            } else {
                state[*node] = 2;
                post.push(*node);
                stack.pop();
            }
        }
        post.reverse();
        let mut new_id = vec![usize::MAX; n];
        for (i, &old) in post.iter().enumerate() {
            new_id[old] = i;
        }
        let mut old: Vec<Option<Formula>> = std::mem::take(&mut self.formulas)
            .into_iter()
            .map(Some)
            .collect();
        self.formulas = post
            .iter()
            .map(|&o| {
                let mut f = old[o].take().expect("visited once");
                for p in &mut f.products {
                    if let Some(m) = p.mem.as_mut() {
                        *m = new_id[*m];
                    }
                }
                f
            })
            .collect();
        self.queue = self
            .queue
            .iter()
            .filter_map(|&q| new_id.get(q).copied().filter(|&i| i != usize::MAX))
            .collect();

        let n = self.formulas.len();
        // Ids ascend, so a list's last entry tells whether `i` is already in.
        let push = |list: &mut Vec<FormulaId>, i: FormulaId| {
            if list.last() != Some(&i) {
                list.push(i);
            }
        };
        let mut parents = vec![Vec::new(); n];
        let mut depth = vec![0; n];
        let mut holders = vec![Vec::new(); self.num_vars()];
        for (i, f) in self.formulas.iter().enumerate() {
            for p in &f.products {
                for l in &p.lits {
                    push(&mut holders[l.var], i);
                }
                if let Some(c) = p.mem {
                    push(&mut parents[c], i);
                    depth[c] = depth[c].max(depth[i] + 1);
                }
            }
        }
        self.parents = parents;
        self.depth = depth;
        self.holders = holders;
    }

    /// Dep sets from the holder lists. Ancestors in one pass: walking ids
    /// descending, a formula is in Dep(v) if it holds v or has a child that is.
    fn rebuild_dep(&mut self) {
        let n = self.formulas.len();
        let mut member = vec![false; n];
        self.dep = self
            .holders
            .iter()
            .map(|h| {
                member.fill(false);
                for &i in h {
                    member[i] = true;
                }
                for i in (0..n).rev() {
                    if !member[i] {
                        member[i] = self.formulas[i].children().any(|c| member[c]);
                    }
                }
                (0..n).filter(|&i| member[i]).collect()
            })
            .collect();
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.formulas.len();
        for (i, f) in self.formulas.iter().enumerate() {
            for c in f.children() {
                if c >= n {
                    return Err(format!("formula {i} references missing formula {c}"));
                }
                if c <= i {
                    return Err(format!(
                        "child {c} of formula {i} does not have a larger index"
                    ));
                }
            }
            if i > 0 && self.parents[i].is_empty() {
                return Err(format!("formula {i} has no parent"));
            }
            for p in &f.products {
                if p.lits.windows(2).any(|w| w[0].var == w[1].var) {
                    return Err(format!("formula {i} has a product with a repeated signal"));
                }
            }
        }
        Ok(())
    }

    /// Memo values of all formulas, for diagnostics and tests.
    pub fn memos(&self) -> Vec<Option<f64>> {
        self.formulas.iter().map(|f| f.memo).collect()
    }

    /// Literal occurrences per formula, keyed by variable name.
    pub fn layout(&self) -> HashMap<String, Vec<usize>> {
        (0..self.num_vars())
            .map(|v| {
                let depths = self.holders(v).iter().map(|&i| self.depth[i]).collect();
                (self.variables[v].clone(), depths)
            })
            .collect()
    }
}
