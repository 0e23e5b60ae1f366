//! Structural adaptation: moving a signal's literals one layer towards the
//! leaves (`drop`) or towards the root (`lift`) without changing the value of
//! any formula that is not rewritten.

use std::collections::{BTreeSet, HashMap};

use super::{CircuitError, Formula, FormulaId, Product, ReactiveCircuit};
use crate::grounder::Literal;

/// Where a partition group of a lifted formula ends up.
enum Group {
    Empty,
    /// A single empty product: the site keeps only the literal.
    Unit,
    Formula(FormulaId),
}

impl ReactiveCircuit {
    /// Moves every occurrence of each signal in `vars` one layer deeper.
    /// Returns the applications spent refreshing memos.
    pub fn drop(&mut self, vars: &[usize]) -> Result<u64, CircuitError> {
        vars.iter().try_for_each(|&v| self.check_var(v))?;
        let before = self.ops.adaptation;
        let evaluated = self.formulas[0].memo.is_some();
        for &v in vars {
            self.drop_one(v);
        }
        self.rebuild_dep();
        self.refresh(evaluated);
        Ok(self.ops.adaptation - before)
    }

    /// Moves every occurrence of each signal in `vars` one layer up; lifting
    /// out of the root creates a new root.
    pub fn lift(&mut self, vars: &[usize]) -> Result<u64, CircuitError> {
        vars.iter().try_for_each(|&v| self.check_var(v))?;
        let before = self.ops.adaptation;
        let evaluated = self.formulas[0].memo.is_some();
        for &v in vars {
            self.lift_one(v);
        }
        self.rebuild_dep();
        self.refresh(evaluated);
        Ok(self.ops.adaptation - before)
    }

    fn push_formula(&mut self, products: Vec<Product>) -> FormulaId {
        self.formulas.push(Formula::new(products));
        self.formulas.len() - 1
    }

    fn reference_counts(&self) -> Vec<usize> {
        let mut refs = vec![0; self.formulas.len()];
        for f in &self.formulas {
            for c in f.children() {
                refs[c] += 1;
            }
        }
        refs
    }

    fn drop_one(&mut self, var: usize) {
        let holders = self.holders(var).to_vec();
        if holders.is_empty() {
            return;
        }
        let mut refs = self.reference_counts();
        // Descendants first. A child of a product holding `var` never holds
        // `var` itself, so the children rewritten below are not holders.
        for &f in holders.iter().rev() {
            let mut products = std::mem::take(&mut self.formulas[f].products);
            for p in &mut products {
                let Some(lit) = p.take(var) else { continue };
                let child = match p.mem {
                    Some(g) if refs[g] > 1 => {
                        refs[g] -= 1;
                        let copy = self.formulas[g].products.clone();
                        for c in copy.iter().filter_map(|q| q.mem) {
                            refs[c] += 1;
                        }
                        refs.push(1);
                        self.push_formula(copy)
                    }
                    Some(g) => g,
                    None => {
                        refs.push(1);
                        self.push_formula(vec![Product::new(Vec::new(), None)])
                    }
                };
                let child_formula = &mut self.formulas[child];
                for q in &mut child_formula.products {
                    q.insert(lit);
                }
                child_formula.memo = None;
                p.mem = Some(child);
            }
            self.formulas[f].products = products;
            self.formulas[f].memo = None;
        }
        for &f in &holders {
            self.factor(f);
        }
        self.renumber(0);
    }

    fn lift_one(&mut self, var: usize) {
        let holders = self.holders(var).to_vec();
        if holders.is_empty() {
            return;
        }
        let mut root = 0;
        let mut rewritten = BTreeSet::new();
        // Parents are cached as of the last renumbering; anything created
        // since then may have become one.
        let known = self.formulas.len();
        // Ancestors first; ids stay valid until the final renumbering.
        for &fi in &holders {
            if !self.formulas[fi].mentions(var) {
                continue;
            }
            if fi == root {
                root = self.push_formula(vec![Product::new(Vec::new(), Some(fi))]);
            }
            let (pos, neg, rest) = self.partition(fi, var);
            let only = |a: &Vec<Product>, b: &Vec<Product>| a.is_empty() && b.is_empty();
            let groups = if only(&neg, &rest) {
                [self.group(pos, Some(fi)), Group::Empty, Group::Empty]
            } else if only(&pos, &rest) {
                [Group::Empty, self.group(neg, Some(fi)), Group::Empty]
            } else {
                [
                    self.group(pos, None),
                    self.group(neg, None),
                    self.group(rest, None),
                ]
            };
            let signs = [Some(Literal::pos(var)), Some(Literal::neg(var)), None];

            let candidates: Vec<FormulaId> = self.parents[fi]
                .iter()
                .copied()
                .chain(known..self.formulas.len())
                .collect();
            for parent in candidates {
                if !self.formulas[parent].children().any(|c| c == fi) {
                    continue;
                }
                let old = std::mem::take(&mut self.formulas[parent].products);
                let mut products = Vec::with_capacity(old.len() + 2);
                for p in old {
                    if p.mem != Some(fi) {
                        products.push(p);
                        continue;
                    }
                    for (sign, group) in signs.iter().zip(&groups) {
                        let mem = match group {
                            Group::Empty => continue,
                            Group::Unit => None,
                            Group::Formula(g) => Some(*g),
                        };
                        let mut lits = p.lits.clone();
                        lits.extend(*sign);
                        products.push(Product::new(lits, mem));
                    }
                }
                self.formulas[parent].products = products;
                self.formulas[parent].memo = None;
                rewritten.insert(parent);
            }
        }
        for f in rewritten {
            self.factor(f);
        }
        self.renumber(root);
    }

    /// Splits the products of `f` by the sign of `var`, removing the literal.
    fn partition(&self, f: FormulaId, var: usize) -> (Vec<Product>, Vec<Product>, Vec<Product>) {
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for p in &self.formulas[f].products {
            let mut q = p.clone();
            match q.take(var) {
                Some(l) if l.positive => pos.push(q),
                Some(_) => neg.push(q),
                None => rest.push(q),
            }
        }
        (pos, neg, rest)
    }

    /// Materializes a partition group, reusing formula `reuse` if given.
    fn group(&mut self, products: Vec<Product>, reuse: Option<FormulaId>) -> Group {
        match products.as_slice() {
            [] => Group::Empty,
            [p] if p.arity() == 0 => Group::Unit,
            _ => match reuse {
                Some(f) => {
                    self.formulas[f].products = products;
                    self.formulas[f].memo = None;
                    Group::Formula(f)
                }
                None => Group::Formula(self.push_formula(products)),
            },
        }
    }

    /// Merges products of `f` that share a literal set and each carry a child
    /// reference into one product over a combined child, recursively.
    fn factor(&mut self, f: FormulaId) {
        let mut by_lits: HashMap<Vec<Literal>, Vec<usize>> = HashMap::new();
        for (i, p) in self.formulas[f].products.iter().enumerate() {
            if p.mem.is_some() {
                by_lits.entry(p.lits.clone()).or_default().push(i);
            }
        }
        if by_lits.values().all(|g| g.len() < 2) {
            return;
        }
        let old = std::mem::take(&mut self.formulas[f].products);
        let mut products = Vec::with_capacity(old.len());
        let mut created = Vec::new();
        for (i, p) in old.iter().enumerate() {
            let Some(group) = p.mem.and(by_lits.get(&p.lits)).filter(|g| g.len() > 1) else {
                products.push(p.clone());
                continue;
            };
            if group[0] != i {
                continue;
            }
            let combined: Vec<Product> = group
                .iter()
                .flat_map(|&j| self.formulas[old[j].mem.expect("grouped")].products.clone())
                .collect();
            let child = self.push_formula(combined);
            created.push(child);
            products.push(Product::new(p.lits.clone(), Some(child)));
        }
        self.formulas[f].products = products;
        self.formulas[f].memo = None;
        for c in created {
            self.factor(c);
        }
    }

    /// Re-evaluates formulas whose memo was cleared and their ancestors.
    /// Formulas above a pending queue entry are queued instead, so that
    /// `react` still sees a closed queue.
    fn refresh(&mut self, evaluated: bool) {
        let n = self.formulas.len();
        let mut queued = vec![false; n];
        let mut stale = vec![false; n];
        for i in (0..n).rev() {
            let f = &self.formulas[i];
            queued[i] = self.queue.contains(&i) || f.children().any(|c| queued[c]);
            stale[i] = f.memo.is_none() || f.children().any(|c| stale[c]);
        }
        for i in (0..n).rev() {
            if queued[i] {
                self.queue.insert(i);
            } else if stale[i] && evaluated {
                match self.eval_formula(i) {
                    Ok(v) => {
                        self.formulas[i].memo = Some(v);
                        self.ops.adaptation += self.omega(i);
                    }
                    Err(_) => {
                        self.formulas[i].memo = None;
                        self.queue.insert(i);
                        queued[i] = true;
                    }
                }
            }
        }
        // Anything above a newly queued formula must be queued too.
        for i in (0..n).rev() {
            if !queued[i] && self.formulas[i].children().any(|c| queued[c]) {
                queued[i] = true;
                self.queue.insert(i);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::worked_example;
    use super::*;

    fn lits(rc: &ReactiveCircuit, f: FormulaId) -> Vec<String> {
        rc.formula(f)
            .products
            .iter()
            .map(|p| {
                let mut s: Vec<String> = p
                    .lits
                    .iter()
                    .map(|l| {
                        let n = &rc.variables()[l.var];
                        if l.positive {
                            n.clone()
                        } else {
                            format!("¬{n}")
                        }
                    })
                    .collect();
                if let Some(m) = p.mem {
                    s.push(format!("m{m}"));
                }
                s.join("·")
            })
            .collect()
    }

    #[test]
    fn drop_b_c_matches_worked_example() {
        let mut rc = worked_example();
        rc.evaluate_full().unwrap();
        rc.drop(&[1, 2]).unwrap();
        rc.check_invariants().unwrap();
        assert_eq!(rc.memo_nodes(), 3);
        assert_eq!(rc.omega(0), 3);
        assert_eq!(lits(&rc, 0), vec!["a·m1", "¬a·m2"]);
        assert_eq!(lits(&rc, 1), vec!["b·¬c"]);
        assert_eq!(lits(&rc, 2), vec!["b·c"]);
        assert!((rc.root_value().unwrap() - 0.2).abs() < 1e-15);

        rc.invalidate(0).unwrap();
        assert_eq!(rc.queue(), vec![0]);
        let (v, ops) = rc.react().unwrap();
        assert_eq!(ops, 3);
        assert!((v - 0.2).abs() < 1e-15);

        rc.invalidate(1).unwrap();
        assert_eq!(rc.queue(), vec![2, 1, 0]);
        assert_eq!(rc.react().unwrap().1, 5);

        let r = rc.rates(&[5.0, 1.0, 1.0]).unwrap();
        assert_eq!((r.rho_max, r.rho_rc), (35.0, 25.0));
        assert!((r.gain - 1.4).abs() < 1e-15);
    }

    #[test]
    fn empty_adaptations_change_nothing() {
        let mut rc = worked_example();
        rc.evaluate_full().unwrap();
        let before = rc.formulas().to_vec();
        rc.drop(&[]).unwrap();
        rc.lift(&[]).unwrap();
        assert_eq!(rc.formulas(), &before[..]);
    }

    #[test]
    fn lift_round_trip() {
        let mut rc = worked_example();
        rc.evaluate_full().unwrap();
        rc.drop(&[1, 2]).unwrap();
        rc.lift(&[1, 2]).unwrap();
        rc.check_invariants().unwrap();
        assert!((rc.root_value().unwrap() - 0.2).abs() < 1e-15);
        assert!((rc.evaluate_full().unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(rc.layers(), 1);
    }

    #[test]
    fn lift_from_root_isolates_signal() {
        let mut rc = worked_example();
        rc.evaluate_full().unwrap();
        rc.lift(&[0]).unwrap();
        rc.check_invariants().unwrap();
        assert_eq!(lits(&rc, 0), vec!["a·m1", "¬a·m2"]);
        assert_eq!(lits(&rc, 1), vec!["b·¬c"]);
        assert_eq!(lits(&rc, 2), vec!["b·c"]);
        assert!((rc.root_value().unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn adaptation_ops_are_separate() {
        let mut rc = worked_example();
        rc.evaluate_full().unwrap();
        let spent = rc.drop(&[1, 2]).unwrap();
        assert_eq!(spent, 5);
        assert_eq!(rc.ops().react, 0);
    }

    #[test]
    fn adapting_with_pending_updates_stays_consistent() {
        let mut rc = worked_example();
        rc.evaluate_full().unwrap();
        rc.set_weight(1, 0.9).unwrap();
        rc.invalidate(1).unwrap();
        rc.drop(&[1]).unwrap();
        let (v, _) = rc.react().unwrap();
        let mut fresh = rc.clone();
        assert!((v - fresh.evaluate_full().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn shared_child_is_cloned_on_drop() {
        use crate::grounder::{build_wmc_polynomial, StableModel};
        use crate::semiring::SemiringInstance;
        // Models over (a, b): all four assignments.
        let models: Vec<_> = (0..4).map(|b| StableModel::from_bits(b, 2)).collect();
        let poly = build_wmc_polynomial(vec!["a".into(), "b".into()], &models);
        let mut rc = ReactiveCircuit::from_polynomial(&poly, SemiringInstance::Probability);
        rc.set_weight(0, 0.3).unwrap();
        rc.set_weight(1, 0.6).unwrap();
        rc.evaluate_full().unwrap();
        for step in [&[0usize][..], &[1], &[0], &[1], &[0]] {
            rc.drop(step).unwrap();
            rc.check_invariants().unwrap();
            assert!((rc.root_value().unwrap() - 1.0).abs() < 1e-12);
        }
        for step in [&[0usize][..], &[1], &[0], &[1], &[0]] {
            rc.lift(step).unwrap();
            rc.check_invariants().unwrap();
            assert!((rc.root_value().unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
