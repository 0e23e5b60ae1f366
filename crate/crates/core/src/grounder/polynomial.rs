use std::fmt;

use serde::{Deserialize, Serialize};

use super::StableModel;
use crate::semiring::{Semiring, SemiringError};

/// A signed reference to a weighted-model-counting variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal {
            var,
            positive: true,
        }
    }

    pub fn neg(var: usize) -> Self {
        Literal {
            var,
            positive: false,
        }
    }

    pub fn negate(self) -> Self {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }

    /// Dense index: `2 * var` for the positive literal, `2 * var + 1` for the negation.
    pub fn index(self) -> usize {
        2 * self.var + usize::from(!self.positive)
    }
}

/// Sum over models of the product of their signed literal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmcPolynomial {
    /// Display names of the variables, indexed by `Literal::var`.
    pub variables: Vec<String>,
    /// One product term per model.
    pub terms: Vec<Vec<Literal>>,
}

impl WmcPolynomial {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// Evaluates the polynomial given per-literal weights.
    pub fn evaluate_with<S: Semiring>(
        &self,
        sr: &S,
        mut weight: impl FnMut(Literal) -> f64,
    ) -> f64 {
        sr.sum(
            self.terms
                .iter()
                .map(|t| sr.product(t.iter().map(|&l| weight(l)))),
        )
    }

    /// Evaluates with positive weights, deriving negated weights by the semiring's complement.
    pub fn evaluate<S: Semiring>(&self, sr: &S, positive: &[f64]) -> Result<f64, SemiringError> {
        let mut err = None;
        let v = self.evaluate_with(sr, |l| {
            match sr.literal_weight(positive[l.var], !l.positive) {
                Ok(w) => w,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// Whether any term mentions the negation of `var`.
    pub fn uses_negation(&self, var: usize) -> bool {
        self.terms
            .iter()
            .any(|t| t.iter().any(|l| l.var == var && !l.positive))
    }
}

impl fmt::Display for WmcPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, term) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if term.is_empty() {
                f.write_str("1")?;
            }
            for (j, l) in term.iter().enumerate() {
                if j > 0 {
                    f.write_str("·")?;
                }
                let name = &self.variables[l.var];
                if l.positive {
                    write!(f, "P({name})")?;
                } else {
                    write!(f, "P(¬{name})")?;
                }
            }
        }
        Ok(())
    }
}

/// Unrefined weighted model count: one product over all variables per model.
pub fn build_wmc_polynomial(variables: Vec<String>, models: &[StableModel]) -> WmcPolynomial {
    let n = variables.len();
    let terms = models
        .iter()
        .map(|m| {
            (0..n)
                .map(|v| Literal {
                    var: v,
                    positive: m.get(v),
                })
                .collect()
        })
        .collect();
    WmcPolynomial { variables, terms }
}
