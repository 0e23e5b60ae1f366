//! Commutative semirings over which circuits are evaluated.
//!
//! All values are `f64`. A semiring supplies the two monoid operations, their
//! neutral elements and, optionally, a complement rule that derives the weight
//! of a negated literal from the weight of its positive counterpart.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemiringError {
    #[error("semiring `{0}` has no complement rule for negated literals")]
    UnsupportedNegation(&'static str),
    #[error("weight {0} lies outside [0, 1] and has no probability complement")]
    OutOfUnitInterval(f64),
    #[error("unknown semiring `{0}` (expected `probability` or `max-times`)")]
    Unknown(String),
}

/// The algebraic interface used by circuits.
pub trait Semiring {
    fn name(&self) -> &'static str;
    fn zero(&self) -> f64;
    fn one(&self) -> f64;
    fn plus(&self, a: f64, b: f64) -> f64;
    fn times(&self, a: f64, b: f64) -> f64;

    /// Whether `complement` is defined for this semiring.
    fn has_negation_complement(&self) -> bool {
        false
    }

    /// Weight of `not a` given the weight of `a`.
    fn complement(&self, _positive_weight: f64) -> Result<f64, SemiringError> {
        Err(SemiringError::UnsupportedNegation(self.name()))
    }

    /// Weight of a literal; negated literals go through [`Semiring::complement`].
    fn literal_weight(&self, positive_weight: f64, negated: bool) -> Result<f64, SemiringError> {
        if negated {
            self.complement(positive_weight)
        } else {
            Ok(positive_weight)
        }
    }

    fn sum<I: IntoIterator<Item = f64>>(&self, values: I) -> f64
    where
        Self: Sized,
    {
        values
            .into_iter()
            .fold(self.zero(), |acc, v| self.plus(acc, v))
    }

    fn product<I: IntoIterator<Item = f64>>(&self, values: I) -> f64
    where
        Self: Sized,
    {
        values
            .into_iter()
            .fold(self.one(), |acc, v| self.times(acc, v))
    }
}

/// `([0, 1], +, ×, 0, 1)`, the semiring of weighted model counting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Probability;

impl Semiring for Probability {
    fn name(&self) -> &'static str {
        "probability"
    }
    fn zero(&self) -> f64 {
        0.0
    }
    fn one(&self) -> f64 {
        1.0
    }
    fn plus(&self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn times(&self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn has_negation_complement(&self) -> bool {
        true
    }
    fn complement(&self, positive_weight: f64) -> Result<f64, SemiringError> {
        if !(0.0..=1.0).contains(&positive_weight) {
            return Err(SemiringError::OutOfUnitInterval(positive_weight));
        }
        Ok(1.0 - positive_weight)
    }
}

/// `(R≥0, max, ×, 0, 1)`, used for most-probable-explanation style queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaxTimes;

impl Semiring for MaxTimes {
    fn name(&self) -> &'static str {
        "max-times"
    }
    fn zero(&self) -> f64 {
        0.0
    }
    fn one(&self) -> f64 {
        1.0
    }
    fn plus(&self, a: f64, b: f64) -> f64 {
        a.max(b)
    }
    fn times(&self, a: f64, b: f64) -> f64 {
        a * b
    }
}

/// The concrete semirings a circuit can be instantiated with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemiringInstance {
    #[default]
    Probability,
    MaxTimes,
}

macro_rules! dispatch {
    ($self:ident, $s:ident => $e:expr) => {
        match $self {
            SemiringInstance::Probability => {
                let $s = &Probability;
                $e
            }
            SemiringInstance::MaxTimes => {
                let $s = &MaxTimes;
                $e
            }
        }
    };
}

impl Semiring for SemiringInstance {
    fn name(&self) -> &'static str {
        dispatch!(self, s => s.name())
    }
    fn zero(&self) -> f64 {
        dispatch!(self, s => s.zero())
    }
    fn one(&self) -> f64 {
        dispatch!(self, s => s.one())
    }
    fn plus(&self, a: f64, b: f64) -> f64 {
        dispatch!(self, s => s.plus(a, b))
    }
    fn times(&self, a: f64, b: f64) -> f64 {
        dispatch!(self, s => s.times(a, b))
    }
    fn has_negation_complement(&self) -> bool {
        dispatch!(self, s => s.has_negation_complement())
    }
    fn complement(&self, w: f64) -> Result<f64, SemiringError> {
        dispatch!(self, s => s.complement(w))
    }
}

impl fmt::Display for SemiringInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SemiringInstance {
    type Err = SemiringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "probability" => Ok(SemiringInstance::Probability),
            "max-times" => Ok(SemiringInstance::MaxTimes),
            other => Err(SemiringError::Unknown(other.to_string())),
        }
    }
}
