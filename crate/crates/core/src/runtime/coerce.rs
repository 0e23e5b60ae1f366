//! Turning raw signal values into circuit weights.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use super::value::TypedValue;
use crate::grounder::{ChoiceKind, ComparisonSite, Operand};
use crate::lang::RelOp;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoerceError {
    #[error("{0:?} cannot be used as a plain literal")]
    NeedsComparison(TypedValue),
    #[error("{0:?} cannot be compared")]
    NotComparable(TypedValue),
    #[error("right operand {0:?} is not a number")]
    BadOperand(TypedValue),
}

fn gaussian_cdf(mean: f64, stddev: f64, x: f64) -> f64 {
    Normal::new(mean, stddev).expect("validated density").cdf(x)
}

/// Weight of a plain `Probability` or `Boolean` literal.
pub fn coerce_literal(value: &TypedValue) -> Result<f64, CoerceError> {
    match *value {
        TypedValue::Probability(p) => Ok(p),
        TypedValue::Boolean(b) => Ok(if b { 1.0 } else { 0.0 }),
        other => Err(CoerceError::NeedsComparison(other)),
    }
}

/// Weight of `lhs op rhs`. For `==` on a density, `tolerance` is the half
/// width of the interval whose probability mass is taken; on numbers it is
/// the comparison tolerance.
pub fn coerce_comparison(
    lhs: &TypedValue,
    op: RelOp,
    rhs: f64,
    tolerance: f64,
) -> Result<f64, CoerceError> {
    match *lhs {
        TypedValue::Number(x) => Ok(if op.holds(x, rhs, tolerance) {
            1.0
        } else {
            0.0
        }),
        TypedValue::Density { mean, stddev } => Ok(match op {
            RelOp::Gt | RelOp::Ge => 1.0 - gaussian_cdf(mean, stddev, rhs),
            RelOp::Lt | RelOp::Le => gaussian_cdf(mean, stddev, rhs),
            RelOp::Eq => {
                gaussian_cdf(mean, stddev, rhs + tolerance)
                    - gaussian_cdf(mean, stddev, rhs - tolerance)
            }
        }),
        other => Err(CoerceError::NotComparable(other)),
    }
}

/// Weight of a choice atom given the raw signal table, or `None` while an
/// input is missing.
pub fn coerce_choice(
    kind: &ChoiceKind,
    signals: &[Option<TypedValue>],
    tolerance: f64,
) -> Result<Option<f64>, CoerceError> {
    match kind {
        ChoiceKind::Source(s) => signals[*s].as_ref().map(coerce_literal).transpose(),
        ChoiceKind::Comparison(ComparisonSite { lhs, op, rhs }) => {
            let Some(l) = signals[*lhs].as_ref() else {
                return Ok(None);
            };
            let r = match rhs {
                Operand::Const(c) => *c,
                Operand::Source(r) => match signals[*r] {
                    None => return Ok(None),
                    Some(TypedValue::Number(x)) => x,
                    Some(other) => return Err(CoerceError::BadOperand(other)),
                },
            };
            coerce_comparison(l, *op, r, tolerance).map(Some)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_tail() {
        let d = TypedValue::Density {
            mean: 30.0,
            stddev: 5.0,
        };
        let w = coerce_comparison(&d, RelOp::Gt, 10.0, 1e-3).unwrap();
        // Φ(4) from a standard normal table.
        assert!((w - 0.999_968_3).abs() < 1e-7);
        assert_eq!(w, coerce_comparison(&d, RelOp::Ge, 10.0, 1e-3).unwrap());
        let lt = coerce_comparison(&d, RelOp::Lt, 10.0, 1e-3).unwrap();
        assert!((w + lt - 1.0).abs() < 1e-15);
        let centre = coerce_comparison(&d, RelOp::Lt, 30.0, 1e-3).unwrap();
        assert!((centre - 0.5).abs() < 1e-15);
    }

    #[test]
    fn density_equality_is_interval_mass() {
        let d = TypedValue::Density {
            mean: 0.0,
            stddev: 1.0,
        };
        let w = coerce_comparison(&d, RelOp::Eq, 0.0, 1.0).unwrap();
        assert!((w - 0.682_689_492_137_085_9).abs() < 1e-9);
    }

    #[test]
    fn plain_literals() {
        assert_eq!(coerce_literal(&TypedValue::Boolean(true)).unwrap(), 1.0);
        assert_eq!(coerce_literal(&TypedValue::Boolean(false)).unwrap(), 0.0);
        assert_eq!(coerce_literal(&TypedValue::Probability(0.3)).unwrap(), 0.3);
        assert!(coerce_literal(&TypedValue::Number(3.0)).is_err());
    }

    #[test]
    fn number_comparisons() {
        let n = TypedValue::Number(15.0);
        assert_eq!(coerce_comparison(&n, RelOp::Lt, 20.0, 1e-9).unwrap(), 1.0);
        assert_eq!(coerce_comparison(&n, RelOp::Gt, 20.0, 1e-9).unwrap(), 0.0);
        assert_eq!(coerce_comparison(&n, RelOp::Eq, 15.0, 1e-9).unwrap(), 1.0);
    }

    #[test]
    fn missing_inputs_defer() {
        let kind = ChoiceKind::Comparison(ComparisonSite {
            lhs: 0,
            op: RelOp::Gt,
            rhs: Operand::Source(1),
        });
        let mut sig = vec![Some(TypedValue::Number(3.0)), None];
        assert_eq!(coerce_choice(&kind, &sig, 1e-9).unwrap(), None);
        sig[1] = Some(TypedValue::Number(2.0));
        assert_eq!(coerce_choice(&kind, &sig, 1e-9).unwrap(), Some(1.0));
    }
}
