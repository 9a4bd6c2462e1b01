//! Łukasiewicz soft-logic expressions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Sub};

use super::PslError;

/// Scalar type the connectives operate on. `f64` is what the solver uses;
/// an exact type lets the algebraic identities be checked without rounding.
pub trait TruthValue: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> {
    const ZERO: Self;
    const ONE: Self;
}

impl TruthValue for f64 {
    const ZERO: f64 = 0.0;
    const ONE: f64 = 1.0;
}

/// Strong conjunction: `max(x + y - 1, 0)`.
#[inline]
pub fn luk_and<T: TruthValue>(x: T, y: T) -> T {
    let s = x + y - T::ONE;
    if s > T::ZERO {
        s
    } else {
        T::ZERO
    }
}

/// Strong disjunction: `min(x + y, 1)`.
#[inline]
pub fn luk_or<T: TruthValue>(x: T, y: T) -> T {
    let s = x + y;
    if s < T::ONE {
        s
    } else {
        T::ONE
    }
}

#[inline]
pub fn luk_not<T: TruthValue>(x: T) -> T {
    T::ONE - x
}

/// `¬x ∨ y`.
#[inline]
pub fn luk_implies<T: TruthValue>(x: T, y: T) -> T {
    luk_or(luk_not(x), y)
}

/// Expression tree over truth values in `[0, 1]`.
///
/// There is no implication node: [`SoftExpr::implies`] builds `¬a ∨ b`.
#[derive(Debug, Clone, PartialEq)]
pub enum SoftExpr {
    Const(f64),
    Var(String),
    Not(Box<SoftExpr>),
    And(Box<SoftExpr>, Box<SoftExpr>),
    Or(Box<SoftExpr>, Box<SoftExpr>),
}

/// Anything that can resolve a variable name to a truth value.
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Bindings for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for [(&str, f64)] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Bindings for [(&str, f64); N] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.as_slice().lookup(name)
    }
}

impl SoftExpr {
    /// Constant node; the value must lie in `[0, 1]`.
    pub fn constant(value: f64) -> Result<Self, PslError> {
        if (0.0..=1.0).contains(&value) {
            Ok(SoftExpr::Const(value))
        } else {
            Err(PslError::ConstOutOfRange(value))
        }
    }

    pub fn var(name: impl Into<String>) -> Self {
        SoftExpr::Var(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: SoftExpr) -> Self {
        SoftExpr::Not(Box::new(e))
    }

    pub fn and(a: SoftExpr, b: SoftExpr) -> Self {
        SoftExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: SoftExpr, b: SoftExpr) -> Self {
        SoftExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: SoftExpr, b: SoftExpr) -> Self {
        SoftExpr::or(SoftExpr::not(a), b)
    }

    /// Evaluates the expression; every variable must be bound.
    pub fn eval<B: Bindings + ?Sized>(&self, bindings: &B) -> Result<f64, PslError> {
        Ok(match self {
            SoftExpr::Const(v) => *v,
            SoftExpr::Var(name) => bindings
                .lookup(name)
                .ok_or_else(|| PslError::UnboundVariable(name.clone()))?,
            SoftExpr::Not(e) => luk_not(e.eval(bindings)?),
            SoftExpr::And(a, b) => luk_and(a.eval(bindings)?, b.eval(bindings)?),
            SoftExpr::Or(a, b) => luk_or(a.eval(bindings)?, b.eval(bindings)?),
        })
    }

    /// Names of all variables, in first-occurrence order without repeats.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.visit_vars(&mut |name| {
            if seen.insert(name.to_string()) {
                out.push(name.to_string());
            }
        });
        out
    }

    fn visit_vars(&self, f: &mut impl FnMut(&str)) {
        match self {
            SoftExpr::Const(_) => {}
            SoftExpr::Var(name) => f(name),
            SoftExpr::Not(e) => e.visit_vars(f),
            SoftExpr::And(a, b) | SoftExpr::Or(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            SoftExpr::Or(..) => 1,
            SoftExpr::And(..) => 2,
            SoftExpr::Not(..) => 3,
            SoftExpr::Const(_) | SoftExpr::Var(_) => 4,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Prints in the rule-DSL surface syntax. Binary operators are
/// left-associative, so right operands of equal precedence get parentheses.
impl fmt::Display for SoftExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SoftExpr::Const(v) => write!(f, "{v}"),
            SoftExpr::Var(name) => write!(f, "{name}"),
            SoftExpr::Not(e) => {
                write!(f, "!")?;
                e.fmt_child(f, 3)
            }
            SoftExpr::And(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, " & ")?;
                b.fmt_child(f, 3)
            }
            SoftExpr::Or(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " | ")?;
                b.fmt_child(f, 2)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> SoftExpr {
        SoftExpr::constant(v).unwrap()
    }

    const NONE: [(&str, f64); 0] = [];

    #[test]
    fn and_example() {
        let v = SoftExpr::and(c(0.7), c(0.6)).eval(&NONE).unwrap();
        assert!((v - 0.3).abs() < 1e-12);
    }

    #[test]
    fn not_zero() {
        assert_eq!(SoftExpr::not(c(0.0)).eval(&NONE).unwrap(), 1.0);
    }

    #[test]
    fn implies_example() {
        assert_eq!(SoftExpr::implies(c(0.4), c(0.9)).eval(&NONE).unwrap(), 1.0);
    }

    #[test]
    fn implies_is_desugared() {
        let e = SoftExpr::implies(SoftExpr::var("a"), SoftExpr::var("b"));
        assert_eq!(
            e,
            SoftExpr::or(SoftExpr::not(SoftExpr::var("a")), SoftExpr::var("b"))
        );
    }

    #[test]
    fn unbound_variable_is_named() {
        let err = SoftExpr::var("yKeep").eval(&NONE).unwrap_err();
        assert_eq!(err, PslError::UnboundVariable("yKeep".into()));
        assert!(err.to_string().contains("yKeep"));
    }

    #[test]
    fn constant_range_checked() {
        assert!(SoftExpr::constant(1.5).is_err());
        assert!(SoftExpr::constant(-0.1).is_err());
        assert!(SoftExpr::constant(f64::NAN).is_err());
    }

    #[test]
    fn variables_deduplicated() {
        let e = SoftExpr::and(
            SoftExpr::var("a"),
            SoftExpr::or(SoftExpr::var("b"), SoftExpr::not(SoftExpr::var("a"))),
        );
        assert_eq!(e.variables(), vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn display_parenthesizes_minimally() {
        let a = || SoftExpr::var("a");
        let b = || SoftExpr::var("b");
        assert_eq!(SoftExpr::and(a(), SoftExpr::or(a(), b())).to_string(), "a & (a | b)");
        assert_eq!(SoftExpr::or(SoftExpr::and(a(), b()), a()).to_string(), "a & b | a");
        assert_eq!(SoftExpr::not(SoftExpr::and(a(), b())).to_string(), "!(a & b)");
        assert_eq!(SoftExpr::and(a(), SoftExpr::and(a(), b())).to_string(), "a & (a & b)");
    }
}
