//! Łukasiewicz soft logic: expressions, the rule DSL, the keep/reclassify
//! rule set and its exact two-variable solver.

mod decision;
mod dsl;
mod expr;
pub mod oracle;
mod rules;
mod solver;

pub use decision::{decide, decide_point, Decision, DEFAULT_PHI_KEEP, DEFAULT_PHI_RECLS};
pub use dsl::{parse_rules, print_rules, ParsedRule};
pub use expr::{luk_and, luk_implies, luk_not, luk_or, Bindings, SoftExpr, TruthValue};
pub use oracle::brute_force_solve;
pub use rules::{
    build_glrd_rules, ConstraintVector, Rule, RuleSet, RuleWeights, GLRD_RULES_SOURCE, X_CONF,
    X_SCENE, X_SIZE, Y_KEEP, Y_RECLS,
};
pub use solver::{
    objective_pieces, solve, Affine, Cell, MaximizerCell, SelectionPolicy, SolverOutput,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PslError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("constant {0} outside [0, 1]")]
    ConstOutOfRange(f64),
    #[error("value {value} for `{name}` outside [0, 1]")]
    BindingOutOfRange { name: String, value: f64 },
    #[error("rule weight must be non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("{line}:{column}: rule weight must be non-negative, got {weight}")]
    NegativeRuleWeight {
        line: usize,
        column: usize,
        weight: f64,
    },
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid rule set: {0}")]
    InvalidRuleSet(String),
    #[error("solver supports exactly the free variables yKeep and yRecls, got {0:?}")]
    UnsupportedFreeVars(Vec<String>),
    #[error("grid resolution must lie in (0, 0.1], got {0}")]
    InvalidResolution(f64),
}
