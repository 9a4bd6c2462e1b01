//! Grid-scan reference solver, used to check [`super::solve`].
//!
//! Evaluates the rule sum on a regular grid over `[0,1]²` one `yKeep` row at a
//! time, with `yRecls` laid out as a vector so each operator is a tight loop.
//! It shares nothing with the cell decomposition beyond the rule set itself.

use super::expr::SoftExpr;
use super::rules::{RuleSet, Y_KEEP, Y_RECLS};
use super::solver::{Affine, Cell, MaximizerCell, SolverOutput};
use super::PslError;
use crate::geometry::polygon::HalfPlane;

enum Lane {
    Scalar(f64),
    Row(Vec<f64>),
}

impl Lane {
    fn map(self, f: impl Fn(f64) -> f64) -> Lane {
        match self {
            Lane::Scalar(v) => Lane::Scalar(f(v)),
            Lane::Row(mut r) => {
                for v in r.iter_mut() {
                    *v = f(*v);
                }
                Lane::Row(r)
            }
        }
    }

    fn zip(self, other: Lane, f: impl Fn(f64, f64) -> f64) -> Lane {
        match (self, other) {
            (Lane::Scalar(a), Lane::Scalar(b)) => Lane::Scalar(f(a, b)),
            (Lane::Row(mut a), Lane::Scalar(b)) => {
                for v in a.iter_mut() {
                    *v = f(*v, b);
                }
                Lane::Row(a)
            }
            (Lane::Scalar(a), Lane::Row(mut b)) => {
                for v in b.iter_mut() {
                    *v = f(a, *v);
                }
                Lane::Row(b)
            }
            (Lane::Row(mut a), Lane::Row(b)) => {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x = f(*x, *y);
                }
                Lane::Row(a)
            }
        }
    }
}

struct RowEnv<'a> {
    rules: &'a RuleSet,
    keep: f64,
    recls: &'a [f64],
}

fn eval_row(e: &SoftExpr, env: &RowEnv<'_>) -> Result<Lane, PslError> {
    Ok(match e {
        SoftExpr::Const(v) => Lane::Scalar(*v),
        SoftExpr::Var(name) if name == Y_KEEP => Lane::Scalar(env.keep),
        SoftExpr::Var(name) if name == Y_RECLS => Lane::Row(env.recls.to_vec()),
        SoftExpr::Var(name) => Lane::Scalar(
            *env.rules
                .bindings()
                .get(name)
                .ok_or_else(|| PslError::UnboundVariable(name.clone()))?,
        ),
        SoftExpr::Not(a) => eval_row(a, env)?.map(|x| 1.0 - x),
        SoftExpr::And(a, b) => eval_row(a, env)?.zip(eval_row(b, env)?, |x, y| (x + y - 1.0).max(0.0)),
        SoftExpr::Or(a, b) => eval_row(a, env)?.zip(eval_row(b, env)?, |x, y| (x + y).min(1.0)),
    })
}

/// Grid points `0, step, 2·step, …` with 1 always included.
fn axis(step: f64) -> Vec<f64> {
    let n = (1.0 / step).floor() as usize;
    let mut pts: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(1.0)).collect();
    if *pts.last().unwrap() < 1.0 - 1e-12 {
        pts.push(1.0);
    } else {
        *pts.last_mut().unwrap() = 1.0;
    }
    pts
}

/// Best grid point of the rule sum at spacing `resolution` (in `(0, 0.1]`).
/// Ties go to the first point in scan order (`yKeep` ascending, then
/// `yRecls` ascending).
pub fn brute_force_solve(rules: &RuleSet, resolution: f64) -> Result<SolverOutput, PslError> {
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(PslError::InvalidResolution(resolution));
    }
    if let Some(v) = rules
        .free_vars()
        .iter()
        .find(|v| v.as_str() != Y_KEEP && v.as_str() != Y_RECLS)
    {
        return Err(PslError::UnsupportedFreeVars(vec![v.clone()]));
    }
    let grid = axis(resolution);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut total = vec![0.0; grid.len()];
    for &keep in &grid {
        total.iter_mut().for_each(|v| *v = 0.0);
        let env = RowEnv {
            rules,
            keep,
            recls: &grid,
        };
        for rule in rules.rules() {
            let w = rule.weight;
            match eval_row(&rule.expr, &env)? {
                Lane::Scalar(v) => total.iter_mut().for_each(|t| *t += w * v),
                Lane::Row(r) => total.iter_mut().zip(&r).for_each(|(t, v)| *t += w * v),
            }
        }
        for (j, &v) in total.iter().enumerate() {
            if v > best.0 {
                best = (v, keep, grid[j]);
            }
        }
    }
    let (objective, y_keep, y_recls) = best;
    let cell = Cell {
        constraints: vec![
            HalfPlane::new(1.0, 0.0, y_keep),
            HalfPlane::new(-1.0, 0.0, -y_keep),
            HalfPlane::new(0.0, 1.0, y_recls),
            HalfPlane::new(0.0, -1.0, -y_recls),
        ],
        vertices: vec![[y_keep, y_recls]],
    };
    Ok(SolverOutput {
        y_keep,
        y_recls,
        objective,
        maximizer: vec![MaximizerCell {
            cell,
            objective: Affine::constant(objective),
            face: vec![[y_keep, y_recls]],
        }],
    })
}

/// Upper bound on `|f(p) - f(q)| / ‖p - q‖_∞` for the rule sum: each
/// occurrence of a free variable contributes at most slope 1 to its rule.
pub fn lipschitz_bound(rules: &RuleSet) -> f64 {
    fn occurrences(e: &SoftExpr) -> usize {
        match e {
            SoftExpr::Const(_) => 0,
            SoftExpr::Var(n) => usize::from(n == Y_KEEP || n == Y_RECLS),
            SoftExpr::Not(a) => occurrences(a),
            SoftExpr::And(a, b) | SoftExpr::Or(a, b) => occurrences(a) + occurrences(b),
        }
    }
    rules
        .rules()
        .iter()
        .map(|r| r.weight * occurrences(&r.expr) as f64)
        .sum()
}
