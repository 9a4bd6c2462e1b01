//! Exact maximization of a weighted rule sum over `(yKeep, yRecls) ∈ [0,1]²`.
//!
//! Every Łukasiewicz operator is a clamp of an affine combination of its
//! operands, so a rule is piecewise affine in the two free variables. The
//! solver walks each expression tree and splits convex cells of the unit
//! square along the switching line of every clamp it meets. On the final
//! cells the objective is affine, hence maximized at a cell vertex. The set
//! of global maximizers is the union of the maximizing faces of those cells;
//! a [`SelectionPolicy`] picks one point from it.

use serde::{Deserialize, Serialize};

use super::expr::SoftExpr;
use super::rules::{RuleSet, X_SCENE, Y_KEEP, Y_RECLS};
use super::PslError;
use crate::geometry::polygon::{self, HalfPlane, Point2};

/// Relative tolerance for "attains the maximum".
const OPT_TOL: f64 = 1e-9;
/// Tolerance for comparing coordinates during tie-breaking.
const COORD_TOL: f64 = 1e-9;
const MIN_CELL_AREA: f64 = 1e-18;

/// How to pick a point when the maximum is attained on a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    /// Largest `yKeep`, then smallest `yRecls`.
    MaxKeepMinRecls,
    /// Smallest `yKeep`, then smallest `yRecls`.
    MinKeep,
    /// `MinKeep` when `xScene` is bound to 0, otherwise `MaxKeepMinRecls`.
    #[default]
    SceneConservative,
}

impl std::str::FromStr for SelectionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "max-keep-min-recls" | "maxkeepminrecls" => Ok(Self::MaxKeepMinRecls),
            "min-keep" | "minkeep" => Ok(Self::MinKeep),
            "scene-conservative" | "sceneconservative" => Ok(Self::SceneConservative),
            other => Err(format!(
                "unknown selection policy `{other}` (expected max-keep-min-recls, min-keep or scene-conservative)"
            )),
        }
    }
}

impl std::fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::MaxKeepMinRecls => "max-keep-min-recls",
            Self::MinKeep => "min-keep",
            Self::SceneConservative => "scene-conservative",
        })
    }
}

/// `c0 + ck·yKeep + cr·yRecls`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub c0: f64,
    pub ck: f64,
    pub cr: f64,
}

impl Affine {
    pub const fn constant(c0: f64) -> Self {
        Self { c0, ck: 0.0, cr: 0.0 }
    }

    #[inline]
    pub fn at(&self, p: Point2) -> f64 {
        self.c0 + self.ck * p[0] + self.cr * p[1]
    }

    fn add(self, o: Affine) -> Affine {
        Affine {
            c0: self.c0 + o.c0,
            ck: self.ck + o.ck,
            cr: self.cr + o.cr,
        }
    }

    fn scale(self, s: f64) -> Affine {
        Affine {
            c0: self.c0 * s,
            ck: self.ck * s,
            cr: self.cr * s,
        }
    }

    fn is_constant(&self) -> bool {
        self.ck == 0.0 && self.cr == 0.0
    }

    /// Half-plane where `self <= bound`.
    fn le(&self, bound: f64) -> HalfPlane {
        HalfPlane::new(self.ck, self.cr, bound - self.c0)
    }
}

/// A convex cell of the unit square described both by its bounding
/// inequalities and its vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Inequalities `a·yKeep + b·yRecls <= c`.
    pub constraints: Vec<HalfPlane>,
    /// Counter-clockwise vertices as `[yKeep, yRecls]`.
    pub vertices: Vec<Point2>,
}

impl Cell {
    fn unit_square() -> Self {
        Cell {
            constraints: vec![
                HalfPlane::new(-1.0, 0.0, 0.0),
                HalfPlane::new(1.0, 0.0, 1.0),
                HalfPlane::new(0.0, -1.0, 0.0),
                HalfPlane::new(0.0, 1.0, 1.0),
            ],
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        }
    }

    fn clipped(&self, hp: HalfPlane) -> Option<Cell> {
        let vertices = polygon::clip_halfplane(&self.vertices, &hp);
        if vertices.len() < 3 || polygon::area(&vertices) <= MIN_CELL_AREA {
            return None;
        }
        let mut constraints = self.constraints.clone();
        constraints.push(hp);
        Some(Cell {
            constraints,
            vertices,
        })
    }

    /// Whether `p` satisfies every inequality up to `tol`.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.constraints.iter().all(|hp| hp.contains(p, tol))
    }
}

/// A region of global maximizers: a face of one affine cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizerCell {
    pub cell: Cell,
    /// Objective on the cell; it equals the optimum on `face`.
    pub objective: Affine,
    /// Vertices of the maximizing face (one point, a segment, or the cell).
    pub face: Vec<Point2>,
}

impl MaximizerCell {
    /// Membership in the maximizing face: inside the cell and attaining the
    /// optimum value.
    pub fn contains(&self, p: Point2, optimum: f64, tol: f64) -> bool {
        self.cell.contains(p, tol) && self.objective.at(p) >= optimum - tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutput {
    #[serde(rename = "yKeep")]
    pub y_keep: f64,
    #[serde(rename = "yRecls")]
    pub y_recls: f64,
    pub objective: f64,
    #[serde(rename = "maximizer")]
    pub maximizer: Vec<MaximizerCell>,
}

impl SolverOutput {
    pub fn point(&self) -> Point2 {
        [self.y_keep, self.y_recls]
    }

    /// Whether the returned point lies in the reported maximizer set.
    pub fn point_in_maximizer(&self, tol: f64) -> bool {
        self.maximizer
            .iter()
            .any(|m| m.contains(self.point(), self.objective, tol))
    }
}

/// Resolves a leaf of the expression tree to an affine function.
struct FreeSlots<'a> {
    rules: &'a RuleSet,
}

impl FreeSlots<'_> {
    fn leaf(&self, name: &str) -> Result<Affine, PslError> {
        match name {
            Y_KEEP => Ok(Affine { c0: 0.0, ck: 1.0, cr: 0.0 }),
            Y_RECLS => Ok(Affine { c0: 0.0, ck: 0.0, cr: 1.0 }),
            _ => self
                .rules
                .bindings()
                .get(name)
                .map(|v| Affine::constant(*v))
                .ok_or_else(|| PslError::UnboundVariable(name.to_string())),
        }
    }
}

/// Partitions `cell` into sub-cells on which `expr` is affine.
fn decompose(
    expr: &SoftExpr,
    cell: Cell,
    slots: &FreeSlots<'_>,
) -> Result<Vec<(Cell, Affine)>, PslError> {
    Ok(match expr {
        SoftExpr::Const(v) => vec![(cell, Affine::constant(*v))],
        SoftExpr::Var(name) => vec![(cell, slots.leaf(name)?)],
        SoftExpr::Not(e) => decompose(e, cell, slots)?
            .into_iter()
            .map(|(c, f)| (c, Affine::constant(1.0).add(f.scale(-1.0))))
            .collect(),
        SoftExpr::And(a, b) => {
            // max(fa + fb - 1, 0): split on fa + fb - 1 = 0
            let mut out = Vec::new();
            for (ca, fa) in decompose(a, cell, slots)? {
                for (cab, fb) in decompose(b, ca, slots)? {
                    let g = fa.add(fb).add(Affine::constant(-1.0));
                    split_clamp(cab, g, 0.0, Affine::constant(0.0), Bound::Lower, &mut out);
                }
            }
            out
        }
        SoftExpr::Or(a, b) => {
            // min(fa + fb, 1): split on fa + fb = 1
            let mut out = Vec::new();
            for (ca, fa) in decompose(a, cell, slots)? {
                for (cab, fb) in decompose(b, ca, slots)? {
                    let g = fa.add(fb);
                    split_clamp(cab, g, 1.0, Affine::constant(1.0), Bound::Upper, &mut out);
                }
            }
            out
        }
    })
}

enum Bound {
    /// value = max(g, level)
    Lower,
    /// value = min(g, level)
    Upper,
}

fn split_clamp(
    cell: Cell,
    g: Affine,
    level: f64,
    clamped: Affine,
    bound: Bound,
    out: &mut Vec<(Cell, Affine)>,
) {
    let (lo_val, hi_val) = match bound {
        Bound::Lower => (clamped, g),
        Bound::Upper => (g, clamped),
    };
    if g.is_constant() {
        out.push((cell, if g.c0 <= level { lo_val } else { hi_val }));
        return;
    }
    let min = cell.vertices.iter().map(|p| g.at(*p)).fold(f64::INFINITY, f64::min);
    let max = cell.vertices.iter().map(|p| g.at(*p)).fold(f64::NEG_INFINITY, f64::max);
    if max <= level {
        out.push((cell, lo_val));
    } else if min >= level {
        out.push((cell, hi_val));
    } else {
        let below = g.le(level);
        if let Some(c) = cell.clipped(below) {
            out.push((c, lo_val));
        }
        if let Some(c) = cell.clipped(below.flipped()) {
            out.push((c, hi_val));
        }
    }
}

/// Affine pieces of the weighted rule sum over the unit square.
pub fn objective_pieces(rules: &RuleSet) -> Result<Vec<(Cell, Affine)>, PslError> {
    check_free_vars(rules)?;
    let slots = FreeSlots { rules };
    let mut pieces = vec![(Cell::unit_square(), Affine::constant(0.0))];
    for rule in rules.rules() {
        if rule.weight == 0.0 {
            continue;
        }
        let mut next = Vec::with_capacity(pieces.len());
        for (cell, acc) in pieces {
            for (c, f) in decompose(&rule.expr, cell, &slots)? {
                next.push((c, acc.add(f.scale(rule.weight))));
            }
        }
        pieces = next;
    }
    Ok(pieces)
}

fn check_free_vars(rules: &RuleSet) -> Result<(), PslError> {
    let free = rules.free_vars();
    let ok = free.len() == 2 && free.iter().any(|v| v == Y_KEEP) && free.iter().any(|v| v == Y_RECLS);
    if ok {
        Ok(())
    } else {
        Err(PslError::UnsupportedFreeVars(free.to_vec()))
    }
}

/// Maximizes the weighted rule sum and selects a maximizer per `policy`.
pub fn solve(rules: &RuleSet, policy: SelectionPolicy) -> Result<SolverOutput, PslError> {
    let pieces = objective_pieces(rules)?;

    let optimum = pieces
        .iter()
        .flat_map(|(cell, f)| cell.vertices.iter().map(move |p| f.at(*p)))
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = OPT_TOL * optimum.abs().max(1.0);

    let mut maximizer = Vec::new();
    for (cell, f) in pieces {
        let face: Vec<Point2> = cell
            .vertices
            .iter()
            .copied()
            .filter(|p| f.at(*p) >= optimum - tol)
            .collect();
        if !face.is_empty() {
            maximizer.push(MaximizerCell {
                cell,
                objective: f,
                face,
            });
        }
    }

    let policy = resolve_policy(policy, rules);
    let candidates = maximizer.iter().flat_map(|m| m.face.iter().copied());
    let [y_keep, y_recls] = select(candidates, policy);
    let objective = rules.objective_at(&[(Y_KEEP, y_keep), (Y_RECLS, y_recls)])?;

    Ok(SolverOutput {
        y_keep,
        y_recls,
        objective,
        maximizer,
    })
}

fn resolve_policy(policy: SelectionPolicy, rules: &RuleSet) -> SelectionPolicy {
    match policy {
        SelectionPolicy::SceneConservative => match rules.bindings().get(X_SCENE) {
            Some(v) if *v == 0.0 => SelectionPolicy::MinKeep,
            _ => SelectionPolicy::MaxKeepMinRecls,
        },
        other => other,
    }
}

/// Lexicographic choice among candidate points. The lexicographic optimum of
/// a union of convex polygons is attained at a vertex, so checking face
/// vertices is enough.
fn select(candidates: impl Iterator<Item = Point2>, policy: SelectionPolicy) -> Point2 {
    let pts: Vec<Point2> = candidates.collect();
    assert!(!pts.is_empty(), "the maximizer set is never empty");
    let keep_target = match policy {
        SelectionPolicy::MinKeep => pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        _ => pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
    };
    let best = pts
        .iter()
        .filter(|p| (p[0] - keep_target).abs() <= COORD_TOL)
        .min_by(|a, b| a[1].total_cmp(&b[1]))
        .copied()
        .expect("target attained by some candidate");
    best.map(|v| v.clamp(0.0, 1.0))
}
