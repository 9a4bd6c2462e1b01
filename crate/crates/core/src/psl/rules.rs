use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::SoftExpr;
use super::PslError;

pub const X_CONF: &str = "xConf";
pub const X_SIZE: &str = "xSize";
pub const X_SCENE: &str = "xScene";
pub const Y_KEEP: &str = "yKeep";
pub const Y_RECLS: &str = "yRecls";

/// The three keep/remove/reclassify rules in rule-DSL form, unit weights.
pub const GLRD_RULES_SOURCE: &str = "\
1 : xConf & xSize & xScene -> yKeep & !yRecls
1 : xConf & !(xSize & xScene) -> !yKeep | yRecls
1 : !xConf -> !yKeep
";

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub expr: SoftExpr,
    pub weight: f64,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {}", self.weight, self.expr)
    }
}

/// Weighted rules plus the split of their variables into free (optimized)
/// and bound (given) ones.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    rules: Vec<Rule>,
    free_vars: Vec<String>,
    bindings: BTreeMap<String, f64>,
}

impl RuleSet {
    pub fn new(
        rules: Vec<Rule>,
        free_vars: Vec<String>,
        bindings: BTreeMap<String, f64>,
    ) -> Result<Self, PslError> {
        for rule in &rules {
            if !(rule.weight >= 0.0 && rule.weight.is_finite()) {
                return Err(PslError::NegativeWeight(rule.weight));
            }
        }
        for (name, value) in &bindings {
            if !(0.0..=1.0).contains(value) {
                return Err(PslError::BindingOutOfRange {
                    name: name.clone(),
                    value: *value,
                });
            }
            if free_vars.contains(name) {
                return Err(PslError::InvalidRuleSet(format!(
                    "variable `{name}` is both free and bound"
                )));
            }
        }
        for rule in &rules {
            for name in rule.expr.variables() {
                if !free_vars.contains(&name) && !bindings.contains_key(&name) {
                    return Err(PslError::InvalidRuleSet(format!(
                        "variable `{name}` is neither free nor bound"
                    )));
                }
            }
        }
        Ok(Self {
            rules,
            free_vars,
            bindings,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn free_vars(&self) -> &[String] {
        &self.free_vars
    }

    pub fn bindings(&self) -> &BTreeMap<String, f64> {
        &self.bindings
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self, PslError> {
        let rules = self
            .rules
            .iter()
            .map(|r| Rule {
                expr: r.expr.clone(),
                weight: r.weight * factor,
            })
            .collect();
        Self::new(rules, self.free_vars.clone(), self.bindings.clone())
    }

    /// Weighted rule sum at a full assignment of the free variables.
    pub fn objective_at(&self, free: &[(&str, f64)]) -> Result<f64, PslError> {
        let mut env = self.bindings.clone();
        for (name, v) in free {
            env.insert((*name).to_string(), *v);
        }
        self.rules
            .iter()
            .try_fold(0.0, |acc, r| Ok(acc + r.weight * r.expr.eval(&env)?))
    }
}

/// Object-level constraint scores fed to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintVector {
    #[serde(rename = "xConf")]
    pub x_conf: f64,
    #[serde(rename = "xSize")]
    pub x_size: f64,
    #[serde(rename = "xScene")]
    pub x_scene: f64,
}

impl ConstraintVector {
    pub fn new(x_conf: f64, x_size: f64, x_scene: f64) -> Result<Self, PslError> {
        for (name, v) in [(X_CONF, x_conf), (X_SIZE, x_size), (X_SCENE, x_scene)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PslError::BindingOutOfRange {
                    name: name.to_string(),
                    value: v,
                });
            }
        }
        Ok(Self {
            x_conf,
            x_size,
            x_scene,
        })
    }

    pub fn bindings(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            (X_CONF.to_string(), self.x_conf),
            (X_SIZE.to_string(), self.x_size),
            (X_SCENE.to_string(), self.x_scene),
        ])
    }
}

/// Rule weights (α₁, α₂, α₃).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleWeights(pub [f64; 3]);

impl Default for RuleWeights {
    fn default() -> Self {
        RuleWeights([1.0, 1.0, 1.0])
    }
}

/// The keep/remove/reclassify rule set for one detected object.
///
/// * L1: `xConf ∧ xSize ∧ xScene → yKeep ∧ ¬yRecls`
/// * L2: `xConf ∧ ¬(xSize ∧ xScene) → ¬yKeep ∨ yRecls`
/// * L3: `¬xConf → ¬yKeep`
pub fn build_glrd_rules(x: &ConstraintVector, weights: RuleWeights) -> RuleSet {
    use SoftExpr as E;
    let v = E::var;
    let l1 = E::implies(
        E::and(E::and(v(X_CONF), v(X_SIZE)), v(X_SCENE)),
        E::and(v(Y_KEEP), E::not(v(Y_RECLS))),
    );
    let l2 = E::implies(
        E::and(v(X_CONF), E::not(E::and(v(X_SIZE), v(X_SCENE)))),
        E::or(E::not(v(Y_KEEP)), v(Y_RECLS)),
    );
    let l3 = E::implies(E::not(v(X_CONF)), E::not(v(Y_KEEP)));
    let rules = [l1, l2, l3]
        .into_iter()
        .zip(weights.0)
        .map(|(expr, weight)| Rule { expr, weight })
        .collect();
    RuleSet::new(
        rules,
        vec![Y_KEEP.to_string(), Y_RECLS.to_string()],
        x.bindings(),
    )
    .expect("constraint vector and weights are validated")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule_values(rs: &RuleSet, yk: f64, yr: f64) -> Vec<f64> {
        let mut env = rs.bindings().clone();
        env.insert(Y_KEEP.into(), yk);
        env.insert(Y_RECLS.into(), yr);
        rs.rules().iter().map(|r| r.expr.eval(&env).unwrap()).collect()
    }

    #[test]
    fn all_pass_satisfies_l2_l3_everywhere() {
        let rs = build_glrd_rules(&ConstraintVector::new(1.0, 1.0, 1.0).unwrap(), RuleWeights::default());
        for yk in [0.0, 0.3, 1.0] {
            for yr in [0.0, 0.6, 1.0] {
                let v = rule_values(&rs, yk, yr);
                assert_eq!(v[1], 1.0);
                assert_eq!(v[2], 1.0);
                // L1 reduces to max(yk - yr, 0)
                assert!((v[0] - (yk - yr).max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_confidence_l3_is_one_minus_keep() {
        let rs = build_glrd_rules(&ConstraintVector::new(0.0, 0.4, 0.8).unwrap(), RuleWeights::default());
        for yk in [0.0, 0.25, 0.9] {
            let v = rule_values(&rs, yk, 0.5);
            assert!((v[2] - (1.0 - yk)).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_pass_through() {
        let rs = build_glrd_rules(&ConstraintVector::new(0.5, 0.5, 0.5).unwrap(), RuleWeights::default());
        assert_eq!(rs.rules().len(), 3);
        assert!(rs.rules().iter().all(|r| r.weight == 1.0));
        let rs = build_glrd_rules(&ConstraintVector::new(0.5, 0.5, 0.5).unwrap(), RuleWeights([0.5, 2.0, 0.0]));
        let w: Vec<f64> = rs.rules().iter().map(|r| r.weight).collect();
        assert_eq!(w, vec![0.5, 2.0, 0.0]);
    }

    #[test]
    fn rule_set_rejects_bad_inputs() {
        let rule = Rule {
            expr: SoftExpr::var("a"),
            weight: 1.0,
        };
        assert!(RuleSet::new(vec![rule.clone()], vec![], BTreeMap::new()).is_err());
        assert!(RuleSet::new(
            vec![rule.clone()],
            vec!["a".into()],
            BTreeMap::from([("a".into(), 0.5)])
        )
        .is_err());
        assert!(RuleSet::new(
            vec![Rule { weight: -1.0, ..rule.clone() }],
            vec!["a".into()],
            BTreeMap::new()
        )
        .is_err());
        assert!(RuleSet::new(vec![rule], vec!["a".into()], BTreeMap::new()).is_ok());
    }

    #[test]
    fn constraint_vector_range() {
        assert!(ConstraintVector::new(1.1, 0.0, 0.0).is_err());
        assert!(ConstraintVector::new(0.0, -0.1, 0.0).is_err());
    }
}
