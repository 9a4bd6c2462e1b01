use glrd::psl::{
    brute_force_solve, build_glrd_rules, decide, luk_and, luk_implies, luk_not, luk_or, parse_rules,
    print_rules, solve, ConstraintVector, Decision, PslError, RuleSet, RuleWeights, SelectionPolicy,
    GLRD_RULES_SOURCE, X_CONF, X_SCENE, X_SIZE, Y_KEEP, Y_RECLS,
};
use proptest::prelude::*;

fn rules(x: [f64; 3], w: [f64; 3]) -> RuleSet {
    build_glrd_rules(&ConstraintVector::new(x[0], x[1], x[2]).unwrap(), RuleWeights(w))
}

fn objective(rs: &RuleSet, k: f64, r: f64) -> f64 {
    rs.objective_at(&[(Y_KEEP, k), (Y_RECLS, r)]).unwrap()
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn weight() -> impl Strategy<Value = f64> {
    0.0..=2.0f64
}

proptest! {
    #[test]
    fn solver_is_a_global_maximum(
        x in [unit(), unit(), unit()],
        w in [weight(), weight(), weight()],
        probes in prop::collection::vec((unit(), unit()), 50),
    ) {
        let rs = rules(x, w);
        let sol = solve(&rs, SelectionPolicy::MaxKeepMinRecls).unwrap();
        prop_assert!((objective(&rs, sol.y_keep, sol.y_recls) - sol.objective).abs() < 1e-9);
        for (k, r) in probes {
            prop_assert!(objective(&rs, k, r) <= sol.objective + 1e-9);
        }
        prop_assert!(sol.point_in_maximizer(1e-9));
    }

    #[test]
    fn optimum_is_weight_sum(x in [unit(), unit(), unit()], w in [weight(), weight(), weight()]) {
        let sol = solve(&rules(x, w), SelectionPolicy::SceneConservative).unwrap();
        prop_assert!((sol.objective - w.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn closed_form_when_scene_fits(xc in unit(), xs in unit()) {
        let sol = solve(&rules([xc, xs, 1.0], [1.0; 3]), SelectionPolicy::MaxKeepMinRecls).unwrap();
        prop_assert!((sol.y_keep - xc).abs() < 1e-9);
        prop_assert!((sol.y_recls - (2.0 * xc - 1.0 - xs).max(0.0)).abs() < 1e-9);
    }

    #[test]
    fn argmax_invariant_under_weight_scaling(
        x in [unit(), unit(), unit()],
        w in [weight(), weight(), weight()],
        f in 0.1..10.0f64,
    ) {
        let rs = rules(x, w);
        let a = solve(&rs, SelectionPolicy::MaxKeepMinRecls).unwrap();
        let b = solve(&rs.with_scaled_weights(f).unwrap(), SelectionPolicy::MaxKeepMinRecls).unwrap();
        prop_assert!((a.y_keep - b.y_keep).abs() < 1e-9);
        prop_assert!((a.y_recls - b.y_recls).abs() < 1e-9);
        prop_assert!((a.objective * f - b.objective).abs() < 1e-8);
    }

    #[test]
    fn grid_oracle_never_beats_solver(x in [unit(), unit(), unit()], w in [weight(), weight(), weight()]) {
        let rs = rules(x, w);
        let exact = solve(&rs, SelectionPolicy::default()).unwrap();
        let grid = brute_force_solve(&rs, 0.01).unwrap();
        prop_assert!(grid.objective <= exact.objective + 1e-9);
        prop_assert!(exact.objective - grid.objective <= 0.01 + 1e-9);
    }

    #[test]
    fn connectives_stay_in_unit_interval(x in unit(), y in unit()) {
        for v in [luk_and(x, y), luk_or(x, y), luk_not(x), luk_implies(x, y)] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(luk_and(x, y), luk_and(y, x));
        prop_assert_eq!(luk_or(x, y), luk_or(y, x));
    }
}

#[test]
fn scene_misfit_removes_under_default_policy() {
    let sol = solve(&rules([0.8, 0.9, 0.0], [1.0; 3]), SelectionPolicy::SceneConservative).unwrap();
    assert_eq!(decide(&sol, 0.01, 0.2), Decision::Remove);
    let sol = solve(&rules([0.8, 0.9, 0.0], [1.0; 3]), SelectionPolicy::MaxKeepMinRecls).unwrap();
    assert_ne!(decide(&sol, 0.01, 0.2), Decision::Remove);
}

#[test]
fn low_confidence_is_removed() {
    let sol = solve(&rules([0.0, 1.0, 1.0], [1.0; 3]), SelectionPolicy::default()).unwrap();
    assert_eq!(decide(&sol, 0.01, 0.2), Decision::Remove);
}

#[test]
fn size_misfit_reclassifies() {
    let sol = solve(&rules([0.9, 0.5419, 1.0], [1.0; 3]), SelectionPolicy::default()).unwrap();
    assert!((sol.y_recls - 0.2581).abs() < 1e-9);
    assert_eq!(decide(&sol, 0.01, 0.2), Decision::Reclassify);
}

#[test]
fn dsl_round_trips_the_rule_set() {
    let parsed: Vec<_> = parse_rules(GLRD_RULES_SOURCE).unwrap().into_iter().map(|p| p.rule).collect();
    assert_eq!(parsed.len(), 3);
    let built = rules([0.5, 0.5, 0.5], [1.0; 3]);
    assert_eq!(parsed, built.rules());
    let reparsed: Vec<_> = parse_rules(&print_rules(&parsed)).unwrap().into_iter().map(|p| p.rule).collect();
    assert_eq!(parsed, reparsed);
}

#[test]
fn dsl_rule_set_matches_builder() {
    let x = ConstraintVector::new(0.7, 0.3, 1.0).unwrap();
    let rs = RuleSet::from_source(GLRD_RULES_SOURCE, vec![Y_KEEP.into(), Y_RECLS.into()], x.bindings()).unwrap();
    let a = solve(&rs, SelectionPolicy::default()).unwrap();
    let b = solve(&build_glrd_rules(&x, RuleWeights::default()), SelectionPolicy::default()).unwrap();
    assert_eq!((a.y_keep, a.y_recls, a.objective), (b.y_keep, b.y_recls, b.objective));
}

#[test]
fn dsl_errors_carry_positions() {
    let err = parse_rules("1 : a & b -> c\n1 : a & -> c").unwrap_err();
    assert!(err.to_string().starts_with("2:9:"), "{err}");
}

#[test]
fn rejects_bad_inputs() {
    assert!(matches!(ConstraintVector::new(1.2, 0.0, 0.0), Err(PslError::BindingOutOfRange { .. })));
    let x = ConstraintVector::new(0.5, 0.5, 0.5).unwrap();
    assert!(build_glrd_rules(&x, RuleWeights::default()).with_scaled_weights(-1.0).is_err());
    assert!(brute_force_solve(&rules([0.5; 3], [1.0; 3]), 0.0).is_err());
    let mut names = vec![X_CONF, X_SIZE, X_SCENE];
    names.sort();
    assert_eq!(x.bindings().keys().map(String::as_str).collect::<Vec<_>>(), names);
}
