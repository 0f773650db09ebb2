use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::encoder::Valuation;
use crate::rational::q;
use crate::stl::{parse_formula, predicates, StlFormula};

/// Predicates of `(lhs) U[0,1] (rhs)` in order of appearance.
fn preds(lhs: &str, rhs: &str) -> Vec<Predicate> {
    let phi: StlFormula = parse_formula(&format!("({lhs}) U[0,1] ({rhs})")).unwrap();
    predicates(&phi)
}

fn point(xs: &[(&str, &str)]) -> BTreeMap<String, Rational> {
    xs.iter().map(|(k, v)| (k.to_string(), q(v))).collect()
}

fn request(ps: Vec<Predicate>, at: &[(&str, &str)], fix: &[&str]) -> ModificationRequest {
    let pt = point(at);
    let action = Valuation(
        ps.iter()
            .map(|p| (p.id.clone(), p.holds_for(&p.expr.eval(&pt).unwrap())))
            .collect(),
    );
    ModificationRequest {
        point: pt,
        action,
        fix: fix.iter().map(|s| s.to_string()).collect(),
        predicates: ps,
    }
}

fn eps() -> Rational {
    q("1/1000000")
}

#[test]
fn threshold_clamp() {
    let req = request(preds("x1 >= 0.7", "x2 >= 0.5"), &[("x1", "0.4"), ("x2", "0.9")], &["p1"]);
    let r = modify(&req, &eps()).unwrap();
    assert_eq!(r.vars, ["x1"]);
    assert_eq!(r.new, [q("0.7")]);
    assert_eq!(r.distance_squared(), &q("0.09"));
    assert!((r.distance - 0.3).abs() < 1e-12);
}

#[test]
fn equality_projection() {
    let req = request(preds("v <= 30", "v == 0"), &[("v", "12")], &["p2"]);
    let r = modify(&req, &eps()).unwrap();
    assert_eq!(r.new, [q("0")]);
    assert!((r.distance - 12.0).abs() < 1e-12);
}

#[test]
fn strict_and_negated_targets_use_the_margin() {
    let req = request(preds("x > 0.7", "y > 0"), &[("x", "0.4"), ("y", "1")], &["p1"]);
    assert_eq!(modify(&req, &eps()).unwrap().new, [&q("0.7") + &eps()]);

    let req = request(preds("x >= 0.7", "y > 0"), &[("x", "0.9"), ("y", "1")], &["p1"]);
    assert_eq!(modify(&req, &eps()).unwrap().new, [&q("0.7") - &eps()]);

    let req = request(preds("v == 0", "y > 0"), &[("v", "0"), ("y", "1")], &["p1"]);
    assert_eq!(modify(&req, &eps()).unwrap().new[0].abs(), eps());
}

#[test]
fn preserved_constraint_binds() {
    // Project onto x + y >= 1 while keeping x <= 0.
    let req = request(preds("x + y >= 1", "x <= 0"), &[("x", "-0.2"), ("y", "0.1")], &["p1"]);
    let r = modify(&req, &eps()).unwrap();
    assert_eq!(r.new, [q("0"), q("1")]);
}

#[test]
fn unrelated_variables_are_untouched() {
    let req = request(
        preds("x >= 1 && z >= 5", "y >= 2"),
        &[("x", "0"), ("y", "0"), ("z", "0")],
        &["p1"],
    );
    let r = modify(&req, &eps()).unwrap();
    assert_eq!(r.vars, ["x"]);
    let mut pt = req.point.clone();
    r.apply(&mut pt);
    assert_eq!(pt, point(&[("x", "1"), ("y", "0"), ("z", "0")]));
}

#[test]
fn joint_fix_over_shared_variables() {
    let req = request(preds("x + y >= 1", "x - y >= 1"), &[("x", "0"), ("y", "0")], &["p1", "p2"]);
    assert_eq!(modify(&req, &eps()).unwrap().new, [q("1"), q("0")]);
}

#[test]
fn errors() {
    let req = request(preds("x >= 1", "x <= 0"), &[("x", "-1")], &["p1"]);
    assert!(matches!(modify(&req, &eps()), Err(ModifyError::Infeasible { .. })));
    let req = request(preds("x >= 1", "y <= 0"), &[("x", "0"), ("y", "0")], &[]);
    assert_eq!(modify(&req, &eps()), Err(ModifyError::NothingToFix));
    let mut req = request(preds("x >= 1", "y <= 0"), &[("x", "0"), ("y", "0")], &["p1"]);
    req.action.0.remove("p2");
    req.predicates[1] = Predicate::at_least("p2", "x", q("3"));
    assert_eq!(modify(&req, &eps()), Err(ModifyError::MissingPredicate("p2".into())));
}

#[test]
fn halfspace_projection() {
    let phi = preds("x + y >= 1", "x >= 0");
    let out = project_halfspace(&point(&[("x", "0"), ("y", "0")]), &phi[0].expr, &Rational::zero()).unwrap();
    assert_eq!(out, point(&[("x", "0.5"), ("y", "0.5")]));
    let inside = point(&[("x", "3"), ("y", "0")]);
    assert_eq!(project_halfspace(&inside, &phi[0].expr, &Rational::zero()).unwrap(), inside);
    let strict = project_halfspace(&point(&[("x", "0"), ("y", "0")]), &phi[0].expr, &q("1")).unwrap();
    assert_eq!(strict, point(&[("x", "1"), ("y", "1")]));
}

#[test]
fn single_constraint_matches_halfspace_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let (a, b, c) = (rng.gen_range(-5..=5), rng.gen_range(1..=5), rng.gen_range(-5..=5));
        let ps = preds(&format!("{a}*x + {b}*y >= {c}"), "x >= 100");
        let x = rng.gen_range(-30..30).to_string();
        let y = rng.gen_range(-30..30).to_string();
        let req = request(ps.clone(), &[("x", &x), ("y", &y)], &["p1"]);
        if req.action.get("p1") == Some(true) {
            continue;
        }
        let r = modify(&req, &eps()).unwrap();
        let h = project_halfspace(&req.point, &ps[0].expr, &Rational::zero()).unwrap();
        let vals: Vec<Rational> = r.vars.iter().map(|v| h[v].clone()).collect();
        assert_eq!(r.new, vals);
    }
}

#[test]
fn distance_grows_with_margin() {
    let ps = preds("x + 2*y > 1", "x - y < 0");
    let req = request(ps, &[("x", "0"), ("y", "0")], &["p1"]);
    let mut last = Rational::zero();
    for e in ["0", "1/1000000", "1/1000", "1/10", "1/2"] {
        let r = modify(&req, &q(e)).unwrap();
        assert!(r.distance_squared() >= &last);
        last = r.distance_squared().clone();
    }
}

fn linear(a: i64, b: i64) -> String {
    match (a, b) {
        (0, b) => format!("{b}*y"),
        (a, 0) => format!("{a}*x"),
        (a, b) if b < 0 => format!("{a}*x - {}*y", -b),
        (a, b) => format!("{a}*x + {b}*y"),
    }
}

/// Corrected valuation holds, and no nearby random feasible point is closer.
#[test]
fn random_instances_are_feasible_and_locally_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut solved = 0;
    while solved < 150 {
        let mut lits = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let (a, b, c) = (rng.gen_range(-3..=3), rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            if a == 0 && b == 0 {
                continue;
            }
            let op = [">=", ">", "<=", "<"][rng.gen_range(0..4)];
            lits.push(format!("{} {op} {c}", linear(a, b)));
        }
        if lits.len() < 2 {
            continue;
        }
        let ps = preds(&lits[0], &lits[1..].join(" && "));
        let at = [("x", rng.gen_range(-20..20).to_string()), ("y", rng.gen_range(-20..20).to_string())];
        let at: Vec<(&str, &str)> = at.iter().map(|(k, v)| (*k, v.as_str())).collect();
        let req = request(ps.clone(), &at, &["p1"]);
        let Ok(r) = modify(&req, &eps()) else { continue };
        solved += 1;
        let mut pt = req.point.clone();
        r.apply(&mut pt);
        let want: BTreeSet<String> = req.fix.clone();
        for p in &ps {
            let truth = p.holds_for(&p.expr.eval(&pt).unwrap());
            let expected = req.action.get(&p.id).unwrap() != want.contains(&p.id);
            if want.contains(&p.id) || p.support().any(|v| r.vars.iter().any(|w| w == v)) {
                assert_eq!(truth, expected, "{} at {pt:?}", p);
            }
        }
        let d = r.distance;
        for _ in 0..200 {
            let mut cand = req.point.clone();
            for (v, x) in r.vars.iter().zip(&r.old) {
                cand.insert(v.clone(), x + &Rational::new(rng.gen_range(-3000..3000), 1000));
            }
            let ok = ps.iter().all(|p| {
                let mu = p.expr.eval(&cand).unwrap();
                p.holds_for(&mu) == (req.action.get(&p.id).unwrap() != want.contains(&p.id))
            });
            if ok {
                let dc: f64 = r
                    .vars
                    .iter()
                    .zip(&r.old)
                    .map(|(v, x)| (cand[v].to_f64() - x.to_f64()).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(dc >= d - 1e-5, "closer point {cand:?} ({dc} < {d})");
            }
        }
    }
}
