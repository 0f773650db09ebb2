//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stl_enforce::bench::{bench_stopping, linear_fit};
use stl_enforce::encoder::sign_encode;
use stl_enforce::enforcer::{enforce, EnforceError};
use stl_enforce::modifier::{modify, ModificationRequest, ModifyError};
use stl_enforce::monitor::satisfies;
use stl_enforce::rational::{q, Rational};
use stl_enforce::scenario::{random_signal, running_example_formula, running_example_signal, uniform, Scenario};
use stl_enforce::signal::Signal;
use stl_enforce::stl::{parse_formula, predicates, relevant_points, AffineExpr, Comparison, Predicate, StlFormula};
use stl_enforce::transducer::{
    build_release, build_until, check_determinism, check_self_correction, compile, run, TimedTransducer,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn eps() -> Rational {
    q("1/1000000")
}

fn crit_encoding() -> Outcome {
    let start = Instant::now();
    let w = sign_encode(&running_example_signal(), &running_example_formula()).unwrap();
    let elapsed = start.elapsed();
    let times: Vec<String> = w.times().iter().map(|t| t.to_string()).collect();
    let want_times = ["0", "0.5", "1.2", "2.2", "3.2", "4", "4.5", "4.7", "5"];
    let want_bits = [
        (false, true),
        (true, true),
        (true, false),
        (false, false),
        (true, false),
        (true, false),
        (false, false),
        (false, true),
        (false, true),
    ];
    let bits: Vec<(bool, bool)> = w
        .events
        .iter()
        .map(|e| (e.action.get("p1").unwrap(), e.action.get("p2").unwrap()))
        .collect();
    let ok = times == want_times && bits == want_bits && elapsed < Duration::from_secs(1);
    outcome(ok, format!("{} events at {{{}}} in {elapsed:.2?}", w.len(), times.join(", ")))
}

fn crit_trace() -> Outcome {
    let w = sign_encode(&running_example_signal(), &running_example_formula()).unwrap();
    let ps = predicates(&running_example_formula());
    let a = build_until(&ps[0], &ps[1], &stl_enforce::stl::Interval::new(q("4"), q("5")).unwrap()).unwrap();
    let r = run(&a, &w).unwrap();
    let rows: Vec<String> = r
        .steps
        .iter()
        .map(|s| format!("{} {} {} {}", s.from, s.time, s.to, s.output))
        .collect();
    let want = [
        "(l0,0) 0 (l1,0) F{p1}",
        "(l1,0) 0.5 (l1,0.5) T",
        "(l1,0.5) 1.2 (l1,1.2) T",
        "(l1,1.2) 2.2 (l1,2.2) F{p1}",
        "(l1,2.2) 3.2 (l1,3.2) T",
        "(l1,3.2) 4 (l3,4) T",
        "(l3,4) 4.5 (l3,4.5) F{p1}",
        "(l3,4.5) 4.7 (l2,4.7) F{p1}",
        "(l2,4.7) 5 (l2,5) T",
    ];
    let ok = rows == want && r.accepted;
    let first_bad = rows.iter().zip(want).position(|(a, b)| a != b);
    outcome(
        ok,
        match first_bad {
            None => format!("{} rows match, accepted={}", rows.len(), r.accepted),
            Some(i) => format!("row {i}: got `{}`", rows[i]),
        },
    )
}

fn crit_relevant_points() -> Outcome {
    let rp: Vec<String> = relevant_points(&running_example_formula())
        .iter()
        .map(|t| t.to_string())
        .collect();
    outcome(rp == ["0", "4", "5"], format!("rp = {{{}}}", rp.join(", ")))
}

fn random_literal(rng: &mut ChaCha8Rng, vars: &[&str]) -> String {
    let v = vars[rng.gen_range(0..vars.len())];
    let op = [">=", ">", "<=", "<"][rng.gen_range(0..4)];
    format!("{v} {op} {}", uniform(rng, 0.2, 0.8))
}

fn random_operand(rng: &mut ChaCha8Rng, vars: &[&str]) -> String {
    match rng.gen_range(0..6) {
        0 => format!("{} && {}", random_literal(rng, vars), random_literal(rng, vars)),
        1 => format!("{} || !({})", random_literal(rng, vars), random_literal(rng, vars)),
        2 => "true".to_string(),
        _ => random_literal(rng, vars),
    }
}

fn random_term(rng: &mut ChaCha8Rng, op: &str, vars: &[&str]) -> String {
    let halves = |rng: &mut ChaCha8Rng, hi: i64| Rational::new(rng.gen_range(0..=hi), 2);
    let t1 = halves(rng, 6);
    let t2 = &t1 + &halves(rng, 6);
    let left = random_operand(rng, vars);
    let right = loop {
        let r = random_operand(rng, vars);
        if r != "true" {
            break r;
        }
    };
    format!("({left}) {op}[{t1},{t2}] ({right})")
}

/// Share of random cases where the transducer run (all `⊤` and accepted)
/// agrees with the monitor.
fn agreement(rng: &mut ChaCha8Rng, cases: usize, make: impl Fn(&mut ChaCha8Rng) -> String) -> (usize, usize, Option<String>) {
    let mut agree = 0;
    let mut satisfied = 0;
    let mut first_miss = None;
    for _ in 0..cases {
        // Operands that no correction can satisfy are rejected at build time.
        let (text, phi, a) = loop {
            let text = make(rng);
            let phi = parse_formula(&text).unwrap();
            if let Ok(a) = compile(&phi) {
                break (text, phi, a);
            }
        };
        let segments = rng.gen_range(2..10);
        let s = random_signal(rng, &["x", "y", "z"], 7, segments, (0.0, 1.0));
        let r = run(&a, &sign_encode(&s, &phi).unwrap()).unwrap();
        let by_run = r.all_top() && r.accepted;
        let by_monitor = satisfies(&s, &phi).unwrap().satisfied;
        satisfied += usize::from(by_monitor);
        if by_run == by_monitor {
            agree += 1;
        } else if first_miss.is_none() {
            first_miss = Some(format!("{text} on {:?}", s.to_csv()));
        }
    }
    (agree, satisfied, first_miss)
}

fn crit_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cases = 1000;
    let kinds: [(&str, Box<dyn Fn(&mut ChaCha8Rng) -> String>); 4] = [
        ("until", Box::new(|r| random_term(r, "U", &["x", "y"]))),
        ("release", Box::new(|r| random_term(r, "R", &["x", "y"]))),
        (
            "and",
            Box::new(|r| {
                let (o1, o2) = (["U", "R"][r.gen_range(0..2)], ["U", "R"][r.gen_range(0..2)]);
                format!("{} and {}", random_term(r, o1, &["x", "y"]), random_term(r, o2, &["y", "z"]))
            }),
        ),
        (
            "or",
            Box::new(|r| {
                let (o1, o2) = (["U", "R"][r.gen_range(0..2)], ["U", "R"][r.gen_range(0..2)]);
                format!("{} or {}", random_term(r, o1, &["x", "y"]), random_term(r, o2, &["y", "z"]))
            }),
        ),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, make) in &kinds {
        let (agree, sat, miss) = agreement(&mut rng, cases, make);
        ok &= agree == cases;
        parts.push(format!("{name} {agree}/{cases} ({sat} satisfied)"));
        if let Some(m) = miss {
            parts.push(format!("first mismatch: {m}"));
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    outcome(ok, format!("{}; {elapsed:.1?}", parts.join(", ")))
}

struct Corpus {
    violating: Vec<(Scenario, Signal)>,
    satisfying: Vec<(Scenario, Signal)>,
}

fn corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violating = Vec::new();
    let mut satisfying = Vec::new();
    for k in 0..510 {
        let sc = Scenario::ALL[k % 3];
        violating.push((sc, sc.violating(&mut rng)));
        satisfying.push((sc, sc.satisfying(&mut rng)));
    }
    Corpus { violating, satisfying }
}

fn crit_soundness(c: &Corpus) -> Outcome {
    let (mut sound, mut infeasible, mut raw_ok, mut other) = (0, 0, 0, 0);
    for (sc, s) in &c.violating {
        let phi = sc.formula();
        raw_ok += usize::from(satisfies(s, &phi).unwrap().satisfied);
        match enforce(s, &phi, &eps()) {
            Ok(e) => sound += usize::from(satisfies(&e.signal, &phi).unwrap().satisfied),
            Err(EnforceError::Modify { source: ModifyError::Infeasible { .. }, .. }) => infeasible += 1,
            Err(_) => other += 1,
        }
    }
    let n = c.violating.len();
    outcome(
        sound == n && infeasible == 0 && other == 0 && raw_ok == 0,
        format!("{sound}/{n} enforced signals satisfy; {infeasible} infeasible; {other} errors; {raw_ok} inputs already satisfied"),
    )
}

fn crit_transparency(c: &Corpus) -> Outcome {
    let (mut same, mut raw_bad) = (0, 0);
    for (sc, s) in &c.satisfying {
        let phi = sc.formula();
        raw_bad += usize::from(!satisfies(s, &phi).unwrap().satisfied);
        if enforce(s, &phi, &eps()).map(|e| &e.signal == s).unwrap_or(false) {
            same += 1;
        }
    }
    let n = c.satisfying.len();
    outcome(
        same == n && raw_bad == 0,
        format!("{same}/{n} outputs identical to input; {raw_bad} inputs violated"),
    )
}

fn crit_idempotence(c: &Corpus) -> Outcome {
    let mut same = 0;
    let all: Vec<&(Scenario, Signal)> = c.violating.iter().chain(&c.satisfying).collect();
    for (sc, s) in &all {
        let phi = sc.formula();
        let Ok(once) = enforce(s, &phi, &eps()) else { continue };
        if enforce(&once.signal, &phi, &eps()).map(|e| e.signal == once.signal).unwrap_or(false) {
            same += 1;
        }
    }
    outcome(same == all.len(), format!("{same}/{} fixed points", all.len()))
}

struct Instance {
    point: (f64, f64),
    /// Required `a*x + b*y + c >= 0`, as `(a, b, c)`.
    halfspaces: Vec<(f64, f64, f64)>,
}

/// Grid search over x in steps of 1e-3; for each column the feasible y set is
/// an interval, so the closest y is a clamp.
fn grid_distance(inst: &Instance, radius: f64) -> Option<f64> {
    let (x0, y0) = inst.point;
    let step = 1e-3;
    let n = (radius / step).ceil() as i64;
    let mut best: Option<f64> = None;
    for i in -n..=n {
        let x = x0 + i as f64 * step;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut ok = true;
        for &(a, b, c) in &inst.halfspaces {
            let r = a * x + c;
            if b == 0.0 {
                ok &= r >= -1e-12;
            } else if b > 0.0 {
                lo = lo.max(-r / b);
            } else {
                hi = hi.min(-r / b);
            }
        }
        if !ok || lo > hi {
            continue;
        }
        let y = y0.clamp(lo, hi);
        let d = ((x - x0).powi(2) + (y - y0).powi(2)).sqrt();
        if best.is_none_or(|b| d < b) {
            best = Some(d);
        }
    }
    best
}

fn crit_modifier() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut checked, mut worst, mut bad) = (0, 0.0f64, 0);
    let mut tries = 0;
    while checked < 200 && tries < 100_000 {
        tries += 1;
        let k = rng.gen_range(1..=3);
        let mut ps = Vec::new();
        for i in 0..k {
            let mut a: i64 = rng.gen_range(-3..=3);
            let b = rng.gen_range(-3..=3);
            if i == 0 && (a == 0 || b == 0) {
                a = 1 + a.abs();
            }
            if a == 0 && b == 0 {
                continue;
            }
            let c = Rational::new(rng.gen_range(-20..=20), 10);
            let expr = AffineExpr::new(
                [("x".to_string(), Rational::from(a)), ("y".to_string(), Rational::from(b))],
                c,
            )
            .unwrap();
            let cmp = if rng.gen_bool(0.5) { Comparison::Gt } else { Comparison::Ge };
            ps.push(Predicate::new(format!("p{}", i + 1), expr, cmp));
        }
        if ps.len() != k || ps[0].support().count() != 2 {
            continue;
        }
        let (x0, y0) = (uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0));
        let point: std::collections::BTreeMap<String, Rational> =
            [("x".to_string(), x0.clone()), ("y".to_string(), y0.clone())].into();
        let now: Vec<bool> = ps.iter().map(|p| p.holds_for(&p.expr.eval(&point).unwrap())).collect();
        if now[0] {
            continue;
        }
        let req = ModificationRequest {
            point: point.clone(),
            action: stl_enforce::encoder::Valuation(
                ps.iter().zip(&now).map(|(p, b)| (p.id.clone(), *b)).collect(),
            ),
            fix: ["p1".to_string()].into(),
            predicates: ps.clone(),
        };
        let Ok(r) = modify(&req, &eps()) else { continue };
        if !(0.05..=0.5).contains(&r.distance) {
            continue;
        }
        let halfspaces = ps
            .iter()
            .zip(&now)
            .enumerate()
            .map(|(i, (p, &b))| {
                let sign = if (i == 0) != b { 1.0 } else { -1.0 };
                let coef = |v: &str| sign * p.expr.coefficient(v).to_f64();
                (coef("x"), coef("y"), sign * p.expr.constant().to_f64())
            })
            .collect();
        let inst = Instance {
            point: (x0.to_f64(), y0.to_f64()),
            halfspaces,
        };
        let Some(d) = grid_distance(&inst, 2.0 * r.distance) else {
            bad += 1;
            continue;
        };
        let gap = (d - r.distance).abs();
        worst = worst.max(gap);
        bad += usize::from(gap > 2e-3);
        checked += 1;
    }
    outcome(
        checked >= 200 && bad == 0,
        format!("{checked} instances, {bad} off by more than 2e-3, worst gap {worst:.2e}, {:.1?}", start.elapsed()),
    )
}

fn crit_scaling() -> Outcome {
    let start = Instant::now();
    let counts: Vec<usize> = (2..=20).step_by(2).collect();
    let rs = match bench_stopping(&counts, 21, 9, &eps()) {
        Ok(rs) => rs,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let lengths_ok = rs.iter().all(|r| r.word_length.abs_diff(r.violations + 4) <= 2);
    let xs: Vec<f64> = rs.iter().map(|r| r.violations as f64).collect();
    let ys: Vec<f64> = rs.iter().map(|r| r.time_ms).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    let lens: Vec<String> = rs.iter().map(|r| r.word_length.to_string()).collect();
    outcome(
        lengths_ok && r2 >= 0.9 && elapsed < Duration::from_secs(30),
        format!(
            "lengths [{}], slope {slope:.3} ms/violation, R^2 {r2:.3}, {elapsed:.1?}",
            lens.join(" ")
        ),
    )
}

fn crit_structure() -> Outcome {
    let mut automata: Vec<(String, TimedTransducer)> = Vec::new();
    let p1 = Predicate::at_least("p1", "x", q("0.5"));
    let p2 = Predicate::at_least("p2", "y", q("0.5"));
    for (lo, hi) in [("0", "0"), ("0", "2"), ("1", "3"), ("2", "2"), ("4", "5")] {
        let iv = stl_enforce::stl::Interval::new(q(lo), q(hi)).unwrap();
        automata.push((format!("U[{lo},{hi}]"), build_until(&p1, &p2, &iv).unwrap()));
        automata.push((format!("R[{lo},{hi}]"), build_release(&p1, &p2, &iv).unwrap()));
    }
    let formulas: Vec<StlFormula> = Scenario::ALL
        .iter()
        .map(|s| s.formula())
        .chain(
            [
                "(x > 0.2) U[1,3] (y >= 0.5) and (z <= 0.4) R[0,2] (y > 0.1)",
                "(x > 0.2) U[1,3] (y >= 0.5) or (z <= 0.4) R[0,2] (y > 0.1)",
                "(x > 0 && y > 0) U[1,3] (z > 0 || !(x >= 1))",
                "(x > 0 || y > 0) R[0,2] (x > 0 && z > 0)",
            ]
            .iter()
            .map(|t| parse_formula(t).unwrap()),
        )
        .collect();
    for phi in &formulas {
        automata.push((phi.to_string(), compile(phi).unwrap()));
    }
    let mut det = 0;
    let mut corr = 0;
    let mut first = None;
    for (name, a) in &automata {
        let (d, c) = (check_determinism(a).len(), check_self_correction(a).len());
        if d + c > 0 && first.is_none() {
            first = Some(name.clone());
        }
        det += d;
        corr += c;
    }
    outcome(
        det == 0 && corr == 0,
        format!(
            "{} transducers, {det} determinism and {corr} self-correction violations{}",
            automata.len(),
            first.map(|n| format!(" (first in {n})")).unwrap_or_default()
        ),
    )
}

fn main() -> ExitCode {
    let corpus = corpus();
    let criteria: Vec<(usize, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, Box::new(crit_encoding)),
        (2, Box::new(crit_trace)),
        (3, Box::new(crit_relevant_points)),
        (4, Box::new(crit_equivalence)),
        (5, Box::new(|| crit_soundness(&corpus))),
        (6, Box::new(|| crit_transparency(&corpus))),
        (7, Box::new(crit_modifier)),
        (8, Box::new(|| crit_idempotence(&corpus))),
        (9, Box::new(crit_scaling)),
        (10, Box::new(crit_structure)),
    ];
    let mut failed = 0;
    for (n, run) in &criteria {
        let o = run();
        failed += usize::from(!o.pass);
        println!("criterion {n}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
