//! The Until and Release transducers.
//!
//! Both are first written over the truth of the two operands (`A`, `B`),
//! then instantiated for the concrete operand formulas.

use std::collections::BTreeMap;

use super::{ClockOp, Guard, Label, OutputSymbol, TimedTransducer, Transition, TransducerError};
use crate::rational::Rational;
use crate::stl::{Interval, Predicate, StateFormula};

pub(crate) const CLOCK: &str = "c";

/// Edge over operand truth values. `None` leaves an operand unconstrained.
struct AbsEdge {
    src: &'static str,
    a: Option<bool>,
    b: Option<bool>,
    guard: Guard,
    reset: bool,
    dst: &'static str,
    fix_a: bool,
    fix_b: bool,
    held: bool,
}

/// The clock starts on the first event, so every edge out of `l0` resets it.
struct Edges {
    list: Vec<AbsEdge>,
}

impl Edges {
    fn new() -> Self {
        Edges { list: Vec::new() }
    }

    fn push(
        &mut self,
        src: &'static str,
        (a, b): (Option<bool>, Option<bool>),
        guard: &Guard,
        dst: &'static str,
        (fix_a, fix_b): (bool, bool),
        held: bool,
    ) {
        self.list.push(AbsEdge {
            src,
            a,
            b,
            guard: guard.clone(),
            reset: src == "l0",
            dst,
            fix_a,
            fix_b,
            held,
        });
    }
}

const T: Option<bool> = Some(true);
const F: Option<bool> = Some(false);
const ANY: Option<bool> = None;
const OK: (bool, bool) = (false, false);
const FIX_A: (bool, bool) = (true, false);
const FIX_B: (bool, bool) = (false, true);
const FIX_AB: (bool, bool) = (true, true);

struct Guards {
    before: Guard,
    at_lo: Guard,
    inside: Guard,
    closing: Guard,
    at_hi: Guard,
}

fn guards(i: &Interval) -> Guards {
    let (t1, t2) = (i.lo(), i.hi());
    Guards {
        before: Guard::atom(CLOCK, ClockOp::Lt, t1),
        at_lo: Guard::atom(CLOCK, ClockOp::Eq, t1),
        inside: Guard::atom(CLOCK, ClockOp::Ge, t1).and(&Guard::atom(CLOCK, ClockOp::Lt, t2)),
        closing: Guard::atom(CLOCK, ClockOp::Ge, t1).and(&Guard::atom(CLOCK, ClockOp::Le, t2)),
        at_hi: Guard::atom(CLOCK, ClockOp::Eq, t2),
    }
}

fn until_edges(i: &Interval) -> (Vec<&'static str>, Edges) {
    let g = guards(i);
    let punctual = i.is_punctual();
    let early = i.lo().is_positive();
    let mut e = Edges::new();
    let decide_from = if early { "l1" } else { "l0" };
    if early {
        e.push("l0", (T, ANY), &Guard::always(), "l1", OK, false);
        e.push("l0", (F, ANY), &Guard::always(), "l1", FIX_A, true);
        e.push("l1", (T, ANY), &g.before, "l1", OK, false);
        e.push("l1", (F, ANY), &g.before, "l1", FIX_A, true);
    }
    e.push(decide_from, (T, T), &g.at_lo, "l2", OK, false);
    e.push(decide_from, (F, T), &g.at_lo, "l2", FIX_A, false);
    if punctual {
        e.push(decide_from, (T, F), &g.at_lo, "l2", FIX_B, false);
        e.push(decide_from, (F, F), &g.at_lo, "l2", FIX_AB, false);
    } else {
        e.push(decide_from, (T, F), &g.at_lo, "l3", OK, false);
        e.push(decide_from, (F, F), &g.at_lo, "l3", FIX_A, true);
        e.push("l3", (T, F), &g.inside, "l3", OK, false);
        e.push("l3", (F, F), &g.inside, "l3", FIX_A, true);
        e.push("l3", (T, T), &g.closing, "l2", OK, false);
        e.push("l3", (F, T), &g.closing, "l2", FIX_A, false);
        e.push("l3", (T, F), &g.at_hi, "l2", FIX_B, false);
        e.push("l3", (F, F), &g.at_hi, "l2", FIX_AB, false);
    }
    e.push("l2", (ANY, ANY), &Guard::always(), "l2", OK, false);
    (locations(early, punctual), e)
}

fn release_edges(i: &Interval) -> (Vec<&'static str>, Edges) {
    let g = guards(i);
    let punctual = i.is_punctual();
    let early = i.lo().is_positive();
    let mut e = Edges::new();
    let decide_from = if early { "l1" } else { "l0" };
    if early {
        e.push("l0", (T, ANY), &Guard::always(), "l2", OK, false);
        e.push("l0", (F, ANY), &Guard::always(), "l1", OK, false);
        e.push("l1", (F, ANY), &g.before, "l1", OK, false);
        e.push("l1", (T, ANY), &g.before, "l2", OK, false);
    }
    e.push(decide_from, (T, ANY), &g.at_lo, "l2", OK, false);
    if punctual {
        e.push(decide_from, (F, T), &g.at_lo, "l2", OK, false);
        e.push(decide_from, (F, F), &g.at_lo, "l2", FIX_B, false);
    } else {
        e.push(decide_from, (F, T), &g.at_lo, "l3", OK, false);
        e.push(decide_from, (F, F), &g.at_lo, "l3", FIX_B, true);
        e.push("l3", (F, T), &g.inside, "l3", OK, false);
        e.push("l3", (F, F), &g.inside, "l3", FIX_B, true);
        e.push("l3", (T, ANY), &g.closing, "l2", OK, false);
        e.push("l3", (F, T), &g.at_hi, "l2", OK, false);
        e.push("l3", (F, F), &g.at_hi, "l2", FIX_B, false);
    }
    e.push("l2", (ANY, ANY), &Guard::always(), "l2", OK, false);
    (locations(early, punctual), e)
}

fn locations(early: bool, punctual: bool) -> Vec<&'static str> {
    let mut locs = vec!["l0"];
    if early {
        locs.push("l1");
    }
    locs.push("l2");
    if !punctual {
        locs.push("l3");
    }
    locs
}

/// How an operand constrains the predicates: a single literal (or constant)
/// maps to a partial label, anything else is expanded over its predicates.
fn is_simple(f: &StateFormula) -> bool {
    matches!(
        f,
        StateFormula::True | StateFormula::False | StateFormula::Lit { .. }
    )
}

/// Literal required for `f` to have truth `want`, `Some(None)` when no
/// predicate is involved, `None` when impossible.
fn simple_literal(f: &StateFormula, want: bool) -> Option<Option<(String, bool)>> {
    match f {
        StateFormula::True => want.then_some(None),
        StateFormula::False => (!want).then_some(None),
        StateFormula::Lit { pred, positive } => Some(Some((pred.id.clone(), *positive == want))),
        _ => unreachable!("compound operands are expanded"),
    }
}

fn operand_ids(a: &StateFormula, b: &StateFormula) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for p in a.predicates().into_iter().chain(b.predicates()) {
        if !ids.contains(&p.id) {
            ids.push(p.id);
        }
    }
    ids
}

const MAX_EXPANDED_PREDICATES: usize = 12;

fn instantiate(
    locs: Vec<&'static str>,
    edges: Edges,
    a: &StateFormula,
    b: &StateFormula,
) -> Result<TimedTransducer, TransducerError> {
    let ids = operand_ids(a, b);
    let mut transitions = Vec::new();
    // Operands sharing a predicate are expanded too: correcting one of them
    // may then change the other.
    let simple = is_simple(a) && is_simple(b) && a.predicates().len() + b.predicates().len() == ids.len();
    if !simple && ids.len() > MAX_EXPANDED_PREDICATES {
        return Err(TransducerError::Malformed(format!(
            "operands mention {} predicates; at most {MAX_EXPANDED_PREDICATES} supported",
            ids.len()
        )));
    }
    let samples = clock_samples(&edges);
    for e in &edges.list {
        let resets = if e.reset {
            vec![CLOCK.to_string()]
        } else {
            Vec::new()
        };
        let make = |label: Label, dst: &str, output: OutputSymbol| Transition {
            src: e.src.to_string(),
            label,
            guard: e.guard.clone(),
            resets: resets.clone(),
            dst: dst.to_string(),
            output,
        };
        if e.a.is_none() && e.b.is_none() {
            transitions.push(make(Label::Sigma, e.dst, OutputSymbol::Top));
        } else if simple {
            if let Some(t) = simple_edge(e, a, b)? {
                transitions.push(make(t.0, e.dst, t.1));
            }
        } else {
            for (label, dst, out) in expanded_edges(e, &edges, &samples, a, b, &ids)? {
                transitions.push(make(label, dst, out));
            }
        }
    }
    TimedTransducer::new(
        locs.iter().map(|l| l.to_string()).collect(),
        "l0".into(),
        ["l2".to_string()],
        vec![CLOCK.to_string()],
        ids,
        transitions,
    )
}

/// One clock value per region cut out by the guard constants.
fn clock_samples(edges: &Edges) -> Vec<BTreeMap<String, Rational>> {
    let mut ks: Vec<Rational> = vec![Rational::zero()];
    for e in &edges.list {
        ks.extend(e.guard.0.iter().map(|atom| atom.bound.clone()));
    }
    ks.sort();
    ks.dedup();
    let mut values = Vec::new();
    for (i, k) in ks.iter().enumerate() {
        values.push(k.clone());
        if let Some(next) = ks.get(i + 1) {
            values.push(k.midpoint(next));
        }
    }
    values.push(ks.last().expect("contains zero") + &Rational::one());
    values
        .into_iter()
        .map(|v| BTreeMap::from([(CLOCK.to_string(), v)]))
        .collect()
}

fn simple_edge(
    e: &AbsEdge,
    a: &StateFormula,
    b: &StateFormula,
) -> Result<Option<(Label, OutputSymbol)>, TransducerError> {
    let mut cube: BTreeMap<String, bool> = BTreeMap::new();
    let mut fix: Vec<String> = Vec::new();
    for (operand, want, needs_fix) in [(a, e.a, e.fix_a), (b, e.b, e.fix_b)] {
        let Some(want) = want else { continue };
        let Some(lit) = simple_literal(operand, want) else {
            return Ok(None);
        };
        if let Some((id, value)) = lit {
            cube.insert(id.clone(), value);
            if needs_fix {
                fix.push(id);
            }
        } else if needs_fix {
            // A constant operand that is false can never be corrected.
            return Err(TransducerError::UnfixableOperand(operand.to_string()));
        }
    }
    let output = if fix.is_empty() {
        OutputSymbol::Top
    } else {
        OutputSymbol::bottom(fix.iter().map(String::as_str), e.held)
    };
    Ok(Some((Label::Cube(cube), output)))
}

fn matches(e: &AbsEdge, va: bool, vb: bool) -> bool {
    e.a.is_none_or(|x| x == va) && e.b.is_none_or(|x| x == vb)
}

fn expanded_edges(
    e: &AbsEdge,
    edges: &Edges,
    samples: &[BTreeMap<String, Rational>],
    a: &StateFormula,
    b: &StateFormula,
    ids: &[String],
) -> Result<Vec<(Label, &'static str, OutputSymbol)>, TransducerError> {
    let n = ids.len();
    let assign = |mask: u32| -> BTreeMap<String, bool> {
        ids.iter()
            .enumerate()
            .map(|(k, id)| (id.clone(), mask >> k & 1 == 1))
            .collect()
    };
    let truth = |mask: u32| {
        let bits = assign(mask);
        (a.eval_bits(&bits), b.eval_bits(&bits))
    };
    // Top edges leaving the same location wherever `e` is enabled.
    let region: Vec<_> = samples.iter().filter(|c| e.guard.holds(c)).collect();
    let twins: Vec<&AbsEdge> = edges
        .list
        .iter()
        .filter(|u| {
            !u.fix_a && !u.fix_b && u.src == e.src && region.iter().all(|c| u.guard.holds(c))
        })
        .collect();
    let mut out = Vec::new();
    for mask in 0..(1u32 << n) {
        let (va, vb) = truth(mask);
        if !matches(e, va, vb) {
            continue;
        }
        let label = Label::Cube(assign(mask));
        if !e.fix_a && !e.fix_b {
            out.push((label, e.dst, OutputSymbol::Top));
            continue;
        }
        let keeps_target = |m: u32| {
            let (fa, fb) = truth(mask ^ m);
            let a_ok = if e.fix_a { fa } else { e.a.is_none() || fa == va };
            let b_ok = if e.fix_b { fb } else { e.b.is_none() || fb == vb };
            a_ok && b_ok
        };
        // Otherwise settle for any correction that is acceptable from here,
        // and follow the corrected run.
        let reaches_top = |m: u32| {
            let (fa, fb) = truth(mask ^ m);
            twins.iter().find(|u| matches(u, fa, fb)).map(|u| u.dst)
        };
        let (flip, dst, held) = if let Some(m) = minimal_flip(n, keeps_target) {
            (m, e.dst, e.held)
        } else if let Some(m) = minimal_flip(n, |m| reaches_top(m).is_some()) {
            let dst = reaches_top(m).expect("found above");
            (m, dst, e.held && dst == e.dst)
        } else {
            let culprit = if e.fix_a { a } else { b };
            return Err(TransducerError::UnfixableOperand(culprit.to_string()));
        };
        let fix: Vec<&str> = (0..n)
            .filter(|k| flip >> k & 1 == 1)
            .map(|k| ids[k].as_str())
            .collect();
        out.push((label, dst, OutputSymbol::bottom(fix, held)));
    }
    Ok(out)
}

/// Smallest nonzero flip mask accepted by `ok`, fewest bits first.
fn minimal_flip(n: usize, ok: impl Fn(u32) -> bool) -> Option<u32> {
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks.into_iter().find(|&m| ok(m))
}

pub fn build_until_operands(
    a: &StateFormula,
    b: &StateFormula,
    interval: &Interval,
) -> Result<TimedTransducer, TransducerError> {
    let (locs, edges) = until_edges(interval);
    instantiate(locs, edges, a, b)
}

pub fn build_release_operands(
    a: &StateFormula,
    b: &StateFormula,
    interval: &Interval,
) -> Result<TimedTransducer, TransducerError> {
    let (locs, edges) = release_edges(interval);
    instantiate(locs, edges, a, b)
}

/// Transducer for `p1 U_I p2`.
pub fn build_until(
    p1: &Predicate,
    p2: &Predicate,
    interval: &Interval,
) -> Result<TimedTransducer, TransducerError> {
    build_until_operands(
        &StateFormula::lit(p1.clone()),
        &StateFormula::lit(p2.clone()),
        interval,
    )
}

/// Transducer for `p1 R_I p2`.
pub fn build_release(
    p1: &Predicate,
    p2: &Predicate,
    interval: &Interval,
) -> Result<TimedTransducer, TransducerError> {
    build_release_operands(
        &StateFormula::lit(p1.clone()),
        &StateFormula::lit(p2.clone()),
        interval,
    )
}
