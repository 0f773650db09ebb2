//! Conjunctive and disjunctive products.
//!
//! The disjunctive product tracks which components are still viable. A
//! component that answers `⊥` while another answers `⊤` is dropped, so the
//! product only asks for corrections when every viable component does.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Guard, OutputSymbol, TimedTransducer, Transition, TransducerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProductOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Alive {
    Both,
    First,
    Second,
}

type Node = (String, String, Alive);

fn name(op: ProductOp, (la, lb, alive): &Node) -> String {
    match (op, alive) {
        (ProductOp::And, _) | (ProductOp::Or, Alive::Both) => format!("({la},{lb})"),
        (ProductOp::Or, Alive::First) => format!("({la},{lb})/1"),
        (ProductOp::Or, Alive::Second) => format!("({la},{lb})/2"),
    }
}

fn fresh_clock(taken: &[String], base: &str) -> String {
    let mut k = 2;
    loop {
        let candidate = format!("{base}_{k}");
        if !taken.contains(&candidate) {
            return candidate;
        }
        k += 1;
    }
}

/// Copy of `b` whose clocks do not collide with `taken`.
fn rename_clocks(b: &TimedTransducer, taken: &[String]) -> Result<TimedTransducer, TransducerError> {
    let mut map: HashMap<String, String> = HashMap::new();
    let mut used: Vec<String> = taken.to_vec();
    for c in b.clocks() {
        let new = if used.contains(c) {
            fresh_clock(&used, c)
        } else {
            c.clone()
        };
        used.push(new.clone());
        map.insert(c.clone(), new);
    }
    let transitions = b
        .transitions()
        .iter()
        .map(|t| {
            let mut t = t.clone();
            for atom in &mut t.guard.0 {
                atom.clock = map[&atom.clock].clone();
            }
            for r in &mut t.resets {
                *r = map[r].clone();
            }
            t
        })
        .collect();
    TimedTransducer::new(
        b.locations().to_vec(),
        b.initial().to_string(),
        b.accepting().iter().cloned(),
        b.clocks().iter().map(|c| map[c].clone()).collect(),
        b.predicates().to_vec(),
        transitions,
    )
}

/// True when every transition leaving the initial location resets every
/// clock, no other transition resets anything and nothing re-enters the
/// initial location. All clocks then read the same value after the first
/// event.
fn resets_once(a: &TimedTransducer) -> bool {
    a.transitions().iter().all(|t| {
        t.dst != a.initial()
            && if t.src == a.initial() {
                a.clocks().iter().all(|c| t.resets.contains(c))
            } else {
                t.resets.is_empty()
            }
    })
}

/// The guard with every clock read as `c`.
fn collapsed(g: &Guard, c: &str) -> Guard {
    let mut g = g.clone();
    for atom in &mut g.0 {
        atom.clock = c.to_string();
    }
    g
}

fn combine(op: ProductOp, alive: Alive, o1: &OutputSymbol, o2: &OutputSymbol) -> (OutputSymbol, Alive) {
    match op {
        ProductOp::And => (o1.join(o2), Alive::Both),
        ProductOp::Or => match alive {
            Alive::First => (o1.clone(), Alive::First),
            Alive::Second => (o2.clone(), Alive::Second),
            Alive::Both => match (o1.is_top(), o2.is_top()) {
                (true, true) => (OutputSymbol::Top, Alive::Both),
                (true, false) => (OutputSymbol::Top, Alive::First),
                (false, true) => (OutputSymbol::Top, Alive::Second),
                (false, false) => (o1.join(o2), Alive::Both),
            },
        },
    }
}

fn accepting(op: ProductOp, a: &TimedTransducer, b: &TimedTransducer, node: &Node) -> bool {
    let (in_a, in_b) = (a.accepting().contains(&node.0), b.accepting().contains(&node.1));
    match (op, node.2) {
        (ProductOp::And, _) => in_a && in_b,
        (ProductOp::Or, Alive::Both) => in_a || in_b,
        (ProductOp::Or, Alive::First) => in_a,
        (ProductOp::Or, Alive::Second) => in_b,
    }
}

fn successors(
    op: ProductOp,
    a: &TimedTransducer,
    b: &TimedTransducer,
    node: &Node,
    synced: bool,
) -> Vec<(Transition, Node)> {
    let mut out = Vec::new();
    for t1 in a.outgoing(&node.0) {
        for t2 in b.outgoing(&node.1) {
            let Some(label) = t1.label.merge(&t2.label) else {
                continue;
            };
            if synced && (t1.src == a.initial()) != (t2.src == b.initial()) {
                continue;
            }
            let guard: Guard = t1.guard.clone().and(&t2.guard);
            let feasible = if synced {
                collapsed(&guard, "c").satisfiable()
            } else {
                guard.satisfiable()
            };
            if !feasible {
                continue;
            }
            let (output, alive) = combine(op, node.2, &t1.output, &t2.output);
            let dst: Node = (t1.dst.clone(), t2.dst.clone(), alive);
            let mut resets = t1.resets.clone();
            resets.extend(t2.resets.iter().cloned());
            out.push((
                Transition {
                    src: name(op, node),
                    label,
                    guard,
                    resets,
                    dst: name(op, &dst),
                    output,
                },
                dst,
            ));
        }
    }
    out
}

fn build(
    a: &TimedTransducer,
    b: &TimedTransducer,
    op: ProductOp,
    prune: bool,
) -> Result<TimedTransducer, TransducerError> {
    let b = rename_clocks(b, a.clocks())?;
    // Clocks that always agree make pairs with different reset behaviour or
    // contradictory bounds across clocks unreachable.
    let synced = resets_once(a) && resets_once(&b);
    let start: Node = (a.initial().to_string(), b.initial().to_string(), Alive::Both);
    let alive_modes: &[Alive] = match op {
        ProductOp::And => &[Alive::Both],
        ProductOp::Or => &[Alive::Both, Alive::First, Alive::Second],
    };

    let mut order: Vec<Node> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut queue: VecDeque<Node> = VecDeque::new();
    let mut enqueue = |n: Node, order: &mut Vec<Node>, queue: &mut VecDeque<Node>| {
        if seen.insert(name(op, &n)) {
            order.push(n.clone());
            queue.push_back(n);
        }
    };
    enqueue(start.clone(), &mut order, &mut queue);
    if !prune {
        for mode in alive_modes {
            for la in a.locations() {
                for lb in b.locations() {
                    enqueue((la.clone(), lb.clone(), *mode), &mut order, &mut queue);
                }
            }
        }
    }
    let mut transitions = Vec::new();
    while let Some(node) = queue.pop_front() {
        for (t, dst) in successors(op, a, &b, &node, synced) {
            transitions.push(t);
            enqueue(dst, &mut order, &mut queue);
        }
    }

    let mut predicates = a.predicates().to_vec();
    for p in b.predicates() {
        if !predicates.contains(p) {
            predicates.push(p.clone());
        }
    }
    let mut clocks = a.clocks().to_vec();
    clocks.extend(b.clocks().iter().cloned());
    let accepting_locs: Vec<String> = order
        .iter()
        .filter(|n| accepting(op, a, &b, n))
        .map(|n| name(op, n))
        .collect();
    TimedTransducer::new(
        order.iter().map(|n| name(op, n)).collect(),
        name(op, &start),
        accepting_locs,
        clocks,
        predicates,
        transitions,
    )
}

/// Product restricted to locations reachable from the initial pair.
pub fn product(
    a: &TimedTransducer,
    b: &TimedTransducer,
    op: ProductOp,
) -> Result<TimedTransducer, TransducerError> {
    build(a, b, op, true)
}

/// Product over every pair of locations.
pub fn product_unpruned(
    a: &TimedTransducer,
    b: &TimedTransducer,
    op: ProductOp,
) -> Result<TimedTransducer, TransducerError> {
    build(a, b, op, false)
}
