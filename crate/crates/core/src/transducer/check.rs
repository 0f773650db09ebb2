//! Exhaustive structural checks over locations, full valuations and one
//! representative clock valuation per region.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Label, OutputSymbol, TimedTransducer, Transition};
use crate::encoder::Valuation;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckViolation {
    Ambiguous {
        location: String,
        valuation: Valuation,
        clocks: BTreeMap<String, Rational>,
        count: usize,
    },
    NoTopTwin {
        transition: usize,
        reason: String,
    },
}

impl fmt::Display for CheckViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckViolation::Ambiguous {
                location,
                valuation,
                clocks,
                count,
            } => write!(f, "{count} transitions enabled in {location} for {valuation} at {clocks:?}"),
            CheckViolation::NoTopTwin { transition, reason } => {
                write!(f, "transition {transition}: {reason}")
            }
        }
    }
}

const MAX_VALUATION_BITS: usize = 16;

/// Candidate values per clock: every guard constant, midpoints between
/// consecutive constants, and one value past the largest.
fn clock_samples(a: &TimedTransducer) -> Vec<BTreeMap<String, Rational>> {
    let mut consts: BTreeMap<&str, BTreeSet<Rational>> = a
        .clocks()
        .iter()
        .map(|c| (c.as_str(), BTreeSet::from([Rational::zero()])))
        .collect();
    for t in a.transitions() {
        for atom in &t.guard.0 {
            if let Some(set) = consts.get_mut(atom.clock.as_str()) {
                set.insert(atom.bound.clone());
            }
        }
    }
    let mut combos: Vec<BTreeMap<String, Rational>> = vec![BTreeMap::new()];
    for (clock, set) in consts {
        let ks: Vec<&Rational> = set.iter().collect();
        let mut values: Vec<Rational> = Vec::new();
        for (i, k) in ks.iter().enumerate() {
            values.push((*k).clone());
            if let Some(next) = ks.get(i + 1) {
                values.push(k.midpoint(next));
            }
        }
        values.push(*ks.last().expect("contains zero") + Rational::one());
        combos = combos
            .into_iter()
            .flat_map(|m| {
                values.iter().map(move |v| {
                    let mut m = m.clone();
                    m.insert(clock.to_string(), v.clone());
                    m
                })
            })
            .collect();
    }
    combos
}

fn valuations(ids: &[String]) -> Vec<Valuation> {
    assert!(ids.len() <= MAX_VALUATION_BITS, "too many predicates to enumerate");
    (0..(1u32 << ids.len()))
        .map(|mask| {
            Valuation(
                ids.iter()
                    .enumerate()
                    .map(|(k, id)| (id.clone(), mask >> k & 1 == 1))
                    .collect(),
            )
        })
        .collect()
}

/// At most one transition enabled for every location, valuation and clock region.
pub fn check_determinism(a: &TimedTransducer) -> Vec<CheckViolation> {
    let clocks = clock_samples(a);
    let vals = valuations(a.predicates());
    let mut out = Vec::new();
    for loc in a.locations() {
        for v in &vals {
            for c in &clocks {
                let count = a.enabled(loc, c, v).count();
                if count > 1 {
                    out.push(CheckViolation::Ambiguous {
                        location: loc.clone(),
                        valuation: v.clone(),
                        clocks: c.clone(),
                        count,
                    });
                }
            }
        }
    }
    out
}

fn entails(stronger: &BTreeMap<String, bool>, weaker: &Label) -> bool {
    match weaker {
        Label::Sigma => true,
        Label::Cube(lits) => lits.iter().all(|(p, b)| stronger.get(p) == Some(b)),
    }
}

/// Every `⊥S` transition has a `⊤` twin with the same source, target and
/// resets that is enabled for the label with `S` flipped wherever the
/// original guard holds.
pub fn check_self_correction(a: &TimedTransducer) -> Vec<CheckViolation> {
    let clocks = clock_samples(a);
    let mut out = Vec::new();
    for (i, t) in a.transitions().iter().enumerate() {
        let OutputSymbol::Bottom { fix, .. } = &t.output else {
            continue;
        };
        let Some(lits) = t.label.literals() else {
            out.push(CheckViolation::NoTopTwin {
                transition: i,
                reason: "bottom output on an unconstrained label".into(),
            });
            continue;
        };
        if let Some(p) = fix.iter().find(|p| !lits.contains_key(*p)) {
            out.push(CheckViolation::NoTopTwin {
                transition: i,
                reason: format!("fixes `{p}` which its label does not mention"),
            });
            continue;
        }
        let flipped: BTreeMap<String, bool> = lits
            .iter()
            .map(|(p, b)| (p.clone(), if fix.contains(p) { !b } else { *b }))
            .collect();
        let region: Vec<&BTreeMap<String, Rational>> =
            clocks.iter().filter(|c| t.guard.holds(c)).collect();
        let twin = |u: &Transition| {
            u.output.is_top()
                && u.src == t.src
                && u.dst == t.dst
                && u.resets == t.resets
                && entails(&flipped, &u.label)
                && region.iter().all(|c| u.guard.holds(c))
        };
        if !a.transitions().iter().any(twin) {
            out.push(CheckViolation::NoTopTwin {
                transition: i,
                reason: format!("no top transition for {} under {}", Label::Cube(flipped), t.guard),
            });
        }
    }
    out
}
