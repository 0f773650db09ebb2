//! Timed transducers: clocks, guarded transitions over predicate valuations,
//! and an output symbol per transition.

mod build;
mod check;
mod compile;
mod json;
mod product;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::encoder::{TimedEvent, TimedWord, Valuation};
use crate::rational::Rational;

pub use build::{build_release, build_release_operands, build_until, build_until_operands};
pub use check::{check_determinism, check_self_correction, CheckViolation};
pub use compile::{compile, trivial};
pub use product::{product, product_unpruned, ProductOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransducerError {
    #[error("no transition enabled in `{location}` at t={time} for {action}")]
    NoEnabledTransition {
        location: String,
        time: Rational,
        action: Valuation,
    },
    #[error("{count} transitions enabled in `{location}` at t={time} for {action}")]
    AmbiguousTransition {
        location: String,
        time: Rational,
        action: Valuation,
        count: usize,
    },
    #[error("event at t={time} precedes the previous event at t={last}")]
    OutOfOrder { time: Rational, last: Rational },
    #[error("event {index}: {source}")]
    AtEvent {
        index: usize,
        #[source]
        source: Box<TransducerError>,
    },
    #[error("empty timed word")]
    EmptyWord,
    #[error("formula has no temporal operator")]
    NoTemporalTerm,
    #[error("operand `{0}` can never be made true")]
    UnfixableOperand(String),
    #[error("malformed transducer: {0}")]
    Malformed(String),
    #[error("invalid transducer JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClockOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl ClockOp {
    pub fn holds(self, value: &Rational, bound: &Rational) -> bool {
        match self {
            ClockOp::Lt => value < bound,
            ClockOp::Le => value <= bound,
            ClockOp::Eq => value == bound,
            ClockOp::Ge => value >= bound,
            ClockOp::Gt => value > bound,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ClockOp::Lt => "<",
            ClockOp::Le => "<=",
            ClockOp::Eq => "==",
            ClockOp::Ge => ">=",
            ClockOp::Gt => ">",
        }
    }

    pub fn from_symbol(s: &str) -> Option<ClockOp> {
        Some(match s {
            "<" => ClockOp::Lt,
            "<=" => ClockOp::Le,
            "==" | "=" => ClockOp::Eq,
            ">=" => ClockOp::Ge,
            ">" => ClockOp::Gt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClockAtom {
    pub clock: String,
    pub op: ClockOp,
    pub bound: Rational,
}

impl ClockAtom {
    pub fn new(clock: &str, op: ClockOp, bound: Rational) -> Self {
        ClockAtom {
            clock: clock.to_string(),
            op,
            bound,
        }
    }
}

/// Conjunction of clock constraints; empty means always enabled.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Guard(pub Vec<ClockAtom>);

impl Guard {
    pub fn always() -> Self {
        Guard(Vec::new())
    }

    pub fn atom(clock: &str, op: ClockOp, bound: &Rational) -> Self {
        Guard(vec![ClockAtom::new(clock, op, bound.clone())])
    }

    pub fn and(mut self, other: &Guard) -> Guard {
        self.0.extend(other.0.iter().cloned());
        self
    }

    pub fn holds(&self, clocks: &BTreeMap<String, Rational>) -> bool {
        self.0.iter().all(|a| {
            clocks
                .get(&a.clock)
                .is_some_and(|v| a.op.holds(v, &a.bound))
        })
    }

    /// Whether some non-negative clock valuation satisfies every atom.
    pub fn satisfiable(&self) -> bool {
        let mut by_clock: BTreeMap<&str, Vec<&ClockAtom>> = BTreeMap::new();
        for a in &self.0 {
            by_clock.entry(a.clock.as_str()).or_default().push(a);
        }
        by_clock.values().all(|atoms| {
            // Lower bound (value, strict) and upper bound (value, strict).
            let mut lo = (Rational::zero(), false);
            let mut hi: Option<(Rational, bool)> = None;
            let tighten_hi = |hi: &mut Option<(Rational, bool)>, b: &Rational, strict: bool| {
                let replace = match hi {
                    None => true,
                    Some((v, s)) => b < v || (b == v && strict && !*s),
                };
                if replace {
                    *hi = Some((b.clone(), strict));
                }
            };
            for a in atoms {
                let b = &a.bound;
                let raise = |lo: &mut (Rational, bool), strict: bool| {
                    if *b > lo.0 || (*b == lo.0 && strict && !lo.1) {
                        *lo = (b.clone(), strict);
                    }
                };
                match a.op {
                    ClockOp::Lt => tighten_hi(&mut hi, b, true),
                    ClockOp::Le => tighten_hi(&mut hi, b, false),
                    ClockOp::Eq => {
                        tighten_hi(&mut hi, b, false);
                        raise(&mut lo, false);
                    }
                    ClockOp::Ge => raise(&mut lo, false),
                    ClockOp::Gt => raise(&mut lo, true),
                }
            }
            match hi {
                None => true,
                Some((h, hs)) => lo.0 < h || (lo.0 == h && !lo.1 && !hs),
            }
        })
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "true");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|a| format!("{} {} {}", a.clock, a.op.symbol(), a.bound))
            .collect();
        write!(f, "{}", parts.join(" && "))
    }
}

/// Required predicate values; unmentioned predicates are unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    Sigma,
    Cube(BTreeMap<String, bool>),
}

impl Label {
    pub fn cube<'a>(lits: impl IntoIterator<Item = (&'a str, bool)>) -> Label {
        Label::Cube(lits.into_iter().map(|(p, b)| (p.to_string(), b)).collect())
    }

    pub fn matches(&self, v: &Valuation) -> bool {
        match self {
            Label::Sigma => true,
            Label::Cube(lits) => lits.iter().all(|(p, b)| v.get(p) == Some(*b)),
        }
    }

    /// Conjunction, or `None` when the two labels disagree on a predicate.
    pub fn merge(&self, other: &Label) -> Option<Label> {
        match (self, other) {
            (Label::Sigma, x) | (x, Label::Sigma) => Some(x.clone()),
            (Label::Cube(a), Label::Cube(b)) => {
                let mut out = a.clone();
                for (p, v) in b {
                    if *out.entry(p.clone()).or_insert(*v) != *v {
                        return None;
                    }
                }
                Some(Label::Cube(out))
            }
        }
    }

    fn literals(&self) -> Option<&BTreeMap<String, bool>> {
        match self {
            Label::Sigma => None,
            Label::Cube(l) => Some(l),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Sigma => write!(f, "*"),
            Label::Cube(l) if l.is_empty() => write!(f, "true"),
            Label::Cube(l) => {
                let parts: Vec<String> = l
                    .iter()
                    .map(|(p, b)| if *b { p.clone() } else { format!("!{p}") })
                    .collect();
                write!(f, "{}", parts.join(" & "))
            }
        }
    }
}

/// `⊤`, or `⊥` with the predicates to fix. `hold` lists the fixed predicates
/// that must also stay fixed until the next event; the rest are fixed only
/// at the event instant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OutputSymbol {
    Top,
    Bottom {
        fix: BTreeSet<String>,
        hold: BTreeSet<String>,
    },
}

impl OutputSymbol {
    pub fn bottom<'a>(fix: impl IntoIterator<Item = &'a str>, held: bool) -> OutputSymbol {
        let fix: BTreeSet<String> = fix.into_iter().map(str::to_string).collect();
        let hold = if held { fix.clone() } else { BTreeSet::new() };
        OutputSymbol::Bottom { fix, hold }
    }

    pub fn is_top(&self) -> bool {
        matches!(self, OutputSymbol::Top)
    }

    pub fn fix_set(&self) -> Option<&BTreeSet<String>> {
        match self {
            OutputSymbol::Top => None,
            OutputSymbol::Bottom { fix, .. } => Some(fix),
        }
    }

    /// Union of fix and hold sets; `⊤` contributes nothing.
    pub fn join(&self, other: &OutputSymbol) -> OutputSymbol {
        match (self, other) {
            (OutputSymbol::Top, x) | (x, OutputSymbol::Top) => x.clone(),
            (
                OutputSymbol::Bottom { fix: f1, hold: h1 },
                OutputSymbol::Bottom { fix: f2, hold: h2 },
            ) => OutputSymbol::Bottom {
                fix: f1.union(f2).cloned().collect(),
                hold: h1.union(h2).cloned().collect(),
            },
        }
    }
}

impl fmt::Display for OutputSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputSymbol::Top => write!(f, "T"),
            OutputSymbol::Bottom { fix, .. } => {
                let ids: Vec<&str> = fix.iter().map(String::as_str).collect();
                write!(f, "F{{{}}}", ids.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub src: String,
    pub label: Label,
    pub guard: Guard,
    pub resets: Vec<String>,
    pub dst: String,
    pub output: OutputSymbol,
}

#[derive(Debug, Clone)]
pub struct TimedTransducer {
    locations: Vec<String>,
    initial: String,
    accepting: BTreeSet<String>,
    clocks: Vec<String>,
    predicates: Vec<String>,
    transitions: Vec<Transition>,
    outgoing: HashMap<String, Vec<usize>>,
}

impl PartialEq for TimedTransducer {
    fn eq(&self, other: &Self) -> bool {
        self.locations == other.locations
            && self.initial == other.initial
            && self.accepting == other.accepting
            && self.clocks == other.clocks
            && self.predicates == other.predicates
            && self.transitions == other.transitions
    }
}

impl TimedTransducer {
    pub fn new(
        locations: Vec<String>,
        initial: String,
        accepting: impl IntoIterator<Item = String>,
        clocks: Vec<String>,
        predicates: Vec<String>,
        transitions: Vec<Transition>,
    ) -> Result<Self, TransducerError> {
        let known = |l: &String| locations.contains(l);
        if !known(&initial) {
            return Err(TransducerError::Malformed(format!("unknown initial `{initial}`")));
        }
        let accepting: BTreeSet<String> = accepting.into_iter().collect();
        if let Some(l) = accepting.iter().find(|l| !known(l)) {
            return Err(TransducerError::Malformed(format!("unknown accepting `{l}`")));
        }
        let mut outgoing: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, t) in transitions.iter().enumerate() {
            if !known(&t.src) || !known(&t.dst) {
                return Err(TransducerError::Malformed(format!(
                    "transition {i} references an unknown location"
                )));
            }
            let clock_ok = |c: &String| clocks.contains(c);
            if !t.resets.iter().all(clock_ok) || !t.guard.0.iter().all(|a| clock_ok(&a.clock)) {
                return Err(TransducerError::Malformed(format!(
                    "transition {i} references an unknown clock"
                )));
            }
            if let OutputSymbol::Bottom { fix, hold } = &t.output {
                if fix.is_empty() || !hold.is_subset(fix) {
                    return Err(TransducerError::Malformed(format!(
                        "transition {i} has an invalid fix set"
                    )));
                }
            }
            outgoing.entry(t.src.clone()).or_default().push(i);
        }
        Ok(TimedTransducer {
            locations,
            initial,
            accepting,
            clocks,
            predicates,
            transitions,
            outgoing,
        })
    }

    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    pub fn initial(&self) -> &str {
        &self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<String> {
        &self.accepting
    }

    pub fn clocks(&self) -> &[String] {
        &self.clocks
    }

    pub fn predicates(&self) -> &[String] {
        &self.predicates
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, location: &str) -> impl Iterator<Item = &Transition> {
        self.outgoing
            .get(location)
            .into_iter()
            .flatten()
            .map(|&i| &self.transitions[i])
    }

    pub fn initial_state(&self) -> TransducerState {
        TransducerState {
            location: self.initial.clone(),
            clocks: self
                .clocks
                .iter()
                .map(|c| (c.clone(), Rational::zero()))
                .collect(),
            last_time: None,
        }
    }

    /// Transitions out of `location` enabled for `action` under `clocks`.
    pub fn enabled<'a>(
        &'a self,
        location: &'a str,
        clocks: &'a BTreeMap<String, Rational>,
        action: &'a Valuation,
    ) -> impl Iterator<Item = &'a Transition> + 'a {
        self.outgoing(location)
            .filter(move |t| t.label.matches(action) && t.guard.holds(clocks))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransducerState {
    pub location: String,
    pub clocks: BTreeMap<String, Rational>,
    pub last_time: Option<Rational>,
}

impl fmt::Display for TransducerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clocks: Vec<String> = self.clocks.values().map(Rational::to_string).collect();
        write!(f, "({},{})", self.location, clocks.join(","))
    }
}

/// Advances clocks to `ev.time`, takes the unique enabled transition and
/// applies its resets.
pub fn make_transition(
    a: &TimedTransducer,
    st: &TransducerState,
    ev: &TimedEvent,
) -> Result<(TransducerState, OutputSymbol), TransducerError> {
    let (next, t) = step(a, st, ev)?;
    Ok((next, t.output.clone()))
}

/// Like [`make_transition`] but also returns the transition taken.
pub fn step<'a>(
    a: &'a TimedTransducer,
    st: &TransducerState,
    ev: &TimedEvent,
) -> Result<(TransducerState, &'a Transition), TransducerError> {
    let delta = match &st.last_time {
        None => ev.time.clone(),
        Some(last) if &ev.time < last => {
            return Err(TransducerError::OutOfOrder {
                time: ev.time.clone(),
                last: last.clone(),
            })
        }
        Some(last) => &ev.time - last,
    };
    let advanced: BTreeMap<String, Rational> = st
        .clocks
        .iter()
        .map(|(c, v)| (c.clone(), v + &delta))
        .collect();
    let found: Vec<&'a Transition> = a
        .outgoing(&st.location)
        .filter(|t| t.label.matches(&ev.action) && t.guard.holds(&advanced))
        .collect();
    let first = match found.as_slice() {
        [one] => *one,
        [] => {
            return Err(TransducerError::NoEnabledTransition {
                location: st.location.clone(),
                time: ev.time.clone(),
                action: ev.action.clone(),
            })
        }
        many => {
            return Err(TransducerError::AmbiguousTransition {
                location: st.location.clone(),
                time: ev.time.clone(),
                action: ev.action.clone(),
                count: many.len(),
            })
        }
    };
    let mut clocks = advanced;
    for c in &first.resets {
        clocks.insert(c.clone(), Rational::zero());
    }
    Ok((
        TransducerState {
            location: first.dst.clone(),
            clocks,
            last_time: Some(ev.time.clone()),
        },
        first,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStep {
    pub time: Rational,
    pub action: Valuation,
    pub from: TransducerState,
    pub to: TransducerState,
    pub output: OutputSymbol,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub outputs: Vec<(Rational, OutputSymbol)>,
    pub steps: Vec<RunStep>,
    pub final_state: TransducerState,
    pub accepted: bool,
}

impl RunResult {
    /// Accepted with every output `⊤`.
    pub fn all_top(&self) -> bool {
        self.accepted && self.outputs.iter().all(|(_, o)| o.is_top())
    }

    pub fn bottom_indices(&self) -> Vec<usize> {
        self.outputs
            .iter()
            .enumerate()
            .filter(|(_, (_, o))| !o.is_top())
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn run(a: &TimedTransducer, w: &TimedWord) -> Result<RunResult, TransducerError> {
    if w.is_empty() {
        return Err(TransducerError::EmptyWord);
    }
    let mut st = a.initial_state();
    let mut outputs = Vec::with_capacity(w.len());
    let mut steps = Vec::with_capacity(w.len());
    for (index, ev) in w.events.iter().enumerate() {
        let (next, out) = make_transition(a, &st, ev).map_err(|e| TransducerError::AtEvent {
            index,
            source: Box::new(e),
        })?;
        outputs.push((ev.time.clone(), out.clone()));
        steps.push(RunStep {
            time: ev.time.clone(),
            action: ev.action.clone(),
            from: st,
            to: next.clone(),
            output: out,
        });
        st = next;
    }
    let accepted = a.accepting.contains(&st.location);
    Ok(RunResult {
        outputs,
        steps,
        final_state: st,
        accepted,
    })
}
