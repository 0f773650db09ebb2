//! The enforcement loop: encode, step the transducer, and correct the
//! signal wherever the transducer answers `⊥`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::encoder::{sign_encode, EncodeError, TimedEvent, TimedWord, Valuation};
use crate::monitor::{satisfies, MonitorError};
use crate::modifier::{modify, ModificationRequest, ModificationResult, ModifyError};
use crate::rational::Rational;
use crate::signal::{Sample, Signal, SignalError};
use crate::stl::{predicates, Predicate, StlFormula};
use crate::transducer::{compile, step, OutputSymbol, TimedTransducer, TransducerError, TransducerState};

#[derive(Debug, Error)]
pub enum EnforceError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Transducer(#[from] TransducerError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("event {index} at t={time}: {source}")]
    Modify {
        index: usize,
        time: Rational,
        source: ModifyError,
    },
    #[error("the corrected word has no continuous realization")]
    Unrealizable,
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("no progress in enforcement near t={time}")]
    Diverged { time: Rational },
    #[error("event {index} at t={time} does not come after t={last}")]
    OutOfOrder {
        index: usize,
        time: Rational,
        last: Rational,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: Rational,
    pub action: Valuation,
    pub from: String,
    pub to: String,
    /// Clock values on arrival, before resets.
    pub clock: BTreeMap<String, Rational>,
    #[serde(serialize_with = "display")]
    pub output: OutputSymbol,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modification: Option<ModificationResult>,
}

fn display<S: serde::Serializer>(o: &OutputSymbol, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(o)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnforcementReport {
    pub accepted: bool,
    pub events: Vec<EventRecord>,
    pub modified_count: usize,
}

impl EnforcementReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Alternative valuations are only searched up to this many predicates.
pub const MAX_DETOUR_PREDICATES: usize = 12;

/// Event-at-a-time enforcement against one transducer.
pub struct Session {
    transducer: TimedTransducer,
    predicates: Vec<Predicate>,
    eps: Rational,
    state: TransducerState,
    records: Vec<EventRecord>,
}

impl Session {
    pub fn new(phi: &StlFormula, eps: Rational) -> Result<Session, EnforceError> {
        let transducer = compile(phi)?;
        let state = transducer.initial_state();
        Ok(Session {
            transducer,
            predicates: predicates(phi),
            eps,
            state,
            records: Vec::new(),
        })
    }

    pub fn transducer(&self) -> &TimedTransducer {
        &self.transducer
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    /// Steps on `ev`, whose signal value is `point`, and on `⊥` computes
    /// the corrected value of `point`.
    pub fn push(
        &mut self,
        ev: &TimedEvent,
        point: &BTreeMap<String, Rational>,
    ) -> Result<&EventRecord, EnforceError> {
        let index = self.records.len();
        if let Some(last) = &self.state.last_time {
            if &ev.time <= last {
                return Err(EnforceError::OutOfOrder {
                    index,
                    time: ev.time.clone(),
                    last: last.clone(),
                });
            }
        }
        let delta = match &self.state.last_time {
            Some(last) => &ev.time - last,
            None => ev.time.clone(),
        };
        let clock = self
            .state
            .clocks
            .iter()
            .map(|(c, v)| (c.clone(), v + &delta))
            .collect();
        let (next, taken) = step(&self.transducer, &self.state, ev)
            .map_err(|e| TransducerError::AtEvent {
                index,
                source: Box::new(e),
            })?;
        let mut next = next;
        let mut output = taken.output.clone();
        let modification = match output.fix_set() {
            Some(fix) => match correct(&self.predicates, point, &ev.action, fix, &self.eps) {
                Ok(m) => Some(m),
                Err(source @ ModifyError::Infeasible { .. }) => {
                    let Some((state, flips, m)) = self.detour(ev, point)? else {
                        return Err(EnforceError::Modify {
                            index,
                            time: ev.time.clone(),
                            source,
                        });
                    };
                    // Keep holding what was to be held, unless the run is
                    // already settled.
                    let held = matches!(&output, OutputSymbol::Bottom { hold, .. } if !hold.is_empty());
                    let hold = if held && !self.settled(&state.location) {
                        flips.clone()
                    } else {
                        BTreeSet::new()
                    };
                    next = state;
                    output = OutputSymbol::Bottom { fix: flips, hold };
                    Some(m)
                }
                Err(source) => {
                    return Err(EnforceError::Modify {
                        index,
                        time: ev.time.clone(),
                        source,
                    })
                }
            },
            None => None,
        };
        self.records.push(EventRecord {
            t: ev.time.clone(),
            action: ev.action.clone(),
            from: self.state.location.clone(),
            to: next.location.clone(),
            clock,
            output,
            modification,
        });
        self.state = next;
        Ok(self.records.last().expect("just pushed"))
    }

    /// The transducer picks fixes over predicate truth values alone, so a
    /// fix can ask for a combination no value realizes (`y < 0.2` while
    /// keeping `y > 0.3`). Then the nearest valuation, by number of flips
    /// and then by distance, that the transducer answers with `⊤` from the
    /// current state is used instead.
    fn detour(
        &self,
        ev: &TimedEvent,
        point: &BTreeMap<String, Rational>,
    ) -> Result<Option<(TransducerState, BTreeSet<String>, ModificationResult)>, EnforceError> {
        let ids: Vec<&String> = ev.action.bits().keys().collect();
        if ids.len() > MAX_DETOUR_PREDICATES {
            return Ok(None);
        }
        let mut masks: Vec<u32> = (1..1u32 << ids.len()).collect();
        masks.sort_by_key(|m| m.count_ones());
        let mut best: Option<(u32, TransducerState, BTreeSet<String>, ModificationResult)> = None;
        for m in masks {
            if best.as_ref().is_some_and(|b| b.0 < m.count_ones()) {
                break;
            }
            let flips: BTreeSet<String> = ids
                .iter()
                .enumerate()
                .filter(|(k, _)| m & (1 << k) != 0)
                .map(|(_, id)| (*id).clone())
                .collect();
            let alt = TimedEvent {
                action: ev.action.flipped(&flips),
                ..ev.clone()
            };
            let Ok((state, t)) = step(&self.transducer, &self.state, &alt) else {
                continue;
            };
            if !t.output.is_top() {
                continue;
            }
            let Ok(r) = correct(&self.predicates, point, &ev.action, &flips, &self.eps) else {
                continue;
            };
            if best.as_ref().is_none_or(|b| r.distance_squared() < b.3.distance_squared()) {
                best = Some((m.count_ones(), state, flips, r));
            }
        }
        Ok(best.map(|(_, state, flips, r)| (state, flips, r)))
    }

    /// Accepting, and every transition out of it is a `⊤` self-loop.
    fn settled(&self, location: &str) -> bool {
        self.transducer.accepting().contains(location)
            && self
                .transducer
                .outgoing(location)
                .all(|t| t.dst == location && t.output.is_top())
    }

    pub fn accepted(&self) -> bool {
        self.transducer.accepting().contains(&self.state.location)
    }

    pub fn finish(self) -> EnforcementReport {
        let accepted = self.accepted();
        let modified_count = self.records.iter().filter(|r| !r.output.is_top()).count();
        EnforcementReport {
            accepted,
            events: self.records,
            modified_count,
        }
    }
}

fn truth(p: &Predicate, point: &BTreeMap<String, Rational>) -> Result<bool, ModifyError> {
    let mu = p
        .expr
        .eval(point)
        .map_err(|_| ModifyError::MissingVariable(p.support().next().unwrap_or_default().to_string()))?;
    Ok(p.holds_for(&mu))
}

/// Moves `point` so every predicate in `fix` takes the opposite of its
/// truth in `action`. Predicates already there are kept as they are.
fn correct(
    preds: &[Predicate],
    point: &BTreeMap<String, Rational>,
    action: &Valuation,
    fix: &BTreeSet<String>,
    eps: &Rational,
) -> Result<ModificationResult, ModifyError> {
    let mut own = BTreeMap::new();
    let mut violated = BTreeSet::new();
    for p in preds {
        let now = truth(p, point)?;
        match action.get(&p.id) {
            Some(a) if fix.contains(&p.id) => {
                if now == a {
                    violated.insert(p.id.clone());
                }
            }
            Some(_) => {}
            None => return Err(ModifyError::MissingPredicate(p.id.clone())),
        }
        own.insert(p.id.clone(), now);
    }
    if violated.is_empty() {
        // Already corrected: report the identity over the fixed variables.
        let mut vars: Vec<String> = preds
            .iter()
            .filter(|p| fix.contains(&p.id))
            .flat_map(|p| p.support().map(str::to_string).collect::<Vec<_>>())
            .collect();
        vars.sort();
        vars.dedup();
        let old: Vec<Rational> = vars.iter().map(|v| point[v].clone()).collect();
        return Ok(ModificationResult::identity(vars, old));
    }
    let req = ModificationRequest {
        point: point.clone(),
        action: Valuation(own),
        fix: violated,
        predicates: preds.to_vec(),
    };
    let first = modify(&req, eps);
    if !matches!(first, Err(ModifyError::Infeasible { .. })) {
        return first;
    }
    // The point's own truth values do not combine with the fix (it may sit
    // exactly on a crossing); ask for the corrected action instead.
    modify(
        &ModificationRequest {
            action: action.clone(),
            fix: fix.clone(),
            ..req
        },
        eps,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enforced {
    pub signal: Signal,
    pub report: EnforcementReport,
}

struct GridPoint {
    time: Rational,
    values: Vec<Rational>,
    original: bool,
    moved: bool,
}

fn as_point(vars: &[String], values: &[Rational]) -> BTreeMap<String, Rational> {
    vars.iter().cloned().zip(values.iter().cloned()).collect()
}

/// Enforces `phi` on `s`.
///
/// The report is the run on the encoding of `s`, event by event, exactly as
/// a [`Session`] fed the same events would produce it. The output signal is
/// built by [`realize`].
pub fn enforce(s: &Signal, phi: &StlFormula, eps: &Rational) -> Result<Enforced, EnforceError> {
    let word = sign_encode(s, phi)?;
    let mut session = Session::new(phi, eps.clone())?;
    for ev in &word.events {
        session.push(ev, &s.point_at(&ev.time)?)?;
    }
    Ok(Enforced {
        signal: realize(s, phi, eps)?,
        report: session.finish(),
    })
}

/// Builds the enforced signal. On every `⊥` the samples that violate the
/// fixed predicates are projected: over the whole segment up to the next
/// event for predicates that must keep holding, at the event instant
/// otherwise.
///
/// The transducer here steps on the signal being produced rather than on
/// the input: after each correction the working signal is encoded again,
/// so the interpolation between a corrected sample and its neighbours is
/// seen before the next step. Without this, a value held at a threshold
/// up to a crossing ramps back through states the input never visited.
///
/// The result is checked with the monitor. A word the transducer accepts
/// can still lack a continuous realization (operands that are only both
/// true across a crossing); that ends in [`EnforceError::Unrealizable`].
pub fn realize(s: &Signal, phi: &StlFormula, eps: &Rational) -> Result<Signal, EnforceError> {
    let mut session = Session::new(phi, eps.clone())?;
    let vars = s.variables().to_vec();
    let mut grid: Vec<GridPoint> = s
        .samples()
        .iter()
        .map(|x| GridPoint {
            time: x.time.clone(),
            values: x.values.clone(),
            original: true,
            moved: false,
        })
        .collect();
    let mut word = sign_encode(s, phi)?;
    insert_events(&mut grid, &vars, &word)?;
    let budget = 16 * (grid.len() + 16);
    let mut next = 0;
    // Set when the last step was a held correction that moved its boundary.
    let mut pending = false;
    while let Some(ev) = word.events.get(next).cloned() {
        if session.records().len() > budget {
            return Err(EnforceError::Diverged { time: ev.time });
        }
        let i = session.records().len();
        let at = grid.partition_point(|g| g.time < ev.time);
        let raw = as_point(&vars, &grid[at].values);
        let record = session.push(&ev, &raw)?;
        let chained = std::mem::take(&mut pending);
        let OutputSymbol::Bottom { fix, hold } = &record.output else {
            next += 1;
            continue;
        };
        let (fix, hold) = (fix.clone(), hold.clone());
        let mut end = word.events.get(next + 1).map_or(&ev.time, |e| &e.time).clone();
        if chained && !hold.is_empty() {
            // Forcing the boundary again would only move the crossing a
            // little later each time (with a margin, not even onto the
            // boundary); hold to the end of the linear piece.
            if let Some(b) = grid[at + 1..].iter().find(|g| g.original || g.moved) {
                end = end.max(b.time.clone());
            }
        }
        let hi = grid.partition_point(|g| g.time <= end);
        let mut changed = false;
        for k in at..hi {
            let active = if k == at { &fix } else { &hold };
            let moved = project(&mut grid[k], &vars, session.predicates(), &ev.action, active, eps, i)?;
            changed |= moved;
            if moved && k + 1 == hi && k > at && !hold.is_empty() {
                pending = true;
            }
        }
        if changed {
            word = sign_encode(&working(&vars, &grid)?, phi)?;
            insert_events(&mut grid, &vars, &word)?;
        }
        // The corrected valuation has to hold together, at the instant or
        // just after it. A crossing at t_i can leave it split between the
        // two; then the fix is carried to the end of the linear piece.
        let want = ev.action.flipped(&fix);
        let preds = session.predicates();
        if at + 1 < grid.len()
            && valuation(preds, &vars, &grid[at].values) != want
            && valuation(preds, &vars, &midpoint(&grid[at], &grid[at + 1])) != want
        {
            let b = at + 1 + grid[at + 1..].iter().position(|g| g.original || g.moved).unwrap_or(0);
            let mut moved = false;
            for g in &mut grid[at + 1..=b] {
                let mut point = as_point(&vars, &g.values);
                let req = ModificationRequest {
                    point: point.clone(),
                    action: ev.action.clone(),
                    fix: fix.clone(),
                    predicates: preds.to_vec(),
                };
                // A contradictory corrected valuation keeps only the fix.
                match modify(&req, eps) {
                    Ok(m) if m.is_identity() => {}
                    Ok(m) => {
                        m.apply(&mut point);
                        g.values = vars.iter().map(|v| point[v].clone()).collect();
                        g.moved = true;
                        moved = true;
                    }
                    Err(ModifyError::Infeasible { .. }) => {
                        moved |= project(g, &vars, preds, &ev.action, &fix, eps, i)?;
                    }
                    Err(source) => {
                        return Err(EnforceError::Modify {
                            index: i,
                            time: g.time.clone(),
                            source,
                        })
                    }
                }
            }
            if moved {
                changed = true;
                word = sign_encode(&working(&vars, &grid)?, phi)?;
                insert_events(&mut grid, &vars, &word)?;
            }
        }
        if changed {
            next = word.events.partition_point(|e| e.time <= ev.time);
        } else {
            next += 1;
        }
    }
    let out = Signal::new(vars, simplify(grid))?;
    if !satisfies(&out, phi)?.satisfied {
        return Err(EnforceError::Unrealizable);
    }
    Ok(out)
}

/// Truth of every predicate at a grid value. The encoder has already checked
/// that the signal carries each predicate's variables.
fn valuation(preds: &[Predicate], vars: &[String], values: &[Rational]) -> Valuation {
    let point = as_point(vars, values);
    Valuation(
        preds
            .iter()
            .map(|p| (p.id.clone(), truth(p, &point).expect("encoded signal")))
            .collect(),
    )
}

fn midpoint(a: &GridPoint, b: &GridPoint) -> Vec<Rational> {
    a.values.iter().zip(&b.values).map(|(x, y)| x.midpoint(y)).collect()
}

/// Corrects one grid point; true if it moved.
fn project(
    g: &mut GridPoint,
    vars: &[String],
    preds: &[Predicate],
    action: &Valuation,
    active: &BTreeSet<String>,
    eps: &Rational,
    index: usize,
) -> Result<bool, EnforceError> {
    if active.is_empty() {
        return Ok(false);
    }
    let mut point = as_point(vars, &g.values);
    let m = match correct(preds, &point, action, active, eps) {
        // Inside a held segment only the held predicates are owed; the next
        // step sees whatever else changed.
        Err(ModifyError::Infeasible { .. }) => modify(
            &ModificationRequest {
                point: point.clone(),
                action: action.clone(),
                fix: active.clone(),
                predicates: preds.iter().filter(|p| active.contains(&p.id)).cloned().collect(),
            },
            eps,
        ),
        other => other,
    }
    .map_err(|source| EnforceError::Modify {
        index,
        time: g.time.clone(),
        source,
    })?;
    if m.is_identity() {
        return Ok(false);
    }
    m.apply(&mut point);
    g.values = vars.iter().map(|v| point[v].clone()).collect();
    g.moved = true;
    Ok(true)
}

fn working(vars: &[String], grid: &[GridPoint]) -> Result<Signal, SignalError> {
    let samples = grid
        .iter()
        .map(|g| Sample {
            time: g.time.clone(),
            values: g.values.clone(),
        })
        .collect();
    Signal::new(vars.to_vec(), samples)
}

/// Adds a grid point at every event time not already sampled.
fn insert_events(grid: &mut Vec<GridPoint>, vars: &[String], word: &TimedWord) -> Result<(), SignalError> {
    let missing: Vec<&Rational> = word
        .events
        .iter()
        .map(|e| &e.time)
        .filter(|t| grid.binary_search_by(|g| g.time.cmp(t)).is_err())
        .collect();
    if missing.is_empty() {
        return Ok(());
    }
    let snapshot = working(vars, grid)?;
    for t in missing {
        let k = grid.partition_point(|g| &g.time < t);
        grid.insert(
            k,
            GridPoint {
                time: t.clone(),
                values: snapshot.value_at(t)?,
                original: false,
                moved: false,
            },
        );
    }
    Ok(())
}

/// Drops inserted samples that lie on the line through their neighbours.
fn simplify(grid: Vec<GridPoint>) -> Vec<Sample> {
    let mut out: Vec<Sample> = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let g = &grid[k];
        if !g.original {
            if let (Some(prev), Some(next)) = (out.last(), grid.get(k + 1)) {
                let w = (&g.time - &prev.time) / (&next.time - &prev.time);
                let on_line = prev
                    .values
                    .iter()
                    .zip(&next.values)
                    .zip(&g.values)
                    .all(|((a, b), x)| &(a + &(&w * &(b - a))) == x);
                if on_line {
                    continue;
                }
            }
        }
        out.push(Sample {
            time: g.time.clone(),
            values: g.values.clone(),
        });
    }
    out
}
