//! Turns a signal into a timed word: one event per variable point or
//! relevant point, labelled with the truth of every predicate.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::signal::Signal;
use crate::stl::{predicates, relevant_points, BoundAffine, Predicate, StlError, StlFormula};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("signal shorter than formula horizon ({duration} < {horizon})")]
    SignalTooShort { duration: Rational, horizon: Rational },
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("lead time must be non-negative")]
    NegativeLead,
}

/// Truth value of every predicate, keyed by predicate id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Valuation(pub BTreeMap<String, bool>);

impl Valuation {
    pub fn get(&self, id: &str) -> Option<bool> {
        self.0.get(id).copied()
    }

    pub fn set(&mut self, id: &str, value: bool) {
        self.0.insert(id.to_string(), value);
    }

    pub fn bits(&self) -> &BTreeMap<String, bool> {
        &self.0
    }

    /// Copy with the given predicates negated.
    pub fn flipped<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Valuation {
        let mut v = self.clone();
        for id in ids {
            if let Some(b) = v.0.get_mut(id) {
                *b = !*b;
            }
        }
        v
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "true");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(id, b)| if *b { id.clone() } else { format!("!{id}") })
            .collect();
        write!(f, "{}", parts.join(" & "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    VariablePoint,
    RelevantPoint,
    Both,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::VariablePoint => "variable",
            EventKind::RelevantPoint => "relevant",
            EventKind::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub time: Rational,
    pub action: Valuation,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TimedWord {
    pub events: Vec<TimedEvent>,
}

impl TimedWord {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> Vec<Rational> {
        self.events.iter().map(|e| e.time.clone()).collect()
    }

    /// `time,kind,p1,p2,...` with 0/1 bits.
    pub fn to_csv(&self, ids: &[String]) -> String {
        let mut out = String::from("time,kind");
        for id in ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for e in &self.events {
            out.push_str(&format!("{},{}", e.time, e.kind));
            for id in ids {
                let bit = e.action.get(id).unwrap_or(false);
                out.push_str(if bit { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

/// `μ_p` along the signal: linear between consecutive sample times.
pub(crate) struct MuTrack<'a> {
    times: Vec<&'a Rational>,
    mu: Vec<Rational>,
}

impl<'a> MuTrack<'a> {
    pub(crate) fn new(signal: &'a Signal, pred: &Predicate) -> Result<Self, StlError> {
        let bound: BoundAffine = pred.expr.bind(signal.variables())?;
        Ok(MuTrack {
            times: signal.times().collect(),
            mu: signal.samples().iter().map(|s| bound.eval(&s.values)).collect(),
        })
    }

    pub(crate) fn at(&self, t: &Rational) -> Rational {
        let i = self.times.partition_point(|s| *s <= t);
        if i == 0 {
            return self.mu[0].clone();
        }
        let i = i - 1;
        if self.times[i] == t || i + 1 == self.times.len() {
            return self.mu[i].clone();
        }
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let w = (t - ta) / (tb - ta);
        &self.mu[i] + &(w * (&self.mu[i + 1] - &self.mu[i]))
    }

    /// Times where `μ_p = 0` isolated on a segment plus endpoints of zero runs.
    fn zeros(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        for i in 0..self.mu.len() {
            if self.mu[i].is_zero() {
                out.push(self.times[i].clone());
            }
            if i + 1 < self.mu.len() {
                let (a, b) = (&self.mu[i], &self.mu[i + 1]);
                if (a.is_positive() && b.is_negative()) || (a.is_negative() && b.is_positive()) {
                    let (ta, tb) = (self.times[i], self.times[i + 1]);
                    out.push(ta + &(a / (a - b) * (tb - ta)));
                }
            }
        }
        out
    }
}

/// Truth immediately before, at, and immediately after a time.
struct Sides {
    before: Option<bool>,
    at: bool,
    after: Option<bool>,
}

fn sides(track: &MuTrack, pred: &Predicate, grid: &[Rational], k: usize) -> Sides {
    let t = &grid[k];
    let holds = |x: &Rational| pred.holds_for(&track.at(x));
    Sides {
        before: (k > 0).then(|| holds(&grid[k - 1].midpoint(t))),
        at: holds(t),
        after: grid.get(k + 1).map(|n| holds(&t.midpoint(n))),
    }
}

impl Sides {
    fn changes(&self) -> bool {
        self.before.is_some_and(|b| b != self.at) || self.after.is_some_and(|a| a != self.at)
    }

    /// Isolated instants keep their own value; otherwise a change reports
    /// the value that holds from here on.
    fn action(&self) -> bool {
        let isolated = matches!((self.before, self.after), (Some(b), Some(a)) if b != self.at && a != self.at);
        match self.after {
            Some(a) if self.changes() && !isolated => a,
            _ => self.at,
        }
    }
}

fn sorted_grid(signal: &Signal, tracks: &[MuTrack], extra: &[Rational]) -> Vec<Rational> {
    let mut grid: Vec<Rational> = signal.times().cloned().collect();
    for tr in tracks {
        grid.extend(tr.zeros());
    }
    grid.extend(extra.iter().cloned());
    grid.sort();
    grid.dedup();
    grid
}

/// Times in `(0, duration)` where the truth of `p` along `s` changes.
pub fn variable_points(s: &Signal, p: &Predicate) -> Result<Vec<Rational>, EncodeError> {
    let track = MuTrack::new(s, p)?;
    let grid = sorted_grid(s, std::slice::from_ref(&track), &[]);
    let last = grid.len() - 1;
    Ok((1..last)
        .filter(|&k| sides(&track, p, &grid, k).changes())
        .map(|k| grid[k].clone())
        .collect())
}

/// Encodes `s` against `φ`. See [`sign_encode_with_lead`].
pub fn sign_encode(s: &Signal, phi: &StlFormula) -> Result<TimedWord, EncodeError> {
    sign_encode_with_lead(s, phi, &Rational::zero())
}

/// Encodes `s` against `φ`, emitting variable-point events up to `lead`
/// time units early (never before the preceding event). Relevant points
/// are never moved.
pub fn sign_encode_with_lead(
    s: &Signal,
    phi: &StlFormula,
    lead: &Rational,
) -> Result<TimedWord, EncodeError> {
    if lead.is_negative() {
        return Err(EncodeError::NegativeLead);
    }
    let preds = predicates(phi);
    let mut rp = relevant_points(phi);
    if let Some(horizon) = rp.last() {
        if horizon > s.duration() {
            return Err(EncodeError::SignalTooShort {
                duration: s.duration().clone(),
                horizon: horizon.clone(),
            });
        }
    }
    rp.push(Rational::zero());
    rp.sort();
    rp.dedup();

    let tracks = preds
        .iter()
        .map(|p| MuTrack::new(s, p))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = sorted_grid(s, &tracks, &rp);
    let last = grid.len() - 1;

    let mut events: Vec<TimedEvent> = Vec::new();
    for k in 0..grid.len() {
        let t = &grid[k];
        let per_pred: Vec<Sides> = preds
            .iter()
            .zip(&tracks)
            .map(|(p, tr)| sides(tr, p, &grid, k))
            .collect();
        let variable = k > 0 && k < last && per_pred.iter().any(Sides::changes);
        let relevant = rp.binary_search(t).is_ok();
        let kind = match (variable, relevant) {
            (true, true) => EventKind::Both,
            (true, false) => EventKind::VariablePoint,
            (false, true) => EventKind::RelevantPoint,
            (false, false) => continue,
        };
        let action = Valuation(
            preds
                .iter()
                .zip(&per_pred)
                .map(|(p, sd)| (p.id.clone(), sd.action()))
                .collect(),
        );
        let mut time = t.clone();
        if kind == EventKind::VariablePoint && lead.is_positive() {
            let floor = events.last().map(|e| e.time.clone());
            let shifted = (t - lead).max(Rational::zero());
            time = match floor {
                Some(f) if shifted <= f => t.clone(),
                _ => shifted,
            };
        }
        events.push(TimedEvent { time, action, kind });
    }
    Ok(TimedWord { events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::stl::parse_formula;

    pub(crate) fn example_signal() -> Signal {
        Signal::parse_csv(
            "time,x1,x2\n0,0.6,0.9\n1,0.8,0.6\n2,0.8,0.1\n2.4,0.6,0.2\n4,0.8,0.15\n5,0.6,0.65\n",
        )
        .unwrap()
    }

    fn example_phi() -> StlFormula {
        parse_formula("(x1 >= 0.7) U[4,5] (x2 >= 0.5)").unwrap()
    }

    fn qs(xs: &[&str]) -> Vec<Rational> {
        xs.iter().map(|x| q(x)).collect()
    }

    #[test]
    fn running_example_variable_points() {
        let p1 = &predicates(&example_phi())[0];
        assert_eq!(
            variable_points(&example_signal(), p1).unwrap(),
            qs(&["0.5", "2.2", "3.2", "4.5"])
        );
    }

    #[test]
    fn running_example_word() {
        let w = sign_encode(&example_signal(), &example_phi()).unwrap();
        assert_eq!(
            w.times(),
            qs(&["0", "0.5", "1.2", "2.2", "3.2", "4", "4.5", "4.7", "5"])
        );
        let expected = [
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
        for (e, (a, b)) in w.events.iter().zip(expected) {
            assert_eq!(
                (e.action.get("p1"), e.action.get("p2")),
                (Some(a), Some(b)),
                "at {}",
                e.time
            );
        }
        assert_eq!(w.events[5].kind, EventKind::RelevantPoint);
        assert_eq!(w.events[1].kind, EventKind::VariablePoint);
    }

    #[test]
    fn constant_signal_has_only_relevant_points() {
        let s = Signal::parse_csv("time,x1,x2\n0,1,1\n6,1,1\n").unwrap();
        let p1 = &predicates(&example_phi())[0];
        assert!(variable_points(&s, p1).unwrap().is_empty());
        let w = sign_encode(&s, &example_phi()).unwrap();
        assert_eq!(w.times(), qs(&["0", "4", "5"]));
        assert!(w
            .events
            .iter()
            .all(|e| e.action.get("p1") == Some(true) && e.action.get("p2") == Some(true)));
    }

    #[test]
    fn exact_linear_crossing() {
        let s = Signal::parse_csv("time,x1\n0,0.6\n1,1.5\n").unwrap();
        let p1 = &predicates(&example_phi())[0];
        assert_eq!(variable_points(&s, p1).unwrap(), qs(&["1/9"]));
    }

    #[test]
    fn touches() {
        let phi = parse_formula("(v >= 1) U[0,4] (v == 0)").unwrap();
        let ps = predicates(&phi);
        // Touch from above: ≥ stays true.
        let s = Signal::parse_csv("time,v\n0,2\n1,1\n2,2\n4,2\n").unwrap();
        assert!(variable_points(&s, &ps[0]).unwrap().is_empty());
        // Equality reached and held: touch-on and touch-off instants.
        let s = Signal::parse_csv("time,v\n0,1\n1,0\n2,0\n3,1\n4,1\n").unwrap();
        assert_eq!(variable_points(&s, &ps[1]).unwrap(), qs(&["1", "2"]));
        let w = sign_encode(&s, &phi).unwrap();
        let at = |t: &str| w.events.iter().find(|e| e.time == q(t)).unwrap();
        assert_eq!(at("1").action.get("p2"), Some(true));
        assert_eq!(at("2").action.get("p2"), Some(false));
        // Transversal crossing of an equality is an isolated true instant.
        let s = Signal::parse_csv("time,v\n0,1\n2,-1\n4,-1\n").unwrap();
        let w = sign_encode(&s, &phi).unwrap();
        assert_eq!(w.events.iter().find(|e| e.time == q("1")).unwrap().action.get("p2"), Some(true));
    }

    #[test]
    fn horizon_check() {
        let s = Signal::parse_csv("time,x1,x2\n0,1,1\n4.9,1,1\n").unwrap();
        assert!(matches!(
            sign_encode(&s, &example_phi()),
            Err(EncodeError::SignalTooShort { .. })
        ));
    }

    #[test]
    fn lead_moves_only_variable_points() {
        let w = sign_encode_with_lead(&example_signal(), &example_phi(), &q("0.1")).unwrap();
        assert_eq!(
            w.times(),
            qs(&["0", "0.4", "1.1", "2.1", "3.1", "4", "4.4", "4.6", "5"])
        );
    }

    #[test]
    fn event_csv() {
        let s = Signal::parse_csv("time,x1,x2\n0,1,0\n6,1,0\n").unwrap();
        let w = sign_encode(&s, &example_phi()).unwrap();
        let csv = w.to_csv(&["p1".into(), "p2".into()]);
        assert_eq!(csv, "time,kind,p1,p2\n0,relevant,1,0\n4,relevant,1,0\n5,relevant,1,0\n");
    }
}
