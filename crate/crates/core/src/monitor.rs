//! Offline satisfaction checking over piecewise-linear signals.
//!
//! Deliberately shares no code with the encoder: roots of every predicate
//! are recomputed here per segment, and the quantifiers of `U`/`R` are
//! decided over the finite partition of time those roots induce.

use serde::Serialize;
use thiserror::Error;

use crate::rational::Rational;
use crate::signal::Signal;
use crate::stl::{BoolOp, BoundAffine, Interval, Predicate, StateFormula, StlError, StlFormula, TemporalOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("formula horizon {horizon} exceeds signal duration {duration}")]
    HorizonExceedsDuration { horizon: Rational, duration: Rational },
    #[error(transparent)]
    Stl(#[from] StlError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub satisfied: bool,
    /// Until: the instant the right operand is met. Release: an instant
    /// where it fails unreleased.
    pub witness: Option<Rational>,
}

impl Verdict {
    fn plain(satisfied: bool) -> Self {
        Verdict {
            satisfied,
            witness: None,
        }
    }
}

pub fn satisfies(s: &Signal, phi: &StlFormula) -> Result<Verdict, MonitorError> {
    let horizon = phi.horizon();
    if &horizon > s.duration() {
        return Err(MonitorError::HorizonExceedsDuration {
            horizon,
            duration: s.duration().clone(),
        });
    }
    eval(s, phi)
}

fn eval(s: &Signal, phi: &StlFormula) -> Result<Verdict, MonitorError> {
    match phi {
        StlFormula::True => Ok(Verdict::plain(true)),
        StlFormula::Temporal {
            op,
            left,
            interval,
            right,
        } => temporal(s, *op, left, interval, right),
        StlFormula::Binary(op, a, b) => {
            let va = eval(s, a)?;
            let vb = eval(s, b)?;
            Ok(match op {
                BoolOp::And if !va.satisfied => va,
                BoolOp::And => vb,
                BoolOp::Or if va.satisfied => va,
                BoolOp::Or => vb,
            })
        }
    }
}

/// Times in `[0, end]` where `mu` may change sign along the signal.
fn roots(s: &Signal, mu: &BoundAffine, end: &Rational) -> Vec<Rational> {
    let mut out = Vec::new();
    for w in s.samples().windows(2) {
        let (t0, t1) = (&w[0].time, &w[1].time);
        if t0 > end {
            break;
        }
        let (m0, m1) = (mu.eval(&w[0].values), mu.eval(&w[1].values));
        if m0.is_zero() {
            out.push(t0.clone());
        }
        if m1.is_zero() {
            out.push(t1.clone());
        }
        if (m0.is_positive() && m1.is_negative()) || (m0.is_negative() && m1.is_positive()) {
            // m0 + (m1 - m0) * u = 0
            let u = -&m0 / (&m1 - &m0);
            out.push(t0 + &(u * (t1 - t0)));
        }
    }
    out
}

struct Operand<'a> {
    formula: &'a StateFormula,
    preds: Vec<(Predicate, BoundAffine)>,
}

impl<'a> Operand<'a> {
    fn new(s: &Signal, formula: &'a StateFormula) -> Result<Self, StlError> {
        let preds = formula
            .predicates()
            .into_iter()
            .map(|p| {
                let b = p.expr.bind(s.variables())?;
                Ok((p, b))
            })
            .collect::<Result<_, StlError>>()?;
        Ok(Operand { formula, preds })
    }

    fn holds(&self, values: &[Rational]) -> bool {
        let bits = self
            .preds
            .iter()
            .map(|(p, mu)| (p.id.clone(), p.holds_for(&mu.eval(values))))
            .collect();
        self.formula.eval_bits(&bits)
    }
}

fn temporal(
    s: &Signal,
    op: TemporalOp,
    left: &StateFormula,
    interval: &Interval,
    right: &StateFormula,
) -> Result<Verdict, MonitorError> {
    let (a, b) = (Operand::new(s, left)?, Operand::new(s, right)?);
    let end = interval.hi();
    let mut cuts: Vec<Rational> = vec![Rational::zero(), interval.lo().clone(), end.clone()];
    cuts.extend(s.times().filter(|t| *t <= end).cloned());
    for (_, mu) in a.preds.iter().chain(&b.preds) {
        cuts.extend(roots(s, mu, end));
    }
    cuts.sort();
    cuts.dedup();
    // Each cut, followed by a point inside the open gap up to the next one.
    let mut probes = Vec::with_capacity(2 * cuts.len());
    for (i, t) in cuts.iter().enumerate() {
        probes.push(t.clone());
        if let Some(next) = cuts.get(i + 1) {
            probes.push(t.midpoint(next));
        }
    }

    let mut seen_left = false;
    for t in probes {
        let x = s.value_at(&t).expect("probe within duration");
        let (in_a, in_b) = (a.holds(&x), b.holds(&x));
        match op {
            TemporalOp::Until => {
                if !in_a {
                    return Ok(Verdict::plain(false));
                }
                if in_b && interval.contains(&t) {
                    return Ok(Verdict {
                        satisfied: true,
                        witness: Some(t),
                    });
                }
            }
            TemporalOp::Release => {
                seen_left |= in_a;
                if seen_left {
                    return Ok(Verdict::plain(true));
                }
                if !in_b && interval.contains(&t) {
                    return Ok(Verdict {
                        satisfied: false,
                        witness: Some(t),
                    });
                }
            }
        }
    }
    Ok(Verdict::plain(op == TemporalOp::Release))
}
