use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClockAtom, ClockOp, Guard, Label, OutputSymbol, TimedTransducer, Transition, TransducerError};
use crate::rational::Rational;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    locations: Vec<String>,
    initial: String,
    accepting: Vec<String>,
    clocks: Vec<String>,
    predicates: Vec<String>,
    transitions: Vec<TransitionDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelDoc {
    Sigma(String),
    Cube(BTreeMap<String, bool>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomDoc {
    clock: String,
    op: String,
    bound: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputDoc {
    top: bool,
    #[serde(default)]
    fix: Vec<String>,
    #[serde(default)]
    hold: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    src: String,
    label: LabelDoc,
    guard: Vec<AtomDoc>,
    resets: Vec<String>,
    dst: String,
    output: OutputDoc,
}

impl TimedTransducer {
    pub fn to_json(&self) -> String {
        let doc = Doc {
            locations: self.locations.clone(),
            initial: self.initial.clone(),
            accepting: self.accepting.iter().cloned().collect(),
            clocks: self.clocks.clone(),
            predicates: self.predicates.clone(),
            transitions: self
                .transitions
                .iter()
                .map(|t| TransitionDoc {
                    src: t.src.clone(),
                    label: match &t.label {
                        Label::Sigma => LabelDoc::Sigma("*".into()),
                        Label::Cube(c) => LabelDoc::Cube(c.clone()),
                    },
                    guard: t
                        .guard
                        .0
                        .iter()
                        .map(|a| AtomDoc {
                            clock: a.clock.clone(),
                            op: a.op.symbol().into(),
                            bound: a.bound.clone(),
                        })
                        .collect(),
                    resets: t.resets.clone(),
                    dst: t.dst.clone(),
                    output: match &t.output {
                        OutputSymbol::Top => OutputDoc {
                            top: true,
                            fix: Vec::new(),
                            hold: Vec::new(),
                        },
                        OutputSymbol::Bottom { fix, hold } => OutputDoc {
                            top: false,
                            fix: fix.iter().cloned().collect(),
                            hold: hold.iter().cloned().collect(),
                        },
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<TimedTransducer, TransducerError> {
        let err = |m: String| TransducerError::Json(m);
        let doc: Doc = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let mut transitions = Vec::with_capacity(doc.transitions.len());
        for (i, t) in doc.transitions.into_iter().enumerate() {
            let label = match t.label {
                LabelDoc::Sigma(s) if s == "*" => Label::Sigma,
                LabelDoc::Sigma(s) => return Err(err(format!("transition {i}: bad label `{s}`"))),
                LabelDoc::Cube(c) => Label::Cube(c),
            };
            let mut atoms = Vec::with_capacity(t.guard.len());
            for a in t.guard {
                let op = ClockOp::from_symbol(&a.op)
                    .ok_or_else(|| err(format!("transition {i}: bad clock operator `{}`", a.op)))?;
                atoms.push(ClockAtom {
                    clock: a.clock,
                    op,
                    bound: a.bound,
                });
            }
            let output = if t.output.top {
                if !t.output.fix.is_empty() {
                    return Err(err(format!("transition {i}: top output with fix set")));
                }
                OutputSymbol::Top
            } else {
                OutputSymbol::Bottom {
                    fix: t.output.fix.into_iter().collect(),
                    hold: t.output.hold.into_iter().collect(),
                }
            };
            transitions.push(Transition {
                src: t.src,
                label,
                guard: Guard(atoms),
                resets: t.resets,
                dst: t.dst,
                output,
            });
        }
        TimedTransducer::new(
            doc.locations,
            doc.initial,
            doc.accepting,
            doc.clocks,
            doc.predicates,
            transitions,
        )
    }
}
