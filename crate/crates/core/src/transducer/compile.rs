use super::{
    build_release_operands, build_until_operands, product, Guard, Label, OutputSymbol,
    ProductOp, TimedTransducer, Transition, TransducerError,
};
use crate::stl::{BoolOp, StlFormula, TemporalOp};

/// One accepting location that answers `⊤` to everything.
pub fn trivial() -> TimedTransducer {
    TimedTransducer::new(
        vec!["l0".into()],
        "l0".into(),
        ["l0".to_string()],
        Vec::new(),
        Vec::new(),
        vec![Transition {
            src: "l0".into(),
            label: Label::Sigma,
            guard: Guard::always(),
            resets: Vec::new(),
            dst: "l0".into(),
            output: OutputSymbol::Top,
        }],
    )
    .expect("well-formed")
}

/// Builds the transducer of a formula by composing the transducers of its
/// temporal terms along the `and`/`or` structure.
pub fn compile(phi: &StlFormula) -> Result<TimedTransducer, TransducerError> {
    if !phi.has_temporal() {
        return Err(TransducerError::NoTemporalTerm);
    }
    go(phi)
}

fn go(phi: &StlFormula) -> Result<TimedTransducer, TransducerError> {
    match phi {
        StlFormula::True => Ok(trivial()),
        StlFormula::Temporal {
            op,
            left,
            interval,
            right,
        } => match op {
            TemporalOp::Until => build_until_operands(left, right, interval),
            TemporalOp::Release => build_release_operands(left, right, interval),
        },
        StlFormula::Binary(op, a, b) => {
            let op = match op {
                BoolOp::And => ProductOp::And,
                BoolOp::Or => ProductOp::Or,
            };
            product(&go(a)?, &go(b)?, op)
        }
    }
}
