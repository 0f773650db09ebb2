//! Minimal modification of a signal value so that a corrected predicate
//! valuation holds.

mod qp;
#[cfg(test)]
mod tests;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

pub use qp::{solve_qp, LinearConstraint, MAX_CONSTRAINTS};

use crate::encoder::Valuation;
use crate::rational::Rational;
use crate::stl::{AffineExpr, Comparison, Predicate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModifyError {
    #[error("no value satisfies {targets}")]
    Infeasible { targets: String },
    #[error("empty fix-set")]
    NothingToFix,
    #[error("action has no truth value for `{0}`")]
    MissingPredicate(String),
    #[error("point has no value for `{0}`")]
    MissingVariable(String),
    #[error("{0} constraints; at most {MAX_CONSTRAINTS} supported")]
    TooManyConstraints(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModificationRequest {
    pub point: BTreeMap<String, Rational>,
    pub action: Valuation,
    pub fix: BTreeSet<String>,
    pub predicates: Vec<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModificationResult {
    pub vars: Vec<String>,
    pub old: Vec<Rational>,
    pub new: Vec<Rational>,
    pub distance: f64,
    #[serde(skip)]
    distance_squared: Rational,
}

impl ModificationResult {
    /// No change over `vars`.
    pub fn identity(vars: Vec<String>, old: Vec<Rational>) -> Self {
        ModificationResult {
            vars,
            new: old.clone(),
            old,
            distance: 0.0,
            distance_squared: Rational::zero(),
        }
    }

    pub fn distance_squared(&self) -> &Rational {
        &self.distance_squared
    }

    pub fn is_identity(&self) -> bool {
        self.old == self.new
    }

    pub fn apply(&self, point: &mut BTreeMap<String, Rational>) {
        for (v, x) in self.vars.iter().zip(&self.new) {
            point.insert(v.clone(), x.clone());
        }
    }
}

/// Truth a predicate must have after the modification.
fn targets(req: &ModificationRequest) -> Result<Vec<(&Predicate, bool)>, ModifyError> {
    req.predicates
        .iter()
        .map(|p| {
            let now = req
                .action
                .get(&p.id)
                .ok_or_else(|| ModifyError::MissingPredicate(p.id.clone()))?;
            Ok((p, now != req.fix.contains(&p.id)))
        })
        .collect()
}

/// Alternatives (any one suffices) for `p` having truth `want`, over `vars`
/// with every other variable held at its value in `point`.
fn literal_constraints(
    p: &Predicate,
    want: bool,
    vars: &[String],
    point: &BTreeMap<String, Rational>,
    margin: &Rational,
) -> Result<Vec<LinearConstraint>, ModifyError> {
    let mut offset = p.expr.constant().clone();
    for (v, c) in p.expr.coefficients() {
        if !vars.contains(v) {
            let x = point.get(v).ok_or_else(|| ModifyError::MissingVariable(v.clone()))?;
            offset += &(c * x);
        }
    }
    let normal: Vec<Rational> = vars.iter().map(|v| p.expr.coefficient(v)).collect();
    let flipped: Vec<Rational> = normal.iter().map(|c| -c).collect();
    // normal·y + offset  >= 0, > 0, == 0 and their negations
    let above = |m: &Rational| LinearConstraint::at_least(normal.clone(), m - &offset);
    let below = |m: &Rational| LinearConstraint::at_least(flipped.clone(), &offset + m);
    let zero = Rational::zero();
    Ok(match (p.cmp, want) {
        (Comparison::Ge, true) => vec![above(&zero)],
        (Comparison::Ge, false) => vec![below(margin)],
        (Comparison::Gt, true) => vec![above(margin)],
        (Comparison::Gt, false) => vec![below(&zero)],
        (Comparison::Eq, true) => vec![LinearConstraint::equal(normal.clone(), -offset.clone())],
        (Comparison::Eq, false) => vec![above(margin), below(margin)],
    })
}

fn describe(ts: &[(&Predicate, bool)]) -> String {
    ts.iter()
        .map(|(p, b)| if *b { p.to_string() } else { format!("!({p})") })
        .collect::<Vec<_>>()
        .join(" && ")
}

/// Closest point (Euclidean, over the variables of the fixed predicates)
/// where every fixed predicate takes its flipped truth value and every
/// predicate sharing one of those variables keeps its truth value. Strict
/// inequalities are met with margin `eps`, or with the current slack when a
/// preserved one holds by less.
pub fn modify(req: &ModificationRequest, eps: &Rational) -> Result<ModificationResult, ModifyError> {
    if req.fix.is_empty() {
        return Err(ModifyError::NothingToFix);
    }
    let all = targets(req)?;
    let mut vars: Vec<String> = Vec::new();
    for (p, _) in &all {
        if req.fix.contains(&p.id) {
            for v in p.support() {
                if !vars.iter().any(|w| w == v) {
                    vars.push(v.to_string());
                }
            }
        }
    }
    vars.sort();
    let old: Vec<Rational> = vars
        .iter()
        .map(|v| req.point.get(v).cloned().ok_or_else(|| ModifyError::MissingVariable(v.clone())))
        .collect::<Result<_, _>>()?;
    let involved: Vec<(&Predicate, bool)> = all
        .into_iter()
        .filter(|(p, _)| p.support().any(|v| vars.iter().any(|w| w == v)))
        .collect();

    let mut choices: Vec<Vec<LinearConstraint>> = Vec::new();
    for (p, want) in &involved {
        let margin = if req.fix.contains(&p.id) {
            eps.clone()
        } else {
            let mu = p.expr.eval(&req.point).map_err(|_| {
                ModifyError::MissingVariable(p.support().next().unwrap_or_default().to_string())
            })?;
            let slack = mu.abs();
            if slack.is_positive() && &slack < eps {
                slack
            } else {
                eps.clone()
            }
        };
        choices.push(literal_constraints(p, *want, &vars, &req.point, &margin)?);
    }
    if choices.len() > MAX_CONSTRAINTS {
        return Err(ModifyError::TooManyConstraints(choices.len()));
    }

    // Disequalities split into two halfspaces; try every combination.
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    let mut pick = vec![0usize; choices.len()];
    loop {
        let cs: Vec<LinearConstraint> = choices.iter().zip(&pick).map(|(c, &k)| c[k].clone()).collect();
        if let Some(y) = solve_qp(&old, &cs) {
            let d = qp::dist_sq(&old, &y);
            if best.as_ref().is_none_or(|(bd, _)| &d < bd) {
                best = Some((d, y));
            }
        }
        let Some(k) = (0..pick.len()).find(|&k| pick[k] + 1 < choices[k].len()) else {
            break;
        };
        pick[k] += 1;
        for p in pick.iter_mut().take(k) {
            *p = 0;
        }
    }
    let (distance_squared, new) = best.ok_or_else(|| ModifyError::Infeasible {
        targets: describe(&involved),
    })?;
    Ok(ModificationResult {
        distance: distance_squared.to_f64().sqrt(),
        vars,
        old,
        new,
        distance_squared,
    })
}

/// Closest point to `point` with `expr >= margin`.
pub fn project_halfspace(
    point: &BTreeMap<String, Rational>,
    expr: &AffineExpr,
    margin: &Rational,
) -> Result<BTreeMap<String, Rational>, ModifyError> {
    let mu = expr
        .eval(point)
        .map_err(|_| ModifyError::MissingVariable(expr.support().next().unwrap_or_default().to_string()))?;
    let mut out = point.clone();
    if &mu >= margin {
        return Ok(out);
    }
    let step = (margin - &mu) / expr.norm_squared();
    for (v, c) in expr.coefficients() {
        let x = out.get_mut(v).expect("evaluated above");
        *x += &(&step * c);
    }
    Ok(out)
}
