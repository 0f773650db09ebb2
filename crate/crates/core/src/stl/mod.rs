//! Non-nested STL in negation normal form over affine predicates.
//!
//! Formulas have two layers: [`StateFormula`] is the Boolean layer allowed
//! inside temporal operands, [`StlFormula`] is the top layer built from
//! `U`/`R` terms joined by `and`/`or`. The split makes nesting unrepresentable.

mod parse;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

pub use parse::{parse_formula, ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StlError {
    #[error("affine expression has no variable with a nonzero coefficient")]
    ConstantExpression,
    #[error("interval lower bound {lo} exceeds upper bound {hi}")]
    IntervalOrder { lo: Rational, hi: Rational },
    #[error("interval bound {0} is negative")]
    NegativeBound(Rational),
    #[error("no value for variable `{0}`")]
    MissingVariable(String),
}

/// `Σ coefficient·variable + constant`, with every stored coefficient nonzero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineExpr {
    coefficients: BTreeMap<String, Rational>,
    constant: Rational,
}

impl AffineExpr {
    pub fn new(
        coefficients: impl IntoIterator<Item = (String, Rational)>,
        constant: Rational,
    ) -> Result<Self, StlError> {
        let mut merged: BTreeMap<String, Rational> = BTreeMap::new();
        for (var, c) in coefficients {
            *merged.entry(var).or_insert_with(Rational::zero) += &c;
        }
        merged.retain(|_, c| !c.is_zero());
        if merged.is_empty() {
            return Err(StlError::ConstantExpression);
        }
        Ok(AffineExpr {
            coefficients: merged,
            constant,
        })
    }

    /// `coefficient·var + constant`.
    pub fn single(var: &str, coefficient: Rational, constant: Rational) -> Result<Self, StlError> {
        Self::new([(var.to_string(), coefficient)], constant)
    }

    pub fn coefficients(&self) -> &BTreeMap<String, Rational> {
        &self.coefficients
    }

    pub fn coefficient(&self, var: &str) -> Rational {
        self.coefficients.get(var).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant(&self) -> &Rational {
        &self.constant
    }

    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.coefficients.keys().map(String::as_str)
    }

    pub fn negated(&self) -> AffineExpr {
        AffineExpr {
            coefficients: self
                .coefficients
                .iter()
                .map(|(v, c)| (v.clone(), -c))
                .collect(),
            constant: -&self.constant,
        }
    }

    pub fn eval(&self, point: &BTreeMap<String, Rational>) -> Result<Rational, StlError> {
        let mut acc = self.constant.clone();
        for (var, c) in &self.coefficients {
            let x = point
                .get(var)
                .ok_or_else(|| StlError::MissingVariable(var.clone()))?;
            acc += &(c * x);
        }
        Ok(acc)
    }

    /// Squared Euclidean norm of the coefficient vector.
    pub fn norm_squared(&self) -> Rational {
        self.coefficients.values().map(|c| c * c).sum()
    }

    /// Binds variable names to column indices of a signal.
    pub fn bind(&self, variables: &[String]) -> Result<BoundAffine, StlError> {
        let mut terms = Vec::with_capacity(self.coefficients.len());
        for (var, c) in &self.coefficients {
            let idx = variables
                .iter()
                .position(|v| v == var)
                .ok_or_else(|| StlError::MissingVariable(var.clone()))?;
            terms.push((idx, c.clone()));
        }
        Ok(BoundAffine {
            terms,
            constant: self.constant.clone(),
        })
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (var, c) in &self.coefficients {
            let (neg, mag) = (c.is_negative(), c.abs());
            match (first, neg) {
                (true, true) => write!(f, "-")?,
                (true, false) => {}
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
            }
            if mag == Rational::one() {
                write!(f, "{var}")?;
            } else {
                write!(f, "{mag}*{var}")?;
            }
            first = false;
        }
        if !self.constant.is_zero() {
            let sign = if self.constant.is_negative() { "-" } else { "+" };
            write!(f, " {sign} {}", self.constant.abs())?;
        }
        Ok(())
    }
}

/// An affine expression with variables resolved to column indices.
#[derive(Debug, Clone)]
pub struct BoundAffine {
    terms: Vec<(usize, Rational)>,
    constant: Rational,
}

impl BoundAffine {
    pub fn eval(&self, values: &[Rational]) -> Rational {
        let mut acc = self.constant.clone();
        for (i, c) in &self.terms {
            acc += &(c * &values[*i]);
        }
        acc
    }
}

/// Comparison of the affine expression against zero after normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Comparison {
    /// `μ ≥ 0`
    Ge,
    /// `μ > 0`
    Gt,
    /// `μ = 0`
    Eq,
}

impl Comparison {
    pub fn holds(self, mu: &Rational) -> bool {
        match self {
            Comparison::Ge => !mu.is_negative(),
            Comparison::Gt => mu.is_positive(),
            Comparison::Eq => mu.is_zero(),
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Ge => ">=",
            Comparison::Gt => ">",
            Comparison::Eq => "==",
        }
    }
}

/// Atomic proposition `μ(x) ⋈ 0`. Inputs written with `<=`/`<` are stored as
/// `Ge`/`Gt` over the negated expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub id: String,
    pub expr: AffineExpr,
    pub cmp: Comparison,
}

impl Predicate {
    pub fn new(id: impl Into<String>, expr: AffineExpr, cmp: Comparison) -> Self {
        let expr = match cmp {
            // Orient equalities so the first coefficient is positive.
            Comparison::Eq
                if expr
                    .coefficients
                    .values()
                    .next()
                    .is_some_and(Rational::is_negative) =>
            {
                expr.negated()
            }
            _ => expr,
        };
        Predicate {
            id: id.into(),
            expr,
            cmp,
        }
    }

    /// `var ≥ threshold`
    pub fn at_least(id: &str, var: &str, threshold: Rational) -> Self {
        let expr = AffineExpr::single(var, Rational::one(), -threshold).expect("unit coefficient");
        Predicate::new(id, expr, Comparison::Ge)
    }

    /// Same expression and comparison, ignoring the id.
    pub fn same_shape(&self, other: &Predicate) -> bool {
        self.expr == other.expr && self.cmp == other.cmp
    }

    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.expr.support()
    }

    pub fn holds_for(&self, mu: &Rational) -> bool {
        self.cmp.holds(mu)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Constant moved to the right-hand side so the text matches the grammar.
        let lhs = AffineExpr {
            coefficients: self.expr.coefficients.clone(),
            constant: Rational::zero(),
        };
        write!(f, "{lhs} {} {}", self.cmp.symbol(), -self.expr.constant())
    }
}

/// Truth of a predicate at a point.
pub fn eval_predicate(p: &Predicate, point: &BTreeMap<String, Rational>) -> Result<bool, StlError> {
    Ok(p.holds_for(&p.expr.eval(point)?))
}

/// Closed bounded interval `[lo, hi]` with `0 ≤ lo ≤ hi`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, StlError> {
        if lo.is_negative() {
            return Err(StlError::NegativeBound(lo));
        }
        if lo > hi {
            return Err(StlError::IntervalOrder { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn is_punctual(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, t: &Rational) -> bool {
        &self.lo <= t && t <= &self.hi
    }
}

/// Boolean combination of predicate literals; the operand language of `U`/`R`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StateFormula {
    True,
    False,
    Lit { pred: Predicate, positive: bool },
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
}

impl StateFormula {
    pub fn lit(pred: Predicate) -> Self {
        StateFormula::Lit {
            pred,
            positive: true,
        }
    }

    pub fn not_lit(pred: Predicate) -> Self {
        StateFormula::Lit {
            pred,
            positive: false,
        }
    }

    /// Evaluates under a predicate-id valuation. Missing ids count as false.
    pub fn eval_bits(&self, bits: &BTreeMap<String, bool>) -> bool {
        match self {
            StateFormula::True => true,
            StateFormula::False => false,
            StateFormula::Lit { pred, positive } => {
                bits.get(&pred.id).copied().unwrap_or(false) == *positive
            }
            StateFormula::And(a, b) => a.eval_bits(bits) && b.eval_bits(bits),
            StateFormula::Or(a, b) => a.eval_bits(bits) || b.eval_bits(bits),
        }
    }

    /// Negation pushed down to the literals.
    pub fn negated(&self) -> StateFormula {
        match self {
            StateFormula::True => StateFormula::False,
            StateFormula::False => StateFormula::True,
            StateFormula::Lit { pred, positive } => StateFormula::Lit {
                pred: pred.clone(),
                positive: !positive,
            },
            StateFormula::And(a, b) => StateFormula::Or(Box::new(a.negated()), Box::new(b.negated())),
            StateFormula::Or(a, b) => StateFormula::And(Box::new(a.negated()), Box::new(b.negated())),
        }
    }

    fn collect_predicates<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            StateFormula::True | StateFormula::False => {}
            StateFormula::Lit { pred, .. } => out.push(pred),
            StateFormula::And(a, b) | StateFormula::Or(a, b) => {
                a.collect_predicates(out);
                b.collect_predicates(out);
            }
        }
    }

    /// Predicates in first-occurrence order, structural duplicates merged.
    pub fn predicates(&self) -> Vec<Predicate> {
        let mut all = Vec::new();
        self.collect_predicates(&mut all);
        dedup_predicates(all)
    }

    fn relevant_points_into(&self, out: &mut Vec<Rational>) {
        match self {
            StateFormula::True | StateFormula::False => {}
            StateFormula::Lit { .. } => out.push(Rational::zero()),
            StateFormula::And(a, b) | StateFormula::Or(a, b) => {
                a.relevant_points_into(out);
                b.relevant_points_into(out);
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent_and: bool) -> fmt::Result {
        match self {
            StateFormula::True => write!(f, "true"),
            StateFormula::False => write!(f, "false"),
            StateFormula::Lit { pred, positive } => {
                if *positive {
                    write!(f, "{pred}")
                } else {
                    write!(f, "!({pred})")
                }
            }
            StateFormula::And(a, b) => {
                a.fmt_prec(f, true)?;
                write!(f, " && ")?;
                b.fmt_prec(f, true)
            }
            StateFormula::Or(a, b) => {
                if parent_and {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, false)?;
                write!(f, " || ")?;
                b.fmt_prec(f, false)?;
                if parent_and {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemporalOp {
    Until,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StlFormula {
    True,
    Temporal {
        op: TemporalOp,
        left: StateFormula,
        interval: Interval,
        right: StateFormula,
    },
    Binary(BoolOp, Box<StlFormula>, Box<StlFormula>),
}

impl StlFormula {
    pub fn until(left: StateFormula, interval: Interval, right: StateFormula) -> Self {
        StlFormula::Temporal {
            op: TemporalOp::Until,
            left,
            interval,
            right,
        }
    }

    pub fn release(left: StateFormula, interval: Interval, right: StateFormula) -> Self {
        StlFormula::Temporal {
            op: TemporalOp::Release,
            left,
            interval,
            right,
        }
    }

    pub fn and(a: StlFormula, b: StlFormula) -> Self {
        StlFormula::Binary(BoolOp::And, Box::new(a), Box::new(b))
    }

    pub fn or(a: StlFormula, b: StlFormula) -> Self {
        StlFormula::Binary(BoolOp::Or, Box::new(a), Box::new(b))
    }

    fn collect_predicates<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            StlFormula::True => {}
            StlFormula::Temporal { left, right, .. } => {
                left.collect_predicates(out);
                right.collect_predicates(out);
            }
            StlFormula::Binary(_, a, b) => {
                a.collect_predicates(out);
                b.collect_predicates(out);
            }
        }
    }

    pub fn has_temporal(&self) -> bool {
        match self {
            StlFormula::True => false,
            StlFormula::Temporal { .. } => true,
            StlFormula::Binary(_, a, b) => a.has_temporal() || b.has_temporal(),
        }
    }

    /// Latest interval endpoint, the time the signal must reach.
    pub fn horizon(&self) -> Rational {
        relevant_points(self)
            .last()
            .cloned()
            .unwrap_or_else(Rational::zero)
    }
}

impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StlFormula::True => write!(f, "true"),
            StlFormula::Temporal {
                op,
                left,
                interval,
                right,
            } => {
                let sym = match op {
                    TemporalOp::Until => "U",
                    TemporalOp::Release => "R",
                };
                write!(f, "({left}) {sym}[{},{}] ({right})", interval.lo, interval.hi)
            }
            StlFormula::Binary(op, a, b) => {
                let word = match op {
                    BoolOp::And => "and",
                    BoolOp::Or => "or",
                };
                // Same-operator chains print flat; anything else is parenthesized.
                let side = |f: &mut fmt::Formatter<'_>, x: &StlFormula| match x {
                    StlFormula::Binary(inner, ..) if inner != op => write!(f, "({x})"),
                    _ => write!(f, "{x}"),
                };
                side(f, a)?;
                write!(f, " {word} ")?;
                side(f, b)
            }
        }
    }
}

fn dedup_predicates(all: Vec<&Predicate>) -> Vec<Predicate> {
    let mut out: Vec<Predicate> = Vec::new();
    for p in all {
        if !out.iter().any(|q| q.same_shape(p)) {
            out.push(p.clone());
        }
    }
    out
}

/// `pd(φ)`: predicates in order of first occurrence, structural duplicates merged.
pub fn predicates(phi: &StlFormula) -> Vec<Predicate> {
    let mut all = Vec::new();
    phi.collect_predicates(&mut all);
    dedup_predicates(all)
}

/// `rp(φ)`, sorted ascending without duplicates.
pub fn relevant_points(phi: &StlFormula) -> Vec<Rational> {
    fn go(phi: &StlFormula, out: &mut Vec<Rational>) {
        match phi {
            StlFormula::True => {}
            StlFormula::Temporal {
                left,
                interval,
                right,
                ..
            } => {
                out.push(interval.lo.clone());
                out.push(interval.hi.clone());
                left.relevant_points_into(out);
                right.relevant_points_into(out);
            }
            StlFormula::Binary(_, a, b) => {
                go(a, out);
                go(b, out);
            }
        }
    }
    let mut out = Vec::new();
    go(phi, &mut out);
    out.sort();
    out.dedup();
    out
}

/// Zero set `μ_p(x) = 0` of a predicate: where its truth may flip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZeroSet {
    /// Single-variable predicate: the crossing value of that variable.
    Threshold { var: String, value: Rational },
    /// `Σ a_i x_i = rhs`.
    Hyperplane { expr: AffineExpr },
}

/// `vv(φ)`: one zero-set descriptor per predicate of `φ`.
pub fn variable_valuations(phi: &StlFormula) -> Vec<(Predicate, ZeroSet)> {
    predicates(phi)
        .into_iter()
        .map(|p| {
            let zero = if p.expr.coefficients.len() == 1 {
                let (var, c) = p.expr.coefficients.iter().next().expect("nonempty");
                ZeroSet::Threshold {
                    var: var.clone(),
                    value: -p.expr.constant() / c,
                }
            } else {
                ZeroSet::Hyperplane {
                    expr: p.expr.clone(),
                }
            };
            (p, zero)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn pt(pairs: &[(&str, &str)]) -> BTreeMap<String, Rational> {
        pairs.iter().map(|(k, v)| (k.to_string(), q(v))).collect()
    }

    fn p1() -> Predicate {
        Predicate::at_least("p1", "x1", q("0.7"))
    }

    fn p2() -> Predicate {
        Predicate::at_least("p2", "x2", q("0.5"))
    }

    fn until(a: Predicate, lo: &str, hi: &str, b: Predicate) -> StlFormula {
        StlFormula::until(
            StateFormula::lit(a),
            Interval::new(q(lo), q(hi)).unwrap(),
            StateFormula::lit(b),
        )
    }

    #[test]
    fn eval_predicate_boundaries() {
        assert!(eval_predicate(&p1(), &pt(&[("x1", "0.7")])).unwrap());
        assert!(!eval_predicate(&p2(), &pt(&[("x2", "0.3")])).unwrap());
        let v_zero = Predicate::new(
            "p",
            AffineExpr::single("v", Rational::one(), Rational::zero()).unwrap(),
            Comparison::Eq,
        );
        assert!(eval_predicate(&v_zero, &pt(&[("v", "0")])).unwrap());
        assert!(!eval_predicate(&v_zero, &pt(&[("v", "0.001")])).unwrap());
        assert_eq!(
            eval_predicate(&p1(), &pt(&[("x2", "1")])),
            Err(StlError::MissingVariable("x1".into()))
        );
    }

    #[test]
    fn strict_comparison_excludes_boundary() {
        let gt = Predicate::new(
            "p",
            AffineExpr::single("i", q("-1"), q("10")).unwrap(),
            Comparison::Gt,
        );
        assert!(!eval_predicate(&gt, &pt(&[("i", "10")])).unwrap());
        assert!(eval_predicate(&gt, &pt(&[("i", "9.999")])).unwrap());
    }

    #[test]
    fn predicate_sets() {
        assert_eq!(predicates(&until(p1(), "4", "5", p2())), vec![p1(), p2()]);
        assert!(predicates(&StlFormula::True).is_empty());
        let p3 = Predicate::at_least("p3", "x3", q("1"));
        let phi = StlFormula::and(until(p1(), "4", "5", p2()), until(p1(), "1", "2", p3.clone()));
        assert_eq!(predicates(&phi), vec![p1(), p2(), p3]);
    }

    #[test]
    fn relevant_point_sets() {
        let zero_four_five: Vec<Rational> = ["0", "4", "5"].iter().map(|s| q(s)).collect();
        assert_eq!(relevant_points(&until(p1(), "4", "5", p2())), zero_four_five);
        assert!(relevant_points(&StlFormula::True).is_empty());
        let release = StlFormula::release(
            StateFormula::lit(p1()),
            Interval::new(q("2"), q("10")).unwrap(),
            StateFormula::lit(p2()),
        );
        let phi = StlFormula::and(until(p1(), "4", "5", p2()), release);
        let expected: Vec<Rational> = ["0", "2", "4", "5", "10"].iter().map(|s| q(s)).collect();
        assert_eq!(relevant_points(&phi), expected);
    }

    #[test]
    fn zero_sets() {
        let phi = until(p1(), "4", "5", p2());
        let vv = variable_valuations(&phi);
        assert_eq!(
            vv[0].1,
            ZeroSet::Threshold {
                var: "x1".into(),
                value: q("0.7")
            }
        );
        let twice = Predicate::new(
            "p",
            AffineExpr::single("x", q("2"), q("-2")).unwrap(),
            Comparison::Ge,
        );
        let phi = until(twice.clone(), "0", "1", twice);
        assert_eq!(
            variable_valuations(&phi)[0].1,
            ZeroSet::Threshold {
                var: "x".into(),
                value: q("1")
            }
        );
        let plane = AffineExpr::new([("x".into(), q("1")), ("y".into(), q("1"))], q("-1")).unwrap();
        let sum = Predicate::new("s", plane.clone(), Comparison::Ge);
        let phi = until(sum.clone(), "0", "1", sum);
        assert_eq!(variable_valuations(&phi)[0].1, ZeroSet::Hyperplane { expr: plane });
    }

    #[test]
    fn interval_validation() {
        assert!(matches!(
            Interval::new(q("5"), q("4")),
            Err(StlError::IntervalOrder { .. })
        ));
        assert!(Interval::new(q("-1"), q("4")).is_err());
        assert!(Interval::new(q("3"), q("3")).unwrap().is_punctual());
    }

    #[test]
    fn affine_requires_a_variable() {
        assert_eq!(
            AffineExpr::new([("x".into(), q("1")), ("x".into(), q("-1"))], q("2")),
            Err(StlError::ConstantExpression)
        );
    }
}
