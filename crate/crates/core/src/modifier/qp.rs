//! Euclidean projection onto a small polyhedron, exactly.
//!
//! The minimizer is the projection of the center onto the affine hull of
//! some linearly independent set of active constraints, so enumerating
//! those sets and keeping the closest feasible candidate is exact.

use crate::rational::Rational;

/// `normal · y >= bound`, or `normal · y == bound` when `equality`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub normal: Vec<Rational>,
    pub bound: Rational,
    pub equality: bool,
}

impl LinearConstraint {
    pub fn at_least(normal: Vec<Rational>, bound: Rational) -> Self {
        LinearConstraint {
            normal,
            bound,
            equality: false,
        }
    }

    pub fn equal(normal: Vec<Rational>, bound: Rational) -> Self {
        LinearConstraint {
            normal,
            bound,
            equality: true,
        }
    }

    fn lhs(&self, y: &[Rational]) -> Rational {
        dot(&self.normal, y)
    }

    pub fn holds(&self, y: &[Rational]) -> bool {
        let v = self.lhs(y);
        if self.equality {
            v == self.bound
        } else {
            v >= self.bound
        }
    }
}

pub(crate) fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist_sq(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            &d * &d
        })
        .sum()
}

/// Solves `m z = rhs` for square `m`; `None` when singular.
fn solve(mut m: Vec<Vec<Rational>>, mut rhs: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let p = m[col][col].clone();
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &p;
            for c in col..n {
                let delta = &f * &m[col][c];
                m[r][c] -= &delta;
            }
            let delta = &f * &rhs[col];
            rhs[r] -= &delta;
        }
    }
    Some((0..n).map(|i| &rhs[i] / &m[i][i]).collect())
}

/// Projection of `x` onto `{y : normal_i · y = bound_i}`; `None` when the
/// normals are linearly dependent.
fn project_affine(x: &[Rational], rows: &[&LinearConstraint]) -> Option<Vec<Rational>> {
    if rows.is_empty() {
        return Some(x.to_vec());
    }
    let gram = rows
        .iter()
        .map(|a| rows.iter().map(|b| dot(&a.normal, &b.normal)).collect())
        .collect();
    let rhs = rows.iter().map(|a| &a.bound - &a.lhs(x)).collect();
    let lambda = solve(gram, rhs)?;
    let mut y = x.to_vec();
    for (a, l) in rows.iter().zip(&lambda) {
        for (yi, ai) in y.iter_mut().zip(&a.normal) {
            *yi += &(l * ai);
        }
    }
    Some(y)
}

/// Largest constraint count accepted; subsets are enumerated.
pub const MAX_CONSTRAINTS: usize = 16;

/// Closest point to `center` satisfying every constraint, or `None` when
/// the polyhedron is empty.
pub fn solve_qp(center: &[Rational], constraints: &[LinearConstraint]) -> Option<Vec<Rational>> {
    assert!(constraints.len() <= MAX_CONSTRAINTS, "too many constraints");
    if constraints.iter().all(|c| c.holds(center)) {
        return Some(center.to_vec());
    }
    let eqs: Vec<&LinearConstraint> = constraints.iter().filter(|c| c.equality).collect();
    let ineqs: Vec<&LinearConstraint> = constraints.iter().filter(|c| !c.equality).collect();
    let dim = center.len();
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    for mask in 0u32..(1 << ineqs.len()) {
        if eqs.len() + mask.count_ones() as usize > dim {
            continue;
        }
        let mut rows = eqs.clone();
        rows.extend((0..ineqs.len()).filter(|k| mask >> k & 1 == 1).map(|k| ineqs[k]));
        let Some(y) = project_affine(center, &rows) else {
            continue;
        };
        if !constraints.iter().all(|c| c.holds(&y)) {
            continue;
        }
        let d = dist_sq(center, &y);
        if best.as_ref().is_none_or(|(bd, _)| &d < bd) {
            best = Some((d, y));
        }
    }
    best.map(|(_, y)| y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn v(xs: &[&str]) -> Vec<Rational> {
        xs.iter().map(|x| q(x)).collect()
    }

    #[test]
    fn orthogonal_halfspaces() {
        let cs = [
            LinearConstraint::at_least(v(&["1", "0"]), q("1")),
            LinearConstraint::at_least(v(&["0", "1"]), q("1")),
        ];
        assert_eq!(solve_qp(&v(&["0", "0"]), &cs), Some(v(&["1", "1"])));
    }

    #[test]
    fn diagonal_halfspace() {
        let cs = [LinearConstraint::at_least(v(&["1", "1"]), q("1"))];
        assert_eq!(solve_qp(&v(&["0", "0"]), &cs), Some(v(&["0.5", "0.5"])));
    }

    #[test]
    fn redundant_and_equality_constraints() {
        let cs = [
            LinearConstraint::at_least(v(&["1", "0"]), q("1")),
            LinearConstraint::at_least(v(&["2", "0"]), q("2")),
            LinearConstraint::equal(v(&["0", "1"]), q("3")),
        ];
        assert_eq!(solve_qp(&v(&["0", "0"]), &cs), Some(v(&["1", "3"])));
    }

    #[test]
    fn feasible_center_is_kept() {
        let cs = [LinearConstraint::at_least(v(&["1"]), q("-1"))];
        assert_eq!(solve_qp(&v(&["0"]), &cs), Some(v(&["0"])));
    }

    #[test]
    fn empty_polyhedron() {
        let cs = [
            LinearConstraint::at_least(v(&["1"]), q("1")),
            LinearConstraint::at_least(v(&["-1"]), q("0")),
        ];
        assert_eq!(solve_qp(&v(&["0"]), &cs), None);
    }
}
