//! Reference properties and seeded signal generators used by tests, the
//! acceptance suite and the benchmark.

use rand::Rng;

use crate::encoder::variable_points;
use crate::rational::{q, Rational};
use crate::signal::{Sample, Signal};
use crate::stl::{parse_formula, predicates, relevant_points, StlFormula};

pub const STOPPING: &str = "(v <= 30) U[5,10] (v == 0)";
pub const CHARGING: &str = "(V == 4.2) R[2,10] (I < 10)";
pub const DECELERATION: &str = "(w <= 30) U[5,10] (w == 0) and (m <= 30) U[5,10] (m == 0)";
pub const RUNNING_EXAMPLE: &str = "(x1 >= 0.7) U[4,5] (x2 >= 0.5)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Stopping,
    Charging,
    Deceleration,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Stopping, Scenario::Charging, Scenario::Deceleration];

    pub fn property(self) -> &'static str {
        match self {
            Scenario::Stopping => STOPPING,
            Scenario::Charging => CHARGING,
            Scenario::Deceleration => DECELERATION,
        }
    }

    pub fn formula(self) -> StlFormula {
        parse_formula(self.property()).expect("built-in property parses")
    }

    /// A signal that satisfies the property.
    pub fn satisfying<R: Rng>(self, rng: &mut R) -> Signal {
        let phi = self.formula();
        loop {
            let s = match self {
                Scenario::Stopping => profiles(&["v"], vec![stop_profile(rng, 0, TailKind::Stops)]),
                Scenario::Charging => charging(rng, false),
                Scenario::Deceleration => profiles(
                    &["w", "m"],
                    vec![
                        stop_profile(rng, 0, TailKind::Stops),
                        stop_profile(rng, 0, TailKind::Stops),
                    ],
                ),
            };
            if general_position(&s, &phi) {
                return s;
            }
        }
    }

    /// A signal that violates the property.
    pub fn violating<R: Rng>(self, rng: &mut R) -> Signal {
        let phi = self.formula();
        loop {
            let s = match self {
                Scenario::Stopping => profiles(&["v"], vec![bad_stop_profile(rng)]),
                Scenario::Charging => charging(rng, true),
                Scenario::Deceleration => {
                    let (w, m) = match rng.gen_range(0..3) {
                        0 => (bad_stop_profile(rng), stop_profile(rng, 0, TailKind::Stops)),
                        1 => (stop_profile(rng, 0, TailKind::Stops), bad_stop_profile(rng)),
                        _ => (bad_stop_profile(rng), bad_stop_profile(rng)),
                    };
                    profiles(&["w", "m"], vec![w, m])
                }
            };
            if general_position(&s, &phi) {
                return s;
            }
        }
    }
}

/// Running example: two variables whose threshold crossings give the
/// event times 0.5, 1.2, 2.2, 3.2, 4.5 and 4.7.
pub fn running_example_signal() -> Signal {
    Signal::parse_csv(
        "time,x1,x2\n0,0.6,0.9\n1,0.8,0.6\n2,0.8,0.1\n2.4,0.6,0.2\n4,0.8,0.15\n5,0.6,0.65\n",
    )
    .expect("valid literal")
}

pub fn running_example_formula() -> StlFormula {
    parse_formula(RUNNING_EXAMPLE).expect("valid literal")
}

/// Uniform rational in `[lo, hi]` on a 1/1000 grid.
pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Rational {
    let k_lo = (lo * 1000.0).ceil() as i64;
    let k_hi = (hi * 1000.0).floor() as i64;
    Rational::new(rng.gen_range(k_lo..=k_hi), 1000)
}

type Knots = Vec<(Rational, Rational)>;

/// Linear interpolation of a knot list at `t` (held flat past the ends).
fn knot_value(knots: &Knots, t: &Rational) -> Rational {
    let i = knots.partition_point(|(s, _)| s <= t);
    if i == 0 {
        return knots[0].1.clone();
    }
    if i == knots.len() {
        return knots[i - 1].1.clone();
    }
    let ((ta, va), (tb, vb)) = (&knots[i - 1], &knots[i]);
    va + &((t - ta) / (tb - ta) * (vb - va))
}

/// Combines per-variable knot lists on the union of their times.
pub fn profiles(vars: &[&str], knots: Vec<Knots>) -> Signal {
    let mut times: Vec<Rational> = knots.iter().flatten().map(|(t, _)| t.clone()).collect();
    times.sort();
    times.dedup();
    let samples = times
        .into_iter()
        .map(|t| Sample {
            values: knots.iter().map(|k| knot_value(k, &t)).collect(),
            time: t,
        })
        .collect();
    Signal::new(vars.iter().map(|v| v.to_string()).collect(), samples).expect("sorted knots")
}

const DURATION: i64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TailKind {
    Stops,
    NeverStops,
    StopsLate,
}

/// Speed trace under 30 except for `spikes` excursions above it inside
/// `[0, 5)`, followed by the given tail.
fn stop_profile<R: Rng>(rng: &mut R, spikes: usize, tail: TailKind) -> Knots {
    let mut k: Knots = vec![(Rational::zero(), uniform(rng, 10.0, 29.0))];
    if spikes > 0 {
        let width = 4.6 / spikes as f64;
        for i in 0..spikes {
            let start = 0.2 + width * i as f64;
            let a = uniform(rng, start + 0.02 * width, start + 0.2 * width);
            let c = uniform(rng, start + 0.4 * width, start + 0.6 * width);
            let b = uniform(rng, start + 0.8 * width, start + 0.98 * width);
            k.push((a, uniform(rng, 15.0, 29.0)));
            k.push((c, uniform(rng, 31.0, 45.0)));
            k.push((b, uniform(rng, 15.0, 29.0)));
        }
    } else {
        for _ in 0..rng.gen_range(0..3) {
            let t = uniform(rng, 0.1, 4.9);
            if k.iter().all(|(s, _)| s != &t) {
                k.push((t, uniform(rng, 5.0, 29.5)));
            }
        }
        k.sort();
    }
    let slow = uniform(rng, 5.1, 5.4);
    k.push((slow, uniform(rng, 5.0, 25.0)));
    match tail {
        TailKind::Stops => {
            let stop = uniform(rng, 5.6, 9.8);
            k.push((stop, Rational::zero()));
        }
        TailKind::StopsLate => {
            k.push((uniform(rng, 10.3, 11.7), Rational::zero()));
        }
        TailKind::NeverStops => {
            k.push((uniform(rng, 6.0, 9.0), uniform(rng, 1.0, 8.0)));
            k.push((uniform(rng, 10.5, 11.5), uniform(rng, 1.0, 8.0)));
        }
    }
    let last = k.last().expect("nonempty").1.clone();
    k.push((Rational::from_integer(DURATION), last));
    k
}

fn bad_stop_profile<R: Rng>(rng: &mut R) -> Knots {
    let spikes = rng.gen_range(0..=4);
    let tail = match (spikes, rng.gen_range(0..4)) {
        (0, 0 | 1) => TailKind::NeverStops,
        (0, _) => TailKind::StopsLate,
        (_, 0) => TailKind::NeverStops,
        (_, 1) => TailKind::StopsLate,
        _ => TailKind::Stops,
    };
    stop_profile(rng, spikes, tail)
}

/// Benchmark trace: `count / 2` spikes above 30 before t=5, then a stop.
pub fn stopping_with_crossings<R: Rng>(rng: &mut R, count: usize) -> Signal {
    let phi = parse_formula(STOPPING).expect("valid");
    loop {
        let s = profiles(&["v"], vec![stop_profile(rng, count / 2, TailKind::Stops)]);
        if general_position(&s, &phi) {
            return s;
        }
    }
}

fn current_spike<R: Rng>(rng: &mut R, k: &mut Knots, lo: f64, hi: f64) {
    let w = hi - lo;
    k.push((uniform(rng, lo, lo + 0.2 * w), uniform(rng, 5.0, 9.5)));
    k.push((uniform(rng, lo + 0.4 * w, lo + 0.6 * w), uniform(rng, 10.5, 15.0)));
    k.push((uniform(rng, lo + 0.8 * w, hi), uniform(rng, 5.0, 9.5)));
}

/// Constant-current/constant-voltage charge: voltage rises to 4.2 and holds,
/// current stays under 10 except for optional spikes.
fn charging<R: Rng>(rng: &mut R, violate: bool) -> Signal {
    let end = Rational::from_integer(DURATION);
    let reach = if violate {
        uniform(rng, 4.0, 11.5)
    } else {
        uniform(rng, 2.5, 11.5)
    };
    let v_knots: Knots = vec![
        (Rational::zero(), uniform(rng, 3.6, 4.0)),
        (reach.clone(), q("4.2")),
        (end.clone(), q("4.2")),
    ];
    let mut i_knots: Knots = vec![(Rational::zero(), uniform(rng, 6.0, 9.5))];
    // Excursions before the window always allowed.
    if rng.gen_bool(0.3) {
        current_spike(rng, &mut i_knots, 0.1, 1.8);
    }
    let guard_end = reach.to_f64().min(10.0);
    if violate {
        let n = rng.gen_range(1..=3);
        let width = (guard_end - 2.3) / n as f64;
        for j in 0..n {
            let lo = 2.2 + width * j as f64;
            current_spike(rng, &mut i_knots, lo + 0.05 * width, lo + 0.95 * width);
        }
    } else {
        for _ in 0..rng.gen_range(0..3) {
            let t = uniform(rng, 2.1, 11.9);
            if i_knots.iter().all(|(s, _)| s < &t) {
                i_knots.push((t, uniform(rng, 3.0, 9.8)));
            }
        }
        // Overload after the voltage target is reached is allowed.
        if reach.to_f64() < 9.0 && rng.gen_bool(0.3) {
            let lo = reach.to_f64() + 0.3;
            if i_knots.iter().all(|(s, _)| s.to_f64() < lo) {
                current_spike(rng, &mut i_knots, lo, 11.8);
            }
        }
    }
    let last = i_knots.last().expect("nonempty").1.clone();
    i_knots.push((end, last));
    profiles(&["V", "I"], vec![v_knots, i_knots])
}

/// No two predicates change truth at the same instant and no change falls
/// on a relevant point.
pub fn general_position(s: &Signal, phi: &StlFormula) -> bool {
    let rp = relevant_points(phi);
    let mut all: Vec<Rational> = Vec::new();
    for p in predicates(phi) {
        match variable_points(s, &p) {
            Ok(vp) => all.extend(vp),
            Err(_) => return false,
        }
    }
    let n = all.len();
    all.sort();
    all.dedup();
    all.len() == n && all.iter().all(|t| rp.binary_search(t).is_err())
}

/// Random piecewise-linear signal over `vars` with values in `[lo, hi]`.
pub fn random_signal<R: Rng>(
    rng: &mut R,
    vars: &[&str],
    duration: i64,
    segments: usize,
    (lo, hi): (f64, f64),
) -> Signal {
    let mut times: Vec<Rational> = vec![Rational::zero(), Rational::from_integer(duration)];
    while times.len() < segments + 1 {
        let t = uniform(rng, 0.05, duration as f64 - 0.05);
        if !times.contains(&t) {
            times.push(t);
        }
    }
    times.sort();
    let samples = times
        .into_iter()
        .map(|time| Sample {
            time,
            values: vars.iter().map(|_| uniform(rng, lo, hi)).collect(),
        })
        .collect();
    Signal::new(vars.iter().map(|v| v.to_string()).collect(), samples).expect("sorted")
}
