//! Scaling measurements on the safe-stopping scenario.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::encoder::sign_encode;
use crate::enforcer::{enforce, EnforceError};
use crate::rational::Rational;
use crate::scenario::{stopping_with_crossings, Scenario};

/// Spikes must fit before the lower bound of the interval.
pub const MAX_VIOLATIONS: usize = 40;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot place {0} violation points: need an even count up to {MAX_VIOLATIONS}")]
    Unplaceable(usize),
    #[error("at least one repetition is needed")]
    NoRepetitions,
    #[error(transparent)]
    Enforce(#[from] EnforceError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub violations: usize,
    pub word_length: usize,
    pub modified_events: usize,
    /// Median enforcement time.
    pub time_ms: f64,
}

/// Enforces one generated trace per count, `reps` times each.
pub fn bench_stopping(
    counts: &[usize],
    reps: usize,
    seed: u64,
    eps: &Rational,
) -> Result<Vec<BenchRecord>, BenchError> {
    if reps == 0 {
        return Err(BenchError::NoRepetitions);
    }
    let phi = Scenario::Stopping.formula();
    let mut out = Vec::with_capacity(counts.len());
    for &count in counts {
        if count % 2 == 1 || count > MAX_VIOLATIONS {
            return Err(BenchError::Unplaceable(count));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(count as u64));
        let s = stopping_with_crossings(&mut rng, count);
        let word_length = sign_encode(&s, &phi).map_err(EnforceError::from)?.len();
        let mut times = Vec::with_capacity(reps);
        let mut modified_events = 0;
        for _ in 0..reps {
            let start = Instant::now();
            let e = enforce(&s, &phi, eps)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            modified_events = e.report.modified_count;
        }
        out.push(BenchRecord {
            violations: count,
            word_length,
            modified_events,
            time_ms: median(&mut times),
        });
    }
    Ok(out)
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Least-squares line `y = slope * x + intercept` and its R².
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("violations,word_length,modified_events,time_ms\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{:.3}\n",
            r.violations, r.word_length, r.modified_events, r.time_ms
        ));
    }
    out
}
