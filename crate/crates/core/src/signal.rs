//! Piecewise-linear multivariate signals over exact rational time.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("empty file")]
    Empty,
    #[error("header must start with `time`")]
    BadHeader,
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    MissingColumn {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: malformed value `{text}`")]
    MalformedRow { line: usize, text: String },
    #[error("non-increasing time at sample {index}")]
    NonIncreasingTime { index: usize },
    #[error("first sample must be at time 0")]
    FirstSampleNotZero,
    #[error("sample {index} has {found} values, expected {expected}")]
    Arity {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("time {t} outside [0, {duration}]")]
    OutOfRange { t: Rational, duration: Rational },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub time: Rational,
    pub values: Vec<Rational>,
}

/// Finite signal sampled at strictly increasing times starting at 0, linearly
/// interpolated in between. The duration is the last sample time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signal {
    variables: Vec<String>,
    samples: Vec<Sample>,
}

impl Signal {
    pub fn new(variables: Vec<String>, samples: Vec<Sample>) -> Result<Self, SignalError> {
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(SignalError::DuplicateColumn(v.clone()));
            }
        }
        if !samples[0].time.is_zero() {
            return Err(SignalError::FirstSampleNotZero);
        }
        for (index, s) in samples.iter().enumerate() {
            if s.values.len() != variables.len() {
                return Err(SignalError::Arity {
                    index,
                    expected: variables.len(),
                    found: s.values.len(),
                });
            }
            if index > 0 && s.time <= samples[index - 1].time {
                return Err(SignalError::NonIncreasingTime { index });
            }
        }
        Ok(Signal { variables, samples })
    }

    /// Builds a signal from `(time, values)` rows.
    pub fn from_rows<V: AsRef<str>>(
        variables: &[V],
        rows: impl IntoIterator<Item = (Rational, Vec<Rational>)>,
    ) -> Result<Self, SignalError> {
        let samples = rows
            .into_iter()
            .map(|(time, values)| Sample { time, values })
            .collect();
        Signal::new(
            variables.iter().map(|v| v.as_ref().to_string()).collect(),
            samples,
        )
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn duration(&self) -> &Rational {
        &self.samples.last().expect("nonempty").time
    }

    pub fn times(&self) -> impl Iterator<Item = &Rational> {
        self.samples.iter().map(|s| &s.time)
    }

    pub fn index_of(&self, var: &str) -> Result<usize, SignalError> {
        self.variables
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| SignalError::UnknownVariable(var.to_string()))
    }

    /// Index of the sample segment containing `t`: the largest `i` with
    /// `time[i] <= t`, capped so that `i + 1` exists when possible.
    fn segment(&self, t: &Rational) -> usize {
        let i = self.samples.partition_point(|s| &s.time <= t);
        i.saturating_sub(1).min(self.samples.len().saturating_sub(2))
    }

    /// `𝐱(t)` by exact linear interpolation.
    pub fn value_at(&self, t: &Rational) -> Result<Vec<Rational>, SignalError> {
        if t.is_negative() || t > self.duration() {
            return Err(SignalError::OutOfRange {
                t: t.clone(),
                duration: self.duration().clone(),
            });
        }
        if self.samples.len() == 1 {
            return Ok(self.samples[0].values.clone());
        }
        let i = self.segment(t);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        if &a.time == t {
            return Ok(a.values.clone());
        }
        if &b.time == t {
            return Ok(b.values.clone());
        }
        let w = (t - &a.time) / (&b.time - &a.time);
        Ok(a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x + &(&w * &(y - x)))
            .collect())
    }

    /// `𝐱(t)` keyed by variable name.
    pub fn point_at(&self, t: &Rational) -> Result<BTreeMap<String, Rational>, SignalError> {
        let values = self.value_at(t)?;
        Ok(self.variables.iter().cloned().zip(values).collect())
    }

    /// Copy with one extra breakpoint at `t` (no-op if `t` is already a sample).
    pub fn with_breakpoint(&self, t: &Rational) -> Result<Signal, SignalError> {
        let values = self.value_at(t)?;
        let mut samples = self.samples.clone();
        let i = samples.partition_point(|s| &s.time < t);
        if samples.get(i).is_none_or(|s| &s.time != t) {
            samples.insert(
                i,
                Sample {
                    time: t.clone(),
                    values,
                },
            );
        }
        Ok(Signal {
            variables: self.variables.clone(),
            samples,
        })
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn parse_csv(text: &str) -> Result<Signal, SignalError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(SignalError::Empty)?;
        let mut columns = header.split(',').map(|c| c.trim().to_string());
        if columns.next().as_deref() != Some("time") {
            return Err(SignalError::BadHeader);
        }
        let variables: Vec<String> = columns.collect();
        if variables.iter().any(String::is_empty) {
            return Err(SignalError::BadHeader);
        }
        let mut samples = Vec::new();
        for (line, row) in lines {
            let fields: Vec<&str> = row.split(',').map(str::trim).collect();
            if fields.len() != variables.len() + 1 {
                return Err(SignalError::MissingColumn {
                    line,
                    expected: variables.len() + 1,
                    found: fields.len(),
                });
            }
            let mut parsed = Vec::with_capacity(fields.len());
            for f in fields {
                parsed.push(f.parse::<Rational>().map_err(|_| SignalError::MalformedRow {
                    line,
                    text: f.to_string(),
                })?);
            }
            let time = parsed.remove(0);
            samples.push(Sample {
                time,
                values: parsed,
            });
        }
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        Signal::new(variables, samples)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for v in &self.variables {
            out.push(',');
            out.push_str(v);
        }
        out.push('\n');
        for s in &self.samples {
            write!(out, "{}", s.time).expect("string write");
            for v in &s.values {
                write!(out, ",{v}").expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Signal, SignalError> {
    Signal::parse_csv(&fs::read_to_string(path)?)
}

pub fn emit_csv(s: &Signal, path: impl AsRef<Path>) -> Result<(), SignalError> {
    fs::write(path, s.to_csv())?;
    Ok(())
}
