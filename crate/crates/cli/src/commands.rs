use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use stl_enforce::bench::{bench_stopping, to_csv};
use stl_enforce::encoder::sign_encode;
use stl_enforce::enforcer::enforce;
use stl_enforce::monitor::satisfies;
use stl_enforce::rational::Rational;
use stl_enforce::scenario::{running_example_signal, stopping_with_crossings, Scenario};
use stl_enforce::signal::Signal;
use stl_enforce::stl::{parse_formula, predicates, StlFormula};
use stl_enforce::transducer::compile;

use crate::args::{Command, Format, ScenarioName};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or unreadable inputs.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn property(text: &str) -> Result<StlFormula, CliError> {
    let path = Path::new(text);
    let source = if path.is_file() {
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{text}: {e}")))?
    } else {
        text.to_string()
    };
    parse_formula(source.trim()).map_err(|e| CliError::Usage(format!("property `{}`: {e}", source.trim())))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn signal(path: &Path) -> Result<(Signal, String), CliError> {
    let text = read(path)?;
    let s = Signal::parse_csv(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok((s, text))
}

fn eps(text: &str) -> Result<Rational, CliError> {
    let e: Rational = text
        .parse()
        .map_err(|_| CliError::Usage(format!("--eps `{text}` is not a rational")))?;
    if !e.is_positive() {
        return Err(CliError::Usage("--eps must be positive".into()));
    }
    Ok(e)
}

fn write(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| runtime(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn only(format: Format, allowed: Format, what: &str) -> Result<(), CliError> {
    if format == allowed {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} is only available as {allowed:?}").to_lowercase()))
    }
}

fn json(v: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(v).expect("serializable");
    text.push('\n');
    text
}

/// `time,<v>_in,<v>_out,...` over the breakpoints of both signals.
pub fn plot_data(input: &Signal, output: &Signal) -> Result<String, CliError> {
    let mut times: Vec<Rational> = input.times().chain(output.times()).cloned().collect();
    times.sort();
    times.dedup();
    let mut text = String::from("time");
    for v in input.variables() {
        text.push_str(&format!(",{v}_in,{v}_out"));
    }
    text.push('\n');
    for t in &times {
        let a = input.value_at(t).map_err(runtime)?;
        let b = output.value_at(t).map_err(runtime)?;
        text.push_str(&t.to_string());
        for (x, y) in a.iter().zip(&b) {
            text.push_str(&format!(",{x},{y}"));
        }
        text.push('\n');
    }
    Ok(text)
}

pub fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Encode {
            property: p,
            signal: path,
            output,
            format,
        } => {
            let phi = property(&p.property)?;
            let (s, _) = signal(&path)?;
            let word = sign_encode(&s, &phi).map_err(runtime)?;
            let text = match format {
                Format::Csv => {
                    let ids: Vec<String> = predicates(&phi).into_iter().map(|p| p.id).collect();
                    word.to_csv(&ids)
                }
                Format::Json => json(&word),
            };
            write(output.out.as_ref(), &text)?;
        }
        Command::Build {
            property: p,
            output,
            format,
        } => {
            only(format, Format::Json, "build output")?;
            let phi = property(&p.property)?;
            let mut text = compile(&phi).map_err(runtime)?.to_json();
            text.push('\n');
            write(output.out.as_ref(), &text)?;
        }
        Command::Enforce {
            property: p,
            signal: path,
            output,
            eps: e,
            format,
            report,
            plot_data: plot,
        } => {
            only(format, Format::Csv, "the enforced signal")?;
            let phi = property(&p.property)?;
            let (s, raw) = signal(&path)?;
            let e = eps(&e)?;
            let enforced = enforce(&s, &phi, &e).map_err(runtime)?;
            // An untouched signal is passed through byte for byte.
            let text = if enforced.signal == s {
                raw
            } else {
                enforced.signal.to_csv()
            };
            write(output.out.as_ref(), &text)?;
            if let Some(r) = report {
                let mut doc = enforced.report.to_json();
                doc.push('\n');
                write(Some(&r), &doc)?;
            }
            if let Some(d) = plot {
                write(Some(&d), &plot_data(&s, &enforced.signal)?)?;
            }
        }
        Command::Monitor {
            property: p,
            signal: path,
            output,
            format,
        } => {
            let phi = property(&p.property)?;
            let (s, _) = signal(&path)?;
            let verdict = satisfies(&s, &phi).map_err(runtime)?;
            let text = match format {
                Format::Json => json(&verdict),
                Format::Csv => format!(
                    "satisfied,witness\n{},{}\n",
                    verdict.satisfied,
                    verdict.witness.as_ref().map(|w| w.to_string()).unwrap_or_default()
                ),
            };
            write(output.out.as_ref(), &text)?;
            if !verdict.satisfied {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Bench {
            counts,
            reps,
            seed,
            eps: e,
            output,
            format,
        } => {
            let e = eps(&e)?;
            let records = bench_stopping(&counts, reps, seed, &e).map_err(|err| match err {
                stl_enforce::bench::BenchError::Enforce(_) => runtime(err),
                _ => CliError::Usage(err.to_string()),
            })?;
            let text = match format {
                Format::Csv => to_csv(&records),
                Format::Json => json(&records),
            };
            write(output.out.as_ref(), &text)?;
        }
        Command::Generate {
            scenario,
            satisfying,
            violations,
            seed,
            output,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = match (scenario, violations) {
                (ScenarioName::RunningExample, None) => running_example_signal(),
                (ScenarioName::Stopping, Some(n)) => {
                    if n % 2 == 1 || n > stl_enforce::bench::MAX_VIOLATIONS {
                        return Err(CliError::Usage(format!("cannot place {n} violation points")));
                    }
                    stopping_with_crossings(&mut rng, n)
                }
                (_, Some(_)) => {
                    return Err(CliError::Usage("--violations applies to the stopping scenario only".into()))
                }
                (name, None) => {
                    let sc = match name {
                        ScenarioName::Stopping => Scenario::Stopping,
                        ScenarioName::Charging => Scenario::Charging,
                        _ => Scenario::Deceleration,
                    };
                    if satisfying {
                        sc.satisfying(&mut rng)
                    } else {
                        sc.violating(&mut rng)
                    }
                }
            };
            write(output.out.as_ref(), &s.to_csv())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
