use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "stl-enforce", version, about = "Enforce STL properties on sampled signals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    Stopping,
    Charging,
    Deceleration,
    RunningExample,
}

#[derive(Debug, Args)]
pub struct Property {
    /// Formula text, or a file containing it.
    #[arg(long)]
    pub property: String,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a signal into the timed word read by the transducer.
    Encode {
        #[command(flatten)]
        property: Property,
        #[arg(long)]
        signal: PathBuf,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Compile a property into its enforcement transducer.
    Build {
        #[command(flatten)]
        property: Property,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Enforce a property and write the corrected signal.
    Enforce {
        #[command(flatten)]
        property: Property,
        #[arg(long)]
        signal: PathBuf,
        #[command(flatten)]
        output: Output,
        /// Margin for strict inequalities.
        #[arg(long, default_value = "1/1000000")]
        eps: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Per-event run as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Input and output side by side: time, then `<var>_in,<var>_out`.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Check a signal against a property. Exits 1 when violated.
    Monitor {
        #[command(flatten)]
        property: Property,
        #[arg(long)]
        signal: PathBuf,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Time enforcement of safe stopping against the number of violations.
    Bench {
        /// Violation counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10,12,14,16,18,20")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "1/1000000")]
        eps: String,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Write a scenario signal.
    Generate {
        #[arg(long, value_enum)]
        scenario: ScenarioName,
        /// Produce a compliant signal instead of a violating one.
        #[arg(long)]
        satisfying: bool,
        /// Exact number of violation points (safe stopping only).
        #[arg(long, conflicts_with = "satisfying")]
        violations: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}
