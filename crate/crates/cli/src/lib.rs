//! Command-line front end: argument definitions, command dispatch and
//! report rendering. `main.rs` only handles I/O and exit codes.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use ncmart::sampling::{random_operator, stream_rng};
use ncmart::{Exponent, NcError, Operator, TraceSpace};
use rand::Rng;

mod report;
mod suites;

pub use report::{Report, Row, CSV_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "ncmart", version, about = "Noncommutative martingale BMO and Hardy space toolkit")]
pub struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Random trials per search.
    #[arg(long, global = true, default_value_t = 64)]
    pub budget: usize,

    /// Override the default comparison tolerance.
    #[arg(long, global = true, value_parser = parse_tol)]
    pub tol: Option<f64>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (default: all cores). Reports do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Evaluate norm families on an operator given as JSON.
    Norms {
        /// File with `{"space": ..., "mats": ...}`.
        input: PathBuf,
        /// Comma-separated family tags, or `all`.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        families: Vec<String>,
        #[arg(long = "p", value_delimiter = ',', default_value = "1,2,4", value_parser = parse_exponent)]
        p: Vec<Exponent>,
    },
    /// Direction checks, functional lower bounds and tails.
    JnVerify {
        #[arg(long, value_enum, conflicts_with = "random")]
        instance: Option<InstanceName>,
        /// Matrix size of the named instance.
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Use random instances instead of a named one.
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long = "p", value_delimiter = ',', default_value = "0.5,1,1.5,2,3,4", value_parser = parse_positive)]
        p: Vec<f64>,
    },
    /// Atom validation and decomposition suites.
    AtomsVerify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long = "q", value_delimiter = ',', default_value = "1.25,2,4,inf", value_parser = parse_q)]
        q: Vec<Exponent>,
    },
    /// Explicit constructions with known values.
    Counterexample {
        #[arg(value_enum)]
        name: CounterexampleName,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long = "p", value_delimiter = ',', value_parser = parse_positive)]
        p: Vec<f64>,
        /// Dyadic depth for `sweep-growth`.
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Best-found BMO_c norm of the sweep per matrix size.
    SweepGrowth {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Randomized identities and operator inequalities.
    RandomSuite {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InstanceName {
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CounterexampleName {
    Remark39,
    Remark320,
    SweepGrowth,
}

/// Errors that abort a run (exit code 2). Failed checks do not abort;
/// they are reported in [`Report::failures`].
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] NcError),
}

fn parse_exponent(s: &str) -> Result<Exponent, String> {
    let p: Exponent = s.parse().map_err(|e: NcError| e.to_string())?;
    match p {
        Exponent::Finite(v) if !(v > 0.0) => Err(format!("exponent must be positive, got {s}")),
        _ => Ok(p),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: `{s}`"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("exponent must be positive and finite, got {s}"))
    }
}

fn parse_q(s: &str) -> Result<Exponent, String> {
    let q = parse_exponent(s)?;
    match q {
        Exponent::Finite(v) if v <= 1.0 => Err(format!("q must exceed 1, got {s}")),
        _ => Ok(q),
    }
}

fn parse_tol(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: `{s}`"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("tolerance must be a finite non-negative number, got {s}"))
    }
}

/// Random test operator number `idx` for `seed`: dyadic depth in
/// `1..=max_depth`, matrix size in `1..=4`, Gaussian entries (Hermitian a
/// quarter of the time) at a random scale.
pub fn random_instance(seed: u64, idx: u64, max_depth: usize) -> Operator {
    let mut rng = stream_rng(seed, idx);
    let depth = rng.random_range(1..=max_depth.max(1));
    let n = rng.random_range(1..=4);
    let space = Arc::new(TraceSpace::dyadic(depth, n).expect("valid dyadic shape"));
    let hermitian = rng.random_bool(0.25);
    let scale = rng.random_range(0.1..3.0);
    random_operator(&mut rng, &space, scale, hermitian)
}

/// Run a parsed command line and build its report.
pub fn run(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Norms { input, families, p } => suites::norms(cli, input, families, p),
        Command::JnVerify {
            instance,
            n,
            random,
            trials,
            p,
        } => {
            let named = match (instance, random) {
                (Some(name), false) => Some((*name, *n)),
                (None, true) => None,
                _ => return Err(CliError::Usage("pass exactly one of --instance or --random".into())),
            };
            suites::jn_verify(cli, named, *trials, p)
        }
        Command::AtomsVerify { trials, q } => suites::atoms_verify(cli, *trials, q),
        Command::Counterexample { name, n, p, depth } => match name {
            CounterexampleName::Remark320 => suites::rademacher_row_suite(cli, n, p),
            CounterexampleName::Remark39 => suites::deflated_row_suite(cli, n, p),
            CounterexampleName::SweepGrowth => suites::sweep_growth(cli, n, *depth),
        },
        Command::SweepGrowth { n, depth } => suites::sweep_growth(cli, n, *depth),
        Command::RandomSuite { trials } => suites::random_suite(cli, *trials),
    }
}

/// Render a report in the requested format.
pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    }
}
