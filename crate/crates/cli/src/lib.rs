//! Command-line front end: argument parsing, matrix file I/O and report
//! emission for the `perspecta` binary.

pub mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use perspecta_core::catalog::{catalog, CatalogEntry};
use perspecta_core::io::load_matrix;
use perspecta_core::suite::{run_check, CheckConfig, CheckId};
use perspecta_core::{
    geometric_mean, lookup, perspective, relative_entropy, trace_perspective_neg_log, Classification, Error,
    PdMatrix, PerspectiveOrder,
};
use serde::Serialize;

pub use report::{ResolvedConfig, RunReport};

/// Exit status of a successful run, a failed check, a usage problem and a
/// numeric-domain problem.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "perspecta", version, about = "Perspectives of operator convex functions and their randomized verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output format [default: json for eval and mean, text otherwise].
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write output to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Pair {
    /// First argument, a matrix JSON file.
    #[arg(long)]
    pub a: PathBuf,
    /// Second argument, a matrix JSON file.
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the perspective of a catalog function on two matrices.
    Eval {
        /// Catalog id, e.g. neg_log or pow(1.5).
        #[arg(long = "f")]
        f: String,
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_parser = parse_order, default_value = "weight_first")]
        order: PerspectiveOrder,
        #[command(flatten)]
        output: Output,
    },
    /// Run the randomized property checks.
    Verify(VerifyArgs),
    /// List the function catalog.
    Catalog {
        #[arg(long, value_parser = parse_classification)]
        classification: Option<Classification>,
        #[command(flatten)]
        output: Output,
    },
    /// Geometric mean A # B.
    Mean {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        output: Output,
    },
    /// Relative entropy of A with respect to B and the trace of the -log perspective.
    Entropy {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `all` or a comma-separated list of check ids.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Comma-separated catalog ids; defaults to the standard selection.
    #[arg(long = "f")]
    pub f: Option<String>,
    /// Dimensions as an inclusive range `a..b` or a comma list.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    /// Trials per (dimension, function) cell.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, env = "PERSPECTA_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_parser = parse_order, default_value = "weight_first")]
    pub order: PerspectiveOrder,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dims(pub Vec<usize>);

pub fn parse_dims(s: &str) -> Result<Dims, String> {
    let bad = || format!("expected a range like 2..6 or a list like 2,3,4, got '{s}'");
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let dims = if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    Ok(Dims(dims))
}

fn parse_order(s: &str) -> Result<PerspectiveOrder, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_classification(s: &str) -> Result<Classification, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Error carrying the process exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric_domain() { EXIT_NUMERIC } else { EXIT_USAGE };
        let mut message = e.to_string();
        if let Error::UnknownFunction(_) = e {
            let ids: Vec<String> = catalog().iter().map(|f| f.id().to_string()).collect();
            message.push_str(&format!("; available: {} (or pow(p) for real p)", ids.join(", ")));
        }
        CliError { code, message }
    }
}

type CliResult<T> = Result<T, CliError>;

fn emit(output: &Output, default: Format, json: impl FnOnce() -> String, text: impl FnOnce() -> String) -> CliResult<()> {
    let body = match output.format.unwrap_or(default) {
        Format::Json => json(),
        Format::Text => text(),
    };
    write_to(output.out.as_deref(), &body)
}

fn write_to(path: Option<&Path>, body: &str) -> CliResult<()> {
    let mut body = body.to_string();
    if !body.ends_with('\n') {
        body.push('\n');
    }
    match path {
        Some(p) => fs::write(p, body).map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::usage(format!("cannot write to stdout: {e}"))),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

fn load_pair(pair: &Pair) -> CliResult<(PdMatrix, PdMatrix)> {
    let a = load_matrix(&pair.a)?;
    let b = load_matrix(&pair.b)?;
    Ok((PdMatrix::new(a)?, PdMatrix::new(b)?))
}

/// Runs a parsed command and returns the exit status.
pub fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Eval { f, pair, order, output } => {
            let f = lookup(&f)?;
            let (a, b) = load_pair(&pair)?;
            let result = perspective(&f, &a, &b, order)?;
            emit(&output, Format::Json, || to_json(&result), || {
                format!(
                    "{}\ninner spectrum: {}",
                    report::format_matrix(&result.value),
                    report::format_list(&result.inner_spectrum)
                )
            })?;
            Ok(EXIT_OK)
        }
        Command::Verify(args) => verify(args),
        Command::Catalog { classification, output } => {
            let entries: Vec<CatalogEntry> = catalog()
                .iter()
                .filter(|f| classification.is_none_or(|c| f.classification() == c))
                .map(CatalogEntry::from)
                .collect();
            emit(&output, Format::Text, || to_json(&entries), || report::catalog_table(&entries))?;
            Ok(EXIT_OK)
        }
        Command::Mean { pair, output } => {
            let (a, b) = load_pair(&pair)?;
            let g = geometric_mean(&a, &b)?.into_hermitian();
            emit(&output, Format::Json, || perspecta_core::io::matrix_to_string(&g), || report::format_matrix(&g))?;
            Ok(EXIT_OK)
        }
        Command::Entropy { pair, output } => {
            let (a, b) = load_pair(&pair)?;
            let entropy = report::EntropyReport::new(relative_entropy(&a, &b)?, trace_perspective_neg_log(&a, &b)?);
            emit(&output, Format::Text, || to_json(&entropy), || entropy.to_text())?;
            Ok(EXIT_OK)
        }
    }
}

/// Builds the suite configuration from flags, validating everything before
/// any check runs.
pub fn resolve_verify(args: &VerifyArgs) -> CliResult<ResolvedConfig> {
    let mut check = CheckConfig {
        seed: args.seed,
        order: args.order,
        ..CheckConfig::default()
    };
    if let Some(Dims(d)) = &args.dims {
        check.dims = d.clone();
    }
    if let Some(t) = args.trials {
        check.trials = t;
    }
    if let Some(tol) = args.tol {
        check.tol = tol;
    }
    if let Some(list) = &args.f {
        check.functions = list.split(',').map(|s| s.trim().to_string()).collect();
    }
    check.validate()?;
    let explicit = args.suite != "all";
    let requested: Vec<CheckId> = if explicit {
        args.suite
            .split(',')
            .map(|s| s.trim().parse::<CheckId>())
            .collect::<Result<_, _>>()
            .map_err(|e| {
                let ids: Vec<&str> = CheckId::ALL.iter().map(|c| c.as_str()).collect();
                CliError::usage(format!("{e}; available: all, {}", ids.join(", ")))
            })?
    } else {
        CheckId::ALL.to_vec()
    };
    let mut suite = Vec::new();
    let mut skipped = Vec::new();
    for id in requested {
        if id.applies_to(&check)? {
            suite.push(id);
        } else if explicit {
            return Err(CliError::usage(format!("no selected function is eligible for {id}")));
        } else {
            skipped.push(id);
        }
    }
    Ok(ResolvedConfig { suite, skipped, check })
}

fn verify(args: VerifyArgs) -> CliResult<u8> {
    let config = resolve_verify(&args)?;
    let started = Instant::now();
    let reports = config
        .suite
        .iter()
        .map(|&id| run_check(id, &config.check))
        .collect::<Result<Vec<_>, _>>()?;
    let report = RunReport::new(config, reports, started.elapsed().as_secs_f64());
    if let Some(path) = &args.report {
        write_to(Some(path), &to_json(&report))?;
    }
    emit(&args.output, Format::Text, || to_json(&report), || report.to_text())?;
    Ok(if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}
