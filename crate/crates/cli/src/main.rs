//! `rcar`: strict stationarity tests for time series stored as CSV.
//!
//! Exit codes: 0 a verdict was produced, 2 usage error, 3 data error,
//! 4 numeric failure.

mod input;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rcar_core::dgp::{classify, simulate, DEFAULT_ZERO_TOL};
use rcar_core::mc::{self, presets, ErrorLaw};
use rcar_core::rtest::{run_test, strong_decide, CriticalValueLaw, GFunction, RRule};
use rcar_core::stat::{preprocess_chain, PRule, DEFAULT_GLS_CBAR};
use rcar_core::{Error, NullHypothesis, Preprocess, RcarParams, RngStream, TestConfig, TimeSeries};

use input::{InputSpec, Loaded};

/// Environment variable holding the worker count for Monte Carlo runs.
const WORKERS_ENV: &str = "RCAR_WORKERS";
/// Shortest series the CLI will test.
const MIN_OBSERVATIONS: usize = 20;

/// A problem with the input data rather than with the invocation.
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "rcar", version, about = "Randomised tests for strict stationarity of RCAR(1) series")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    JsonLines,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one randomised test on a CSV column.
    Test {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Apply the strong decision rule over S randomisations.
    Decide {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        test: TestArgs,
        /// Number of randomisations S.
        #[arg(long = "S", default_value_t = 1000)]
        s_reps: usize,
        /// Repeat the decision on first differences of the (preprocessed) data.
        #[arg(long)]
        also_diff: bool,
    },
    /// Report E ln|phi + b_0| for Gaussian b_0 and the implied regime.
    Classify {
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long = "sigma-b2", default_value_t = 0.0)]
        sigma_b2: f64,
        #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
        zero_tol: f64,
    },
    /// Write a simulated RCAR(1) path as CSV.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long = "sigma-b2", default_value_t = 0.0)]
        sigma_b2: f64,
        /// Error law: gaussian, t2 or t1.
        #[arg(long, default_value = "gaussian", value_parser = parse_law)]
        errors: ErrorLaw,
        #[arg(long = "T")]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = rcar_core::dgp::DEFAULT_BURN_IN)]
        burn_in: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x0: f64,
        /// Destination file; standard output if omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a predefined scenario grid and print rejection frequencies.
    McTable {
        /// table1, table2, table3 or table4.
        name: String,
        #[arg(long, default_value_t = mc::DEFAULT_REPS)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only these error laws.
        #[arg(long, value_delimiter = ',', value_parser = parse_law)]
        errors: Vec<ErrorLaw>,
        /// Keep only these sample sizes.
        #[arg(long = "T", value_delimiter = ',')]
        t: Vec<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// CSV file, or `-` for standard input.
    file: PathBuf,
    /// Column to test, by header name or 1-based index; defaults to the
    /// rightmost numeric column.
    #[arg(long)]
    column: Option<String>,
    /// Date column, reported but not used.
    #[arg(long)]
    date_column: Option<String>,
    /// Treat the first row as data even if it looks like a header.
    #[arg(long)]
    no_header: bool,
    /// Skip rows whose value is missing instead of failing.
    #[arg(long)]
    drop_missing: bool,
    /// Transformations applied in the order given.
    #[arg(long, value_enum, value_delimiter = ',')]
    preprocess: Vec<Step>,
    /// Local-to-unity constant for gls-detrend.
    #[arg(long, default_value_t = DEFAULT_GLS_CBAR, allow_hyphen_values = true)]
    gls_cbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Step {
    None,
    Demean,
    OlsDetrend,
    GlsDetrend,
    Log,
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NullArg {
    Stationary,
    Nonstationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GArg {
    DoubleExp,
    Exp,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriticalArg {
    Chi2,
    NormalLiteral,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long, value_enum, default_value_t = NullArg::Stationary)]
    null: NullArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Number of randomisation draws; defaults to T.
    #[arg(long = "R")]
    r: Option<usize>,
    /// Training window length; defaults to ceil(2 ln ln T).
    #[arg(long = "p")]
    p: Option<usize>,
    /// Exponent of ln T in the scaling sequence.
    #[arg(long, default_value_t = 1.25)]
    beta: f64,
    #[arg(long, value_enum, default_value_t = GArg::DoubleExp)]
    g: GArg,
    #[arg(long, value_enum, default_value_t = CriticalArg::Chi2)]
    critical: CriticalArg,
    /// Do not demean the training window when computing v_p.
    #[arg(long)]
    no_demean: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_law(s: &str) -> std::result::Result<ErrorLaw, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl TestArgs {
    fn config(&self) -> TestConfig {
        let mut cfg = TestConfig::default().with_null(match self.null {
            NullArg::Stationary => NullHypothesis::Stationary,
            NullArg::Nonstationary => NullHypothesis::Nonstationary,
        });
        cfg.alpha = self.alpha;
        cfg.beta = self.beta;
        cfg.g = match self.g {
            GArg::DoubleExp => GFunction::DoubleExp,
            GArg::Exp => GFunction::SingleExp,
            GArg::Identity => GFunction::Identity,
        };
        cfg.critical_value_law = match self.critical {
            CriticalArg::Chi2 => CriticalValueLaw::ChiSquared1,
            CriticalArg::NormalLiteral => CriticalValueLaw::StdNormalLiteral,
        };
        if let Some(r) = self.r {
            cfg.r_rule = RRule::Fixed { r };
        }
        if let Some(p) = self.p {
            cfg.diagnostic.p_rule = PRule::Fixed { p };
        }
        cfg.diagnostic.demean_window = !self.no_demean;
        cfg
    }
}

impl InputArgs {
    fn steps(&self) -> Vec<Preprocess> {
        self.preprocess
            .iter()
            .map(|s| match s {
                Step::None => Preprocess::None,
                Step::Demean => Preprocess::Demean,
                Step::OlsDetrend => Preprocess::OlsDetrend,
                Step::GlsDetrend => Preprocess::GlsDetrend { cbar: self.gls_cbar },
                Step::Log => Preprocess::LogTransform,
                Step::Diff => Preprocess::FirstDifference,
            })
            .collect()
    }

    fn load(&self) -> Result<(Loaded, TimeSeries)> {
        let loaded = input::load(&InputSpec {
            path: &self.file,
            column: self.column.as_deref(),
            date_column: self.date_column.as_deref(),
            no_header: self.no_header,
            drop_missing: self.drop_missing,
        })?;
        if loaded.dropped > 0 {
            log::info!("dropped {} rows with missing values", loaded.dropped);
        }
        let raw = TimeSeries::new(loaded.values.clone())?.with_label(loaded.label.clone());
        let series = preprocess_chain(&raw, &self.steps())?;
        if series.len() < MIN_OBSERVATIONS {
            return Err(DataError(format!(
                "series has {} usable observations; at least {MIN_OBSERVATIONS} are required",
                series.len()
            ))
            .into());
        }
        Ok((loaded, series))
    }
}

fn open_out(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(UsageError(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")).into()),
        },
        _ => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    let format = cli.format;
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Test { input, test } => {
            let (loaded, series) = input.load()?;
            let cfg = test.config();
            let outcome = run_test(&series, &cfg, RngStream::new(test.seed, 0))?;
            report::write_outcome(&mut stdout, format, &loaded, &outcome)?;
        }
        Command::Decide { input, test, s_reps, also_diff } => {
            let (loaded, series) = input.load()?;
            let cfg = test.config().with_s_reps(s_reps);
            let mut passes = vec![("levels", series.clone())];
            if also_diff {
                passes.push(("differences", preprocess_chain(&series, &[Preprocess::FirstDifference])?));
            }
            let mut reports = Vec::new();
            for (k, (name, s)) in passes.into_iter().enumerate() {
                reports.push((name, strong_decide(&s, &cfg, RngStream::new(test.seed, k as u64))?));
            }
            report::write_decisions(&mut stdout, format, &loaded, cfg.alpha, &reports)?;
        }
        Command::Classify { phi, sigma_b2, zero_tol } => {
            if !(sigma_b2 >= 0.0) || !phi.is_finite() || !sigma_b2.is_finite() {
                return Err(UsageError("phi must be finite and sigma-b2 non-negative".into()).into());
            }
            let label = classify(phi, sigma_b2, zero_tol);
            report::write_regime(&mut stdout, format, phi, sigma_b2, &label)?;
        }
        Command::Simulate { phi, sigma_b2, errors, t, seed, burn_in, x0, out } => {
            let params = RcarParams::gaussian(phi, sigma_b2).with_errors(errors.dist()).with_burn_in(burn_in).with_x0(x0);
            let series = simulate(&params, t, RngStream::new(seed, 0))?;
            let mut w = csv::Writer::from_writer(open_out(out.as_ref())?);
            w.write_record(["t", "x"])?;
            for (i, x) in series.values().iter().enumerate() {
                w.write_record([(i + 1).to_string(), x.to_string()])?;
            }
            w.flush()?;
        }
        Command::McTable { name, reps, seed, errors, t, out } => {
            let mut grid = presets::by_name(&name, reps)
                .ok_or_else(|| UsageError(format!("unknown table '{name}'; expected table1..table4")))?;
            grid.retain(|sc| (errors.is_empty() || errors.contains(&sc.error_law)) && (t.is_empty() || t.contains(&sc.t)));
            if grid.is_empty() {
                return Err(UsageError("the filters leave no scenarios".into()).into());
            }
            let workers = workers_from_env()?;
            log::info!("running {} scenarios x {reps} replications", grid.len());
            let rep = mc::run_grid_with_workers(&grid, seed, workers)?;
            let mut w = open_out(out.as_ref())?;
            match format {
                Format::Text => write!(w, "{}", rep.to_text())?,
                Format::Csv => write!(w, "{}", rep.to_csv())?,
                Format::JsonLines => {
                    for r in &rep.results {
                        writeln!(w, "{}", serde_json::to_string(r)?)?;
                    }
                }
            }
            w.flush()?;
        }
    }
    stdout.flush()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if err.downcast_ref::<DataError>().is_some() || err.downcast_ref::<csv::Error>().is_some() {
        return 3;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Parameter(_)) => 2,
        Some(Error::InsufficientData { .. } | Error::DegenerateSeries | Error::NonFinite { .. } | Error::Domain(_)) => 3,
        Some(Error::Overflow { .. } | Error::Numeric(_)) => 4,
        None => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rcar: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
