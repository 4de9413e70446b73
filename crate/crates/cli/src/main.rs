//! `epiconj` command line: single solves, acceptance suites and the
//! subgradient comparison.
//!
//! Exit codes: 0 success, 2 non-converged run or failed criterion,
//! 1 usage or engine error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use epiconj::baseline::compare;
use epiconj::io::{write_trace_csv, RunReport};
use epiconj::problems::{find, load_problem_file, ProblemSpec};
use epiconj::solver::solve;
use epiconj::suite::{run_suite, SuiteKind};
use epiconj::{Backend, Error, SolverConfig, Vector};

const SEED_VAR: &str = "EPICONJ_SEED";

#[derive(Parser, Debug)]
#[command(name = "epiconj", version, about = "Conjugate epi-projection solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and emit its trace.
    Run(RunArgs),
    /// Run an acceptance block and print PASS/FAIL per criterion.
    Suite(SuiteArgs),
    /// Epi-projection against a normalized subgradient method at equal budget.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Exact,
    Cutting,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Cutting => Backend::Cutting,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Rates,
    Lemmas,
    Engines,
    All,
}

impl From<SuiteArg> for SuiteKind {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Rates => SuiteKind::Rates,
            SuiteArg::Lemmas => SuiteKind::Lemmas,
            SuiteArg::Engines => SuiteKind::Engines,
            SuiteArg::All => SuiteKind::All,
        }
    }
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Catalog name or path to a problem file.
    #[arg(long)]
    problem: String,
    #[arg(long, value_enum, default_value = "exact")]
    backend: BackendArg,
    /// Comma-separated start point, or `zero`.
    #[arg(long, default_value = "zero")]
    x0: String,
    #[arg(long)]
    eps_g: Option<f64>,
    #[arg(long)]
    eps_inner: Option<f64>,
    /// Maximum outer iterations.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    output: OutputFormat,
    /// Trace destination; standard output when absent (the summary line
    /// then goes to standard error).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SuiteArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
    /// Sampling seed; the EPICONJ_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    problem: String,
    /// Oracle calls allowed to each method.
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value = "zero")]
    x0: String,
    /// Table destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure that maps to exit code 1.
#[derive(Debug)]
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(e.to_string())
    }
}

fn resolve_problem(arg: &str) -> Result<ProblemSpec, Failure> {
    if let Some(p) = find(arg) {
        return Ok(p);
    }
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(load_problem_file(path)?);
    }
    Err(Failure(format!("unknown problem `{arg}` (not a catalog name or a readable file)")))
}

fn parse_x0(arg: &str, dim: usize) -> Result<Vector, Failure> {
    if arg == "zero" {
        return Ok(Vector::zeros(dim));
    }
    let xs = arg
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure(format!("bad --x0 `{arg}`: {e}")))?;
    if xs.len() != dim {
        return Err(Failure(format!("--x0 has {} entries, problem dimension is {dim}", xs.len())));
    }
    Ok(Vector::from_vec(xs))
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, Failure> {
    let p = resolve_problem(&args.problem)?;
    let x0 = parse_x0(&args.x0, p.dim())?;
    let mut cfg = SolverConfig::with_backend(args.backend.into());
    if let Some(v) = args.eps_g {
        cfg.eps_g = v;
    }
    if let Some(v) = args.eps_inner {
        cfg.eps_inner = v;
    }
    if let Some(v) = args.max_iter {
        cfg.max_outer = v;
    }
    cfg.validate()?;

    let start = Instant::now();
    let trace = solve(&p, &x0, &cfg)?;
    let report = RunReport::new(trace, &cfg, p.f_star, start.elapsed().as_secs_f64());

    let mut w = sink(&args.out)?;
    match args.output {
        OutputFormat::Csv => write_trace_csv(&mut w, &report.trace)?,
        OutputFormat::Json => writeln!(w, "{}", report.to_json()?)?,
    }
    w.flush()?;
    drop(w);

    let summary = format!(
        "problem={} backend={} iterations={} f_hat={:?} termination={} classification={}",
        report.problem,
        report.backend,
        report.trace.iterations(),
        report.trace.f_hat,
        report.trace.termination.map_or("none", |t| t.as_str()),
        report.rates.classification,
    );
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(if report.trace.converged() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn seed_override(flag: u64) -> Result<u64, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure(format!("{SEED_VAR} must be a non-negative integer, got `{s}`"))),
        Err(_) => Ok(flag),
    }
}

fn cmd_suite(args: SuiteArgs) -> Result<ExitCode, Failure> {
    let seed = seed_override(args.seed)?;
    let outcomes = run_suite(args.suite.into(), seed);
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed (seed {seed})", outcomes.len() - failed);
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode, Failure> {
    let p = resolve_problem(&args.problem)?;
    let x0 = parse_x0(&args.x0, p.dim())?;
    let c = compare(&p, &x0, args.budget, &SolverConfig::default())?;
    let mut w = sink(&args.out)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    writeln!(w, "call,epi_best,subgradient_best,epi_error,subgradient_error")?;
    for r in &c.rows {
        writeln!(
            w,
            "{},{:?},{:?},{},{}",
            r.call,
            r.epi_best,
            r.subgradient_best,
            opt(r.epi_error),
            opt(r.subgradient_error)
        )?;
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
