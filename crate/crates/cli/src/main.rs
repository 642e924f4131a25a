//! `effop`: effective conductivity tensors, sweeps, invariant checks and
//! pencil realizations from the command line.

mod config;
mod eval;
mod output;
mod realize;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use effop::conductivity::Backend;
use effop::{random, Factorization, PencilPoint};
use rayon::prelude::*;
use serde::Serialize;

use config::{check_points, load_geometry, parse_point, parse_points, CliError, CliResult, EXIT_NUMERICAL, EXIT_VERIFY};
use eval::{Evaluator, PointReport};
use output::{csv_table, emit, num, to_json, Format};

#[derive(Parser)]
#[command(name = "effop", version, about = "Effective operators of periodic composites and abstract Z-problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Effective tensor σ*(z) at each point.
    Effective(PointArgs),
    /// One CSV row per point, evaluated in parallel, in input order.
    Sweep {
        #[command(flatten)]
        args: PointArgs,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-check duality, bounds, variational principles and realization on
    /// one instance; exit 1 if any check fails.
    Verify(VerifyArgs),
    /// Realize a normalized pencil as an n-phase collection.
    Realize(RealizeArgs),
}

#[derive(Args)]
struct Common {
    /// Relative tolerance for residual checks.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct PointArgs {
    /// Phase map JSON file, or gen:checkerboard:N, gen:laminate:N:axis:frac,
    /// gen:random:N:phases:seed.
    #[arg(long)]
    geometry: String,
    /// Coefficients "re,im;re,im;..." (one entry per phase); repeatable.
    #[arg(long = "z", allow_hyphen_values = true)]
    z: Vec<String>,
    #[arg(long, value_enum, default_value_t = BackendArg::Dense)]
    backend: BackendArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    geometry: String,
    #[arg(long = "z", allow_hyphen_values = true)]
    z: Vec<String>,
    /// Additional random points in D.
    #[arg(long, default_value_t = 0)]
    random_z: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RealizeArgs {
    /// Normalized pencil JSON file.
    #[arg(long)]
    pencil: PathBuf,
    #[arg(long, value_enum, default_value_t = FactorizationArg::Minimal)]
    factorization: FactorizationArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Dense,
    Cg,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Dense => Backend::Dense,
            BackendArg::Cg => Backend::Cg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FactorizationArg {
    Minimal,
    Sqrt,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Effective(args) => cmd_effective(args),
        Command::Sweep { args, jobs } => cmd_sweep(args, jobs),
        Command::Verify(args) => cmd_verify(args),
        Command::Realize(args) => cmd_realize(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn check_tol(tol: f64) -> CliResult<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("--tol must be positive, got {tol}")))
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum Row {
    Done(PointReport),
    Failed { z: Vec<[f64; 2]>, status: String },
}

impl Row {
    fn ok(&self) -> bool {
        matches!(self, Row::Done(r) if r.ok())
    }
}

fn csv_rows(rows: &[Row], n_phases: usize, d: usize) -> String {
    let mut header = Vec::new();
    for i in 1..=n_phases {
        header.push(format!("z{i}_re"));
        header.push(format!("z{i}_im"));
    }
    for a in 1..=d {
        for b in 1..=d {
            header.push(format!("s{a}{b}_re"));
            header.push(format!("s{a}{b}_im"));
        }
    }
    for h in ["wiener_lo", "wiener_hi", "residual", "status"] {
        header.push(h.to_string());
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut cells = Vec::with_capacity(header.len());
            let z = match row {
                Row::Done(r) => &r.z,
                Row::Failed { z, .. } => z,
            };
            cells.extend(z.iter().flat_map(|c| [num(c[0]), num(c[1])]));
            match row {
                Row::Done(r) => {
                    cells.extend(r.sigma_star.iter().flatten().flat_map(|c| [num(c[0]), num(c[1])]));
                    let (lo, hi) = r
                        .wiener
                        .as_ref()
                        .map_or((String::new(), String::new()), |w| (num(w.lower), num(w.upper)));
                    cells.extend([lo, hi, num(r.max_residual()), r.status.clone()]);
                }
                Row::Failed { status, .. } => {
                    cells.extend(std::iter::repeat_n(String::new(), 2 * d * d + 3));
                    cells.push(status.clone());
                }
            }
            cells
        })
        .collect();
    csv_table(&header, &body)
}

fn evaluate_all(args: &PointArgs, jobs: Option<usize>) -> CliResult<(Vec<Row>, usize, usize)> {
    check_tol(args.common.tol)?;
    let pm = load_geometry(&args.geometry)?;
    let points = parse_points(&args.z, pm.n_phases())?;
    let evaluator = Evaluator::new(&pm, args.backend.into(), &points)?;
    let tol = args.common.tol;
    let eval_one = |z: &PencilPoint| match evaluator.evaluate(&pm, z, tol) {
        Ok(r) => Row::Done(r),
        Err(e) => Row::Failed {
            z: z.values().iter().map(|c| [c.re, c.im]).collect(),
            status: format!("error: {e}"),
        },
    };
    let rows = match jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(1) => points.iter().map(eval_one).collect(),
        _ => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(j) = jobs {
                builder = builder.num_threads(j);
            }
            let pool = builder
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            pool.install(|| points.par_iter().map(eval_one).collect())
        }
    };
    Ok((rows, pm.n_phases(), pm.grid().d))
}

fn cmd_effective(args: PointArgs) -> CliResult<u8> {
    let (rows, n_phases, d) = evaluate_all(&args, Some(1))?;
    if let Some(Row::Failed { status, .. }) = rows.iter().find(|r| matches!(r, Row::Failed { .. })) {
        return Err(CliError::Numerical(status.trim_start_matches("error: ").to_string()));
    }
    let text = match args.common.format.unwrap_or(Format::Json) {
        Format::Json if rows.len() == 1 => to_json(&rows[0]),
        Format::Json => to_json(&rows),
        Format::Csv => csv_rows(&rows, n_phases, d),
    };
    emit(&args.common.out, &text)?;
    if rows.iter().all(Row::ok) {
        Ok(0)
    } else {
        eprintln!("error: residual above tolerance");
        Ok(EXIT_NUMERICAL)
    }
}

fn cmd_sweep(args: PointArgs, jobs: Option<usize>) -> CliResult<u8> {
    let (rows, n_phases, d) = evaluate_all(&args, jobs)?;
    let text = match args.common.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows),
        Format::Csv => csv_rows(&rows, n_phases, d),
    };
    emit(&args.common.out, &text)?;
    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed == 0 {
        Ok(0)
    } else {
        eprintln!("error: {failed} of {} rows failed", rows.len());
        Ok(EXIT_NUMERICAL)
    }
}

fn cmd_verify(args: VerifyArgs) -> CliResult<u8> {
    check_tol(args.common.tol)?;
    let pm = load_geometry(&args.geometry)?;
    let mut points = args.z.iter().map(|s| parse_point(s)).collect::<CliResult<Vec<_>>>()?;
    let mut rng = random::rng(args.seed);
    points.extend((0..args.random_z).map(|_| random::point_in_d(&mut rng, pm.n_phases())));
    if points.is_empty() {
        return Err(CliError::Config("verify needs --z points or --random-z".into()));
    }
    check_points(&points, pm.n_phases())?;
    let report = verify::run(&pm, &points, args.common.tol, args.seed)?;
    let text = match args.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => {
            let header: Vec<String> = ["check", "pass", "residual", "tolerance"].iter().map(|s| s.to_string()).collect();
            let rows: Vec<Vec<String>> = report
                .checks
                .iter()
                .map(|(name, c)| vec![name.clone(), c.pass.to_string(), num(c.residual), num(c.tolerance)])
                .collect();
            csv_table(&header, &rows)
        }
    };
    emit(&args.common.out, &text)?;
    if report.pass {
        Ok(0)
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|(_, c)| !c.pass).map(|(n, _)| n.as_str()).collect();
        eprintln!("verification failed: {}", failed.join(", "));
        Ok(EXIT_VERIFY)
    }
}

fn cmd_realize(args: RealizeArgs) -> CliResult<u8> {
    check_tol(args.common.tol)?;
    if args.common.format == Some(Format::Csv) {
        return Err(CliError::Config("realize writes json only".into()));
    }
    let text = std::fs::read_to_string(&args.pencil)
        .map_err(|e| CliError::Config(format!("cannot read pencil file {}: {e}", args.pencil.display())))?;
    let mode = match args.factorization {
        FactorizationArg::Minimal => Factorization::Minimal,
        FactorizationArg::Sqrt => Factorization::SquareRoot,
    };
    let report = realize::run(&text, mode, args.common.tol)?;
    emit(&args.common.out, &to_json(&report))?;
    if report.pass {
        Ok(0)
    } else {
        eprintln!("error: round-trip residual {:.3e} above tolerance", report.max_residual);
        Ok(EXIT_NUMERICAL)
    }
}
