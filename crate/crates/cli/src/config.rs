//! Parsing of geometry sources and coefficient points, and the CLI error type.

use std::fmt;
use std::path::Path;

use effop::conductivity::{make_geometry, Geometry, GridSpec, PhaseMap};
use effop::{Complex64, PencilPoint};

/// Exit code 1: a verification check failed.
pub const EXIT_VERIFY: u8 = 1;
/// Exit code 2: bad configuration or input validation failure.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code 3: a numerical failure (singular system, no convergence,
/// residual above tolerance).
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<effop::Error> for CliError {
    fn from(e: effop::Error) -> Self {
        use effop::Error::*;
        match e {
            NotInvertible { .. }
            | HypothesisFailed(_)
            | CgNotConverged { .. }
            | StructuralCondition { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn config<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

/// A phase map from a JSON file or a `gen:` shorthand:
/// `gen:checkerboard:N`, `gen:laminate:N:axis:frac`,
/// `gen:random:N:phases:seed`. Generated geometries are planar.
pub fn load_geometry(source: &str) -> CliResult<PhaseMap> {
    let Some(spec) = source.strip_prefix("gen:") else {
        let text = std::fs::read_to_string(Path::new(source))
            .map_err(|e| CliError::Config(format!("cannot read geometry file {source}: {e}")))?;
        return Ok(PhaseMap::from_json_str(&text)?);
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let int = |s: &str, what: &str| -> CliResult<usize> {
        s.parse()
            .map_err(|_| CliError::Config(format!("geometry {source}: {what} must be a non-negative integer, got {s:?}")))
    };
    let (kind, n) = match parts.as_slice() {
        ["checkerboard", n] => (Geometry::Checkerboard, int(n, "N")?),
        ["laminate", n, axis, frac] => {
            let fraction: f64 = frac
                .parse()
                .map_err(|_| CliError::Config(format!("geometry {source}: bad fraction {frac:?}")))?;
            (Geometry::Laminate { axis: int(axis, "axis")?, fraction }, int(n, "N")?)
        }
        ["random", n, phases, seed] => {
            let seed: u64 = seed
                .parse()
                .map_err(|_| CliError::Config(format!("geometry {source}: bad seed {seed:?}")))?;
            (Geometry::Random { n_phases: int(phases, "phases")?, seed }, int(n, "N")?)
        }
        _ => {
            return config(format!(
                "unknown geometry {source:?}; expected a file or gen:checkerboard:N, \
                 gen:laminate:N:axis:frac, gen:random:N:phases:seed"
            ))
        }
    };
    Ok(make_geometry(&kind, GridSpec::new(2, n)?)?)
}

/// `"re,im;re,im;..."`; an entry without a comma is real.
pub fn parse_point(s: &str) -> CliResult<PencilPoint> {
    let mut z = Vec::new();
    for entry in s.split(';') {
        let entry = entry.trim();
        let num = |t: &str| -> CliResult<f64> {
            t.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad number {t:?} in z point {s:?}")))
        };
        let c = match entry.split_once(',') {
            Some((re, im)) => Complex64::new(num(re)?, num(im)?),
            None => Complex64::new(num(entry)?, 0.0),
        };
        z.push(c);
    }
    Ok(PencilPoint::new(z))
}

/// Parses every point, checks the phase count and membership in `D`
/// before any solve, and lists all offenders at once.
pub fn parse_points(raw: &[String], n_phases: usize) -> CliResult<Vec<PencilPoint>> {
    if raw.is_empty() {
        return config("at least one --z point is required");
    }
    let points = raw.iter().map(|s| parse_point(s)).collect::<CliResult<Vec<_>>>()?;
    check_points(&points, n_phases)?;
    Ok(points)
}

pub fn check_points(points: &[PencilPoint], n_phases: usize) -> CliResult<()> {
    let mut problems = Vec::new();
    for (k, z) in points.iter().enumerate() {
        if z.len() != n_phases {
            problems.push(format!("point {} has {} entries, geometry has {n_phases} phases", k + 1, z.len()));
        } else if !z.in_domain_d() {
            problems.push(format!("point {} {} not in domain D", k + 1, format_point(z)));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        config(format!("z not in domain D or malformed:\n  {}", problems.join("\n  ")))
    }
}

pub fn format_point(z: &PencilPoint) -> String {
    let parts: Vec<String> = z.values().iter().map(|c| format!("{},{}", c.re, c.im)).collect();
    format!("({})", parts.join(";"))
}
