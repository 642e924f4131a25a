//! Per-point evaluation shared by `effective` and `sweep`.

use std::collections::BTreeMap;

use effop::conductivity::{wiener_fraction_bounds, Backend, CgSolver, DenseModel, PhaseMap, DEFAULT_CG_TOL};
use effop::{Complex64, Operator, PencilPoint, Scalar};
use serde::Serialize;

use crate::config::{format_point, CliError, CliResult};
use crate::output::{matrix_pairs, Pair};

/// A model built once per geometry and shared across points.
pub enum Evaluator {
    DenseReal(DenseModel<f64>),
    DenseComplex(DenseModel<Complex64>),
    Cg(CgSolver),
}

impl Evaluator {
    /// The real field is used when every point is real.
    pub fn new(pm: &PhaseMap, backend: Backend, points: &[PencilPoint]) -> CliResult<Self> {
        match backend {
            Backend::Cg => {
                let bad: Vec<String> = points
                    .iter()
                    .filter(|z| z.as_positive_reals().is_none())
                    .map(format_point)
                    .collect();
                if !bad.is_empty() {
                    return Err(CliError::Config(format!(
                        "the cg backend needs real positive z; offending points: {}",
                        bad.join(", ")
                    )));
                }
                Ok(Evaluator::Cg(CgSolver::new(pm)))
            }
            Backend::Dense => {
                let real = points.iter().all(|z| z.values().iter().all(|c| c.im == 0.0));
                Ok(if real {
                    Evaluator::DenseReal(DenseModel::new(pm)?)
                } else {
                    Evaluator::DenseComplex(DenseModel::new(pm)?)
                })
            }
        }
    }

    pub fn evaluate(&self, pm: &PhaseMap, z: &PencilPoint, tol: f64) -> CliResult<PointReport> {
        let mut residuals = BTreeMap::new();
        let mut cg_iterations = None;
        let sigma_star = match self {
            Evaluator::DenseReal(m) => dense(m, z, &mut residuals)?,
            Evaluator::DenseComplex(m) => dense(m, z, &mut residuals)?,
            Evaluator::Cg(solver) => {
                let report = solver.sigma_star(z, DEFAULT_CG_TOL, solver.default_max_iter())?;
                residuals.insert("cg".to_string(), report.residuals.iter().cloned().fold(0.0, f64::max));
                cg_iterations = Some(report.iterations);
                matrix_pairs(&report.sigma)
            }
        };
        let positive = z.as_positive_reals().is_some();
        let wiener = if positive {
            let (lower, upper) = wiener_fraction_bounds(pm, z)?;
            Some(Wiener { lower, upper })
        } else {
            None
        };
        let residual = residuals.values().cloned().fold(0.0, f64::max);
        let status = if residual <= tol {
            "ok".to_string()
        } else {
            format!("residual {residual:.3e} above tolerance {tol:.1e}")
        };
        Ok(PointReport {
            z: z.values().iter().map(|c| [c.re, c.im]).collect(),
            sigma_star,
            wiener,
            hypotheses: Hypotheses {
                in_domain_d: true,
                lm: true,
                h0: true,
                h1: positive,
                h2: positive,
            },
            residuals,
            cg_iterations,
            status,
        })
    }
}

fn dense<T: Scalar>(m: &DenseModel<T>, z: &PencilPoint, residuals: &mut BTreeMap<String, f64>) -> CliResult<Vec<Vec<Pair>>> {
    let s: Operator<T> = m.sigma_star(z)?;
    residuals.insert("ohm".to_string(), m.ohm_residual(z)?);
    if m.phase_map().grid().d == 2 {
        residuals.insert("duality".to_string(), m.duality_residual(z)?);
    }
    Ok(matrix_pairs(&s))
}

#[derive(Debug, Clone, Serialize)]
pub struct Wiener {
    pub lower: f64,
    pub upper: f64,
}

/// Hypotheses of the pencil at `z`. Points are in `D`, so (LM) and (H0)
/// hold; (H1) and (H2) hold exactly for real positive `z`.
#[derive(Debug, Clone, Serialize)]
pub struct Hypotheses {
    pub in_domain_d: bool,
    #[serde(rename = "LM")]
    pub lm: bool,
    #[serde(rename = "H0")]
    pub h0: bool,
    #[serde(rename = "H1")]
    pub h1: bool,
    #[serde(rename = "H2")]
    pub h2: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub z: Vec<Pair>,
    pub sigma_star: Vec<Vec<Pair>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wiener: Option<Wiener>,
    pub hypotheses: Hypotheses,
    pub residuals: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_iterations: Option<Vec<usize>>,
    pub status: String,
}

impl PointReport {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().cloned().fold(0.0, f64::max)
    }
}
