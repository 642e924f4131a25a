//! `verify`: the module contracts re-checked on one configured instance.

use std::collections::BTreeMap;
use std::sync::Arc;

use effop::conductivity::{wiener_fraction_bounds, DenseModel, PhaseMap};
use effop::operator::DEFAULT_INVERT_RTOL;
use effop::random::{self, SeededRng};
use effop::zproblem::{E, J};
use effop::{realize, Complex64, Factorization, Operator, PencilPoint, Scalar, SubspaceCollection, ZProblem};
use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::config::{CliError, CliResult};

const PERTURBATIONS: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub pass: bool,
    /// Worst relative residual or Loewner violation over all points.
    pub residual: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub d: usize,
    pub n: usize,
    pub n_phases: usize,
    pub points: Vec<Vec<[f64; 2]>>,
    pub checks: BTreeMap<String, Check>,
    pub pass: bool,
}

/// Runs every applicable check. Checks that need real positive `z` use only
/// those points and are omitted when there are none.
pub fn run(pm: &PhaseMap, points: &[PencilPoint], tol: f64, seed: u64) -> CliResult<VerifyReport> {
    let real = points.iter().all(|z| z.values().iter().all(|c| c.im == 0.0));
    let checks = if real {
        checks::<f64>(pm, points, tol, seed)?
    } else {
        checks::<Complex64>(pm, points, tol, seed)?
    };
    let grid = pm.grid();
    Ok(VerifyReport {
        d: grid.d,
        n: grid.n,
        n_phases: pm.n_phases(),
        points: points.iter().map(|z| z.values().iter().map(|c| [c.re, c.im]).collect()).collect(),
        pass: checks.values().all(|c| c.pass),
        checks,
    })
}

struct Ctx<'a, T: Scalar> {
    model: &'a DenseModel<T>,
    dual: SubspaceCollection<T>,
    pm: &'a PhaseMap,
}

type CheckFn<T> = fn(&Ctx<'_, T>, &PencilPoint, &mut SeededRng) -> effop::Result<f64>;

fn checks<T: Scalar>(pm: &PhaseMap, points: &[PencilPoint], tol: f64, seed: u64) -> CliResult<BTreeMap<String, Check>> {
    let model = DenseModel::<T>::new(pm)?;
    let c = model.collection();
    let labels = c
        .labels()
        .ok_or_else(|| CliError::Numerical("phase collection has no labels".into()))?
        .to_vec();
    let dual = SubspaceCollection::from_labels(Arc::new(c.space().swap_ej()), labels, c.n())?;
    let ctx = Ctx { model: &model, dual, pm };

    let mut all: Vec<(&str, CheckFn<T>, bool)> = vec![
        ("prop1_equality", prop1, false),
        ("duality", duality, false),
        ("ohm", ohm, false),
        ("homogeneity", homogeneity, false),
        ("realization", realization, false),
        ("wiener", wiener, true),
        ("bound_chain", bound_chain, true),
        ("monotonicity", monotonicity, true),
        ("concavity", concavity, true),
        ("dirichlet", dirichlet, true),
        ("thomson", thomson, true),
    ];
    if pm.grid().d == 2 {
        all.push(("kdm", kdm, false));
    }
    let mut rng = random::rng(seed);
    let mut out = BTreeMap::new();
    for (name, f, needs_positive) in all {
        let pts: Vec<&PencilPoint> = points
            .iter()
            .filter(|z| !needs_positive || z.as_positive_reals().is_some())
            .collect();
        if pts.is_empty() {
            continue;
        }
        let mut residual = 0.0f64;
        let mut error = None;
        for z in pts {
            match f(&ctx, z, &mut rng) {
                Ok(r) => residual = residual.max(r),
                Err(e) => {
                    error = Some(e.to_string());
                    residual = f64::INFINITY;
                    break;
                }
            }
        }
        out.insert(
            name.to_string(),
            Check {
                pass: error.is_none() && residual <= tol,
                residual,
                tolerance: tol,
                error,
            },
        );
    }
    Ok(out)
}

/// `max(0, -λ_min(B - A)) / max(‖B‖, ‖A‖)`: zero iff `A ⪯ B`.
fn loewner_violation<T: Scalar>(a: &Operator<T>, b: &Operator<T>) -> effop::Result<f64> {
    let diff = b - a;
    let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
    Ok((-diff.min_eigenvalue()?).max(0.0) / scale)
}

fn unit<T: Scalar>(d: usize, j: usize) -> DVector<T> {
    let mut e = DVector::zeros(d);
    e[j] = T::one();
    e
}

fn prop1<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, _: &mut SeededRng) -> effop::Result<f64> {
    let full = ctx.model.collection().problem_at(z)?.effective_operator()?;
    Ok(ctx.model.sigma_star(z)?.rel_diff(&full))
}

/// The dual collection (E and J swapped) at `z⁻¹` against `σ*(z)⁻¹`.
fn duality<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, _: &mut SeededRng) -> effop::Result<f64> {
    let inv = ctx.model.sigma_star(z)?.inverse(DEFAULT_INVERT_RTOL, "σ*")?;
    Ok(ctx.dual.bess_pencil().schur(&z.inverse())?.rel_diff(&inv))
}

fn kdm<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, _: &mut SeededRng) -> effop::Result<f64> {
    ctx.model.duality_residual(z)
}

fn ohm<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, _: &mut SeededRng) -> effop::Result<f64> {
    ctx.model.ohm_residual(z)
}

fn homogeneity<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, _: &mut SeededRng) -> effop::Result<f64> {
    let lambda = 2.5;
    let lhs = ctx.model.sigma_star(&z.scale(Complex64::new(lambda, 0.0)))?;
    Ok(lhs.rel_diff(&ctx.model.sigma_star(z)?.scale(T::from_re(lambda))))
}

fn realization<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, _: &mut SeededRng) -> effop::Result<f64> {
    let p = ctx.model.collection().bess_pencil();
    realize(p, Factorization::Minimal)?.round_trip_residual(p, z)
}

fn wiener<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, _: &mut SeededRng) -> effop::Result<f64> {
    let (lo, hi) = wiener_fraction_bounds(ctx.pm, z)?;
    let ev = ctx.model.sigma_star(z)?.hermitian_eigenvalues()?;
    Ok(ev.iter().map(|&e| (lo - e).max(e - hi).max(0.0) / hi).fold(0.0, f64::max))
}

fn bound_chain<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, _: &mut SeededRng) -> effop::Result<f64> {
    let (lo, hi) = ctx.model.collection().wiener_bounds(z)?;
    let s = ctx.model.sigma_star(z)?;
    let zero = Operator::zeros(s.rows(), s.cols());
    Ok(loewner_violation(&zero, &lo)?
        .max(loewner_violation(&lo, &s)?)
        .max(loewner_violation(&s, &hi)?))
}

fn bumped(z: &PencilPoint, rng: &mut impl Rng) -> PencilPoint {
    let w: Vec<f64> = z.values().iter().map(|c| c.re * rng.gen_range(1.0..3.0)).collect();
    PencilPoint::from_real(&w)
}

fn monotonicity<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, rng: &mut SeededRng) -> effop::Result<f64> {
    let w = bumped(z, rng);
    loewner_violation(&ctx.model.sigma_star(z)?, &ctx.model.sigma_star(&w)?)
}

fn concavity<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, rng: &mut SeededRng) -> effop::Result<f64> {
    let w: Vec<f64> = z.values().iter().map(|c| c.re * rng.gen_range(0.2..5.0)).collect();
    let w = PencilPoint::from_real(&w);
    let t = 0.5;
    let mid: Vec<f64> = z.values().iter().zip(w.values()).map(|(a, b)| t * a.re + (1.0 - t) * b.re).collect();
    let combo = &ctx.model.sigma_star(z)?.scale(T::from_re(t)) + &ctx.model.sigma_star(&w)?.scale(T::from_re(1.0 - t));
    loewner_violation(&combo, &ctx.model.sigma_star(&PencilPoint::from_real(&mid))?)
}

/// Energy at the computed minimizer against `(E0, σ* E0)` and against
/// random perturbations, for `E0 = e_j`.
fn variational<T: Scalar>(p: &ZProblem<T>, eff: &Operator<T>, rng: &mut SeededRng) -> effop::Result<f64> {
    let [du, de, _] = p.space().dims();
    let mut worst = 0.0f64;
    for j in 0..du {
        let e0 = unit::<T>(du, j);
        let sol = p.solve(&e0)?;
        let w = p.dirichlet_energy(&e0, &sol.e).real_f64();
        let target = eff.get(j, j).real_f64();
        worst = worst.max((w - target).abs() / target.abs());
        for _ in 0..PERTURBATIONS {
            let scale = rng.gen_range(1e-3..1.0);
            let pert = DVector::from_fn(de, |_, _| T::from_re(scale * rng.gen_range(-1.0..1.0)));
            let other = p.dirichlet_energy(&e0, &(&sol.e + pert)).real_f64();
            worst = worst.max((w - other).max(0.0) / w.abs());
        }
    }
    Ok(worst)
}

fn dirichlet<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, rng: &mut SeededRng) -> effop::Result<f64> {
    let p = ctx.model.collection().problem_at(z)?;
    variational(&p, &ctx.model.sigma_star(z)?, rng)
}

/// Thomson's principle is Dirichlet's for the dual problem at `z⁻¹`.
fn thomson<T: Scalar>(ctx: &Ctx<'_, T>, z: &PencilPoint, rng: &mut SeededRng) -> effop::Result<f64> {
    let zi = z.inverse();
    let p = ctx.dual.problem_at(&zi)?;
    debug_assert_eq!(p.space().dims()[E], ctx.model.collection().space().dims()[J]);
    let inv = ctx.model.sigma_star(z)?.inverse(DEFAULT_INVERT_RTOL, "σ*")?;
    variational(&p, &inv, rng)
}

trait RealF64 {
    fn real_f64(self) -> f64;
}

impl<T: Scalar> RealF64 for T {
    fn real_f64(self) -> f64 {
        self.to_complex().re
    }
}
