//! Effective conductivity of `n`-phase periodic media on a voxel grid.
//!
//! Fields live on `[0, 2π)^d` sampled at `N` points per axis. The space of
//! vector fields splits into constants `U`, discrete gradients `E` and
//! divergence-free fields `J`, and each phase contributes the projection
//! onto fields supported in it. The resulting collection is an exact
//! finite-dimensional instance of the abstract theory, so every identity
//! holds to solver tolerance rather than discretization accuracy.

mod cg;
mod geometry;
mod grid;
mod hodge;

pub use cg::{cg_cell_solve, CgReport, CgSolution, CgSolver, DEFAULT_CG_TOL};
pub use geometry::{make_geometry, Geometry, PhaseMap, PhaseMapJson};
pub use grid::{GridSpec, PeriodicField};
pub use hodge::{
    check_dense_cap, hodge_projections, phase_collection, rotation_operator, HodgeDecomposition, DENSE_CAP,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiphase::{PencilPoint, SubspaceCollection};
use crate::operator::{solve_checked, Operator, DEFAULT_INVERT_RTOL};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Dense,
    Cg,
}

/// Dense model of one phase map: explicit bases and the compressed pencil.
#[derive(Debug, Clone)]
pub struct DenseModel<T: Scalar> {
    pm: PhaseMap,
    hodge: HodgeDecomposition<T>,
    collection: SubspaceCollection<T>,
}

impl<T: Scalar> DenseModel<T> {
    pub fn new(pm: &PhaseMap) -> Result<Self> {
        let hodge = hodge_projections::<T>(pm.grid())?;
        let collection = phase_collection(pm, &hodge)?;
        collection.bess_pencil();
        Ok(Self {
            pm: pm.clone(),
            hodge,
            collection,
        })
    }

    pub fn phase_map(&self) -> &PhaseMap {
        &self.pm
    }

    pub fn hodge(&self) -> &HodgeDecomposition<T> {
        &self.hodge
    }

    pub fn collection(&self) -> &SubspaceCollection<T> {
        &self.collection
    }

    /// `σ*(z)` in the canonical basis of constant fields.
    pub fn sigma_star(&self, z: &PencilPoint) -> Result<Operator<T>> {
        self.collection.bess_pencil().schur(z)
    }

    /// The curl-free field `E` solving the cell problem for `E0 = e0`.
    pub fn cell_field(&self, z: &PencilPoint, e0: &[T]) -> Result<PeriodicField<T>> {
        z.require_in_domain()?;
        let grid = self.pm.grid();
        if e0.len() != grid.d {
            return Err(Error::DimensionMismatch {
                context: "E0 components",
                expected: grid.d,
                found: e0.len(),
            });
        }
        let pencil = self.collection.bess_pencil();
        let a = pencil.at(z)?;
        let (du, de) = (pencil.dim_h0(), pencil.dim_h1());
        let a10 = a.submatrix(du, de, 0, du);
        let a11 = a.submatrix(du, de, du, de);
        let rhs = a10.matrix() * DMatrix::from_column_slice(du, 1, e0);
        let coords = -solve_checked(a11.matrix(), &rhs, DEFAULT_INVERT_RTOL, "L11")?;
        let ambient = self.hodge.space().basis(crate::zproblem::E).matrix() * coords.column(0);
        PeriodicField::from_coords(grid, &ambient)
    }

    /// `⟨σ (E0 + E)⟩`, the averaged current of a cell solution.
    pub fn averaged_flux(&self, z: &PencilPoint, e0: &[T], e: &PeriodicField<T>) -> Result<Vec<T>> {
        let zs: Vec<T> = z.to_field()?;
        let total = PeriodicField::constant(self.pm.grid(), e0).add(e);
        Ok(total.scale_by_cell(|cell| zs[self.pm.phase(cell) - 1]).average())
    }

    /// `‖⟨σ(e_j + E_j)⟩ - σ* e_j‖ / ‖σ*‖` over all `j`, recomputed from the
    /// solved fields.
    pub fn ohm_residual(&self, z: &PencilPoint) -> Result<f64> {
        let sigma = self.sigma_star(z)?;
        let d = self.pm.grid().d;
        let mut flux = Operator::<T>::zeros(d, d).into_matrix();
        for j in 0..d {
            let mut e0 = vec![T::zero(); d];
            e0[j] = T::one();
            let e = self.cell_field(z, &e0)?;
            for (a, v) in self.averaged_flux(z, &e0, &e)?.into_iter().enumerate() {
                flux[(a, j)] = v;
            }
        }
        Ok(Operator::from_matrix(flux).rel_diff(&sigma))
    }

    /// `‖σ*(z) - R σ*(z⁻¹)⁻¹ R⁻¹‖ / ‖σ*(z)‖` for the 90° rotation `R`.
    pub fn duality_residual(&self, z: &PencilPoint) -> Result<f64> {
        if self.pm.grid().d != 2 {
            return Err(Error::InvalidArgument("duality relation needs d = 2".into()));
        }
        let direct = self.sigma_star(z)?;
        let dual = self.sigma_star(&z.inverse())?.inverse(DEFAULT_INVERT_RTOL, "σ*(z⁻¹)")?;
        let r = Operator::<T>::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let rhs = &(&r * &dual) * &r.adjoint();
        Ok(rhs.rel_diff(&direct))
    }
}

/// `σ*(z)` from a fresh model. The CG backend needs real positive `z`.
pub fn effective_conductivity<T: Scalar>(pm: &PhaseMap, z: &PencilPoint, backend: Backend) -> Result<Operator<T>> {
    match backend {
        Backend::Dense => DenseModel::<T>::new(pm)?.sigma_star(z),
        Backend::Cg => {
            z.require_in_domain()?;
            let solver = CgSolver::new(pm);
            solver
                .sigma_star(z, DEFAULT_CG_TOL, solver.default_max_iter())?
                .sigma
                .cast()
        }
    }
}

/// Relative residual of the 2D duality relation, dense backend.
pub fn duality_relation_check<T: Scalar>(pm: &PhaseMap, z: &PencilPoint) -> Result<f64> {
    if pm.grid().d != 2 {
        return Err(Error::InvalidArgument("duality relation needs d = 2".into()));
    }
    DenseModel::<T>::new(pm)?.duality_residual(z)
}

/// `((Σ f_i / z_i)⁻¹, Σ f_i z_i)` for real positive `z`.
pub fn wiener_fraction_bounds(pm: &PhaseMap, z: &PencilPoint) -> Result<(f64, f64)> {
    if z.len() != pm.n_phases() {
        return Err(Error::DimensionMismatch {
            context: "pencil point length",
            expected: pm.n_phases(),
            found: z.len(),
        });
    }
    let zs = z.require_positive()?;
    let f = pm.fractions();
    let harmonic: f64 = f.iter().zip(&zs).map(|(fi, zi)| fi / zi).sum();
    let arithmetic: f64 = f.iter().zip(&zs).map(|(fi, zi)| fi * zi).sum();
    Ok((1.0 / harmonic, arithmetic))
}
