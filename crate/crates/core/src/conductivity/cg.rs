//! Matrix-free conjugate gradients for the cell problem with real positive
//! phase conductivities.
//!
//! Solves `Γ1 L Γ1 E = -Γ1 L E0` on the gradient subspace, applying `Γ1` by
//! FFT and `L` pointwise. Uses the same per-frequency directions as the
//! dense bases, so both backends discretize the same operator.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::geometry::PhaseMap;
use super::grid::{GridSpec, PeriodicField};
use crate::error::{Error, Result};
use crate::multiphase::PencilPoint;
use crate::operator::Operator;

/// Relative residual target used when none is given.
pub const DEFAULT_CG_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CgSolution {
    /// The solved field `E` (zero mean, curl-free).
    pub field: PeriodicField<f64>,
    pub iterations: usize,
    /// `‖Γ1 L (E0 + E)‖ / ‖Γ1 L E0‖`, recomputed after the last step.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub sigma: Operator<f64>,
    /// Iterations per unit vector `E0 = e_j`.
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
}

/// FFT plans and per-frequency directions for one phase map. Plans are
/// shared; every solve allocates its own buffers.
pub struct CgSolver {
    pm: PhaseMap,
    grid: GridSpec,
    /// `p(k)` per DFT bin, `d` entries each; zero at `k = 0`.
    directions: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CgSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CgSolver").field("grid", &self.grid).finish()
    }
}

struct Workspace {
    spectra: Vec<Vec<Complex64>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl CgSolver {
    pub fn new(pm: &PhaseMap) -> Self {
        let grid = pm.grid();
        let mut directions = vec![0.0; grid.dim()];
        for bin in 1..grid.cells() {
            let p = grid.gradient_direction(&grid.wavevector(bin));
            directions[bin * grid.d..(bin + 1) * grid.d].copy_from_slice(&p);
        }
        let mut planner = FftPlanner::new();
        Self {
            pm: pm.clone(),
            grid,
            directions,
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Default iteration cap, `5 · dim E`.
    pub fn default_max_iter(&self) -> usize {
        5 * (self.grid.cells() - 1)
    }

    fn workspace(&self) -> Workspace {
        let len = self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len());
        Workspace {
            spectra: vec![vec![Complex64::new(0.0, 0.0); self.grid.cells()]; self.grid.d],
            line: vec![Complex64::new(0.0, 0.0); self.grid.n],
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn fft_all_axes(&self, data: &mut [Complex64], fft: &dyn Fft<f64>, line: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.grid.n;
        let cells = self.grid.cells();
        for axis in 0..self.grid.d {
            let stride = n.pow((self.grid.d - 1 - axis) as u32);
            for start in 0..cells {
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[start + i * stride];
                }
                fft.process_with_scratch(line, scratch);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
    }

    /// `Γ1` in place on cell-major values.
    fn project_gradient(&self, values: &mut [f64], ws: &mut Workspace) {
        let d = self.grid.d;
        let cells = self.grid.cells();
        for a in 0..d {
            for cell in 0..cells {
                ws.spectra[a][cell] = Complex64::new(values[cell * d + a], 0.0);
            }
            let mut spec = std::mem::take(&mut ws.spectra[a]);
            self.fft_all_axes(&mut spec, self.forward.as_ref(), &mut ws.line, &mut ws.scratch);
            ws.spectra[a] = spec;
        }
        for bin in 0..cells {
            let p = &self.directions[bin * d..(bin + 1) * d];
            let s: Complex64 = (0..d).map(|a| ws.spectra[a][bin] * p[a]).sum();
            for (a, &pa) in p.iter().enumerate() {
                ws.spectra[a][bin] = s * pa;
            }
        }
        let scale = 1.0 / cells as f64;
        for a in 0..d {
            let mut spec = std::mem::take(&mut ws.spectra[a]);
            self.fft_all_axes(&mut spec, self.inverse.as_ref(), &mut ws.line, &mut ws.scratch);
            for cell in 0..cells {
                values[cell * d + a] = spec[cell].re * scale;
            }
            ws.spectra[a] = spec;
        }
    }

    fn conductivity(&self, z: &[f64]) -> Vec<f64> {
        self.pm.phases().iter().map(|&p| z[p - 1]).collect()
    }

    fn apply_l(&self, sigma: &[f64], values: &[f64]) -> Vec<f64> {
        let d = self.grid.d;
        values.iter().enumerate().map(|(k, v)| sigma[k / d] * v).collect()
    }

    fn check_point(&self, z: &PencilPoint) -> Result<Vec<f64>> {
        if z.len() != self.pm.n_phases() {
            return Err(Error::DimensionMismatch {
                context: "pencil point length",
                expected: self.pm.n_phases(),
                found: z.len(),
            });
        }
        z.require_positive()
    }

    /// Cell solve for the constant field `E0 = e0`.
    pub fn solve(&self, z: &PencilPoint, e0: &[f64], tol: f64, max_iter: usize) -> Result<CgSolution> {
        let zs = self.check_point(z)?;
        let d = self.grid.d;
        if e0.len() != d {
            return Err(Error::DimensionMismatch {
                context: "E0 components",
                expected: d,
                found: e0.len(),
            });
        }
        let sigma = self.conductivity(&zs);
        let mut ws = self.workspace();
        let dim = self.grid.dim();
        let e0_values: Vec<f64> = (0..dim).map(|k| e0[k % d]).collect();

        let mut b = self.apply_l(&sigma, &e0_values);
        self.project_gradient(&mut b, &mut ws);
        b.iter_mut().for_each(|v| *v = -*v);
        let b_norm = dot(&b, &b).sqrt();
        let mut x = vec![0.0; dim];
        if b_norm == 0.0 {
            return Ok(CgSolution {
                field: PeriodicField::from_values(self.grid, x)?,
                iterations: 0,
                residual: 0.0,
            });
        }
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            iterations += 1;
            let mut ap = self.apply_l(&sigma, &p);
            self.project_gradient(&mut ap, &mut ws);
            let alpha = rr / dot(&p, &ap);
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= tol * b_norm {
                converged = true;
                break;
            }
            let beta = rr_new / rr;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rr = rr_new;
        }
        self.project_gradient(&mut x, &mut ws);
        let mut ax = self.apply_l(&sigma, &x);
        self.project_gradient(&mut ax, &mut ws);
        let true_res: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>().sqrt() / b_norm;
        if !converged && true_res > tol {
            return Err(Error::CgNotConverged {
                iterations,
                residual: true_res,
            });
        }
        Ok(CgSolution {
            field: PeriodicField::from_values(self.grid, x)?,
            iterations,
            residual: true_res,
        })
    }

    /// `σ*(z)`: column `j` is `⟨σ (e_j + E_j)⟩`.
    pub fn sigma_star(&self, z: &PencilPoint, tol: f64, max_iter: usize) -> Result<CgReport> {
        let zs = self.check_point(z)?;
        let d = self.grid.d;
        let sigma = self.conductivity(&zs);
        let mut m = Operator::<f64>::zeros(d, d).into_matrix();
        let mut iterations = Vec::with_capacity(d);
        let mut residuals = Vec::with_capacity(d);
        for j in 0..d {
            let mut e0 = vec![0.0; d];
            e0[j] = 1.0;
            let sol = self.solve(z, &e0, tol, max_iter)?;
            let total = PeriodicField::constant(self.grid, &e0).add(&sol.field);
            let flux = total.scale_by_cell(|cell| sigma[cell]);
            for (a, v) in flux.average().into_iter().enumerate() {
                m[(a, j)] = v;
            }
            iterations.push(sol.iterations);
            residuals.push(sol.residual);
        }
        Ok(CgReport {
            sigma: Operator::from_matrix(m),
            iterations,
            residuals,
        })
    }
}

/// One cell solve with a fresh solver.
pub fn cg_cell_solve(pm: &PhaseMap, z: &PencilPoint, e0: &[f64], tol: f64, max_iter: usize) -> Result<CgSolution> {
    CgSolver::new(pm).solve(z, e0, tol, max_iter)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
