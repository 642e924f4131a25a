use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::geometry::PhaseMap;
use super::grid::{GridSpec, PeriodicField};
use crate::error::{Error, Result};
use crate::multiphase::SubspaceCollection;
use crate::operator::Operator;
use crate::scalar::Scalar;
use crate::zproblem::TripleDecomposition;

/// Largest `d · N^d` the dense backend accepts.
pub const DENSE_CAP: usize = 4096;

/// Discrete Hodge splitting of periodic vector fields into constants,
/// gradients and divergence-free fields, with explicit real bases.
#[derive(Debug, Clone)]
pub struct HodgeDecomposition<T: Scalar> {
    grid: GridSpec,
    space: Arc<TripleDecomposition<T>>,
}

impl<T: Scalar> HodgeDecomposition<T> {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn space(&self) -> &Arc<TripleDecomposition<T>> {
        &self.space
    }

    /// `Γ_i F` for `i` in `{U, E, J}`.
    pub fn project(&self, i: usize, field: &PeriodicField<T>) -> Result<PeriodicField<T>> {
        let b = self.space.basis(i);
        let coords = b.matrix() * (b.matrix().adjoint() * field.to_coords());
        PeriodicField::from_coords(self.grid, &coords)
    }
}

pub fn check_dense_cap(grid: GridSpec) -> Result<()> {
    if grid.dim() > DENSE_CAP {
        return Err(Error::DenseCapExceeded {
            dim: grid.dim(),
            cap: DENSE_CAP,
        });
    }
    Ok(())
}

/// Unit vectors completing `p` to an orthonormal frame.
pub(crate) fn complement_directions(p: &[f64]) -> Vec<Vec<f64>> {
    match p.len() {
        2 => vec![vec![p[1], -p[0]]],
        3 => {
            let j = (0..3)
                .min_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs()))
                .unwrap();
            let mut q1 = vec![0.0; 3];
            q1[j] = 1.0;
            for a in 0..3 {
                q1[a] -= p[j] * p[a];
            }
            let norm = q1.iter().map(|x| x * x).sum::<f64>().sqrt();
            q1.iter_mut().for_each(|x| *x /= norm);
            let q2 = vec![
                p[1] * q1[2] - p[2] * q1[1],
                p[2] * q1[0] - p[0] * q1[2],
                p[0] * q1[1] - p[1] * q1[0],
            ];
            vec![q1, q2]
        }
        d => panic!("unsupported dimension {d}"),
    }
}

/// Builds the splitting. Per nonzero frequency `k` the gradient part is
/// spanned by `p(k)` (see [`GridSpec::gradient_direction`]) and the
/// divergence-free part by its orthogonal complement. The bases use real
/// `cos`/`sin` modes.
pub fn hodge_projections<T: Scalar>(grid: GridSpec) -> Result<HodgeDecomposition<T>> {
    check_dense_cap(grid)?;
    let (d, cells, dim) = (grid.d, grid.cells(), grid.dim());
    let inv_root = 1.0 / (cells as f64).sqrt();

    let mut b0 = DMatrix::<T>::zeros(dim, d);
    for cell in 0..cells {
        for a in 0..d {
            b0[(cell * d + a, a)] = T::from_re(inv_root);
        }
    }

    let mut b1 = DMatrix::<T>::zeros(dim, cells - 1);
    let mut b2 = DMatrix::<T>::zeros(dim, (d - 1) * (cells - 1));
    let (mut c1, mut c2) = (0, 0);
    let indices: Vec<Vec<usize>> = (0..cells).map(|c| grid.multi_index(c)).collect();
    for bin in 1..cells {
        let idx = &indices[bin];
        let neg: Vec<usize> = idx.iter().map(|&i| (grid.n - i) % grid.n).collect();
        let neg_bin = grid.cell_of(&neg);
        if neg_bin < bin {
            continue;
        }
        let p = grid.gradient_direction(&grid.wavevector(bin));
        let q = complement_directions(&p);
        // (use sin, amplitude); sin vanishes on the grid for self-conjugate bins.
        let modes: &[(bool, f64)] = if neg_bin == bin {
            &[(false, 1.0)]
        } else {
            &[(false, std::f64::consts::SQRT_2), (true, std::f64::consts::SQRT_2)]
        };
        for &(use_sin, amp) in modes {
            for (cell, x) in indices.iter().enumerate() {
                let t = 2.0 * PI * idx.iter().zip(x).map(|(&k, &i)| (k * i) % grid.n).sum::<usize>() as f64
                    / grid.n as f64;
                let s = amp * inv_root * if use_sin { t.sin() } else { t.cos() };
                for a in 0..d {
                    b1[(cell * d + a, c1)] = T::from_re(s * p[a]);
                    for (m, qm) in q.iter().enumerate() {
                        b2[(cell * d + a, c2 + m)] = T::from_re(s * qm[a]);
                    }
                }
            }
            c1 += 1;
            c2 += d - 1;
        }
    }
    debug_assert_eq!(c1, cells - 1);
    let space = TripleDecomposition::from_bases_unchecked(
        Operator::from_matrix(b0),
        Operator::from_matrix(b1),
        Operator::from_matrix(b2),
    );
    Ok(HodgeDecomposition {
        grid,
        space: Arc::new(space),
    })
}

/// `Λ_i` = multiplication by the indicator of phase `i`.
pub fn phase_collection<T: Scalar>(pm: &PhaseMap, hodge: &HodgeDecomposition<T>) -> Result<SubspaceCollection<T>> {
    if pm.grid() != hodge.grid() {
        return Err(Error::InvalidArgument(format!(
            "phase map grid {:?} differs from decomposition grid {:?}",
            pm.grid(),
            hodge.grid()
        )));
    }
    let d = pm.grid().d;
    let labels = (0..pm.grid().dim()).map(|k| pm.phase(k / d) - 1).collect();
    SubspaceCollection::from_labels(hodge.space().clone(), labels, pm.n_phases())
}

/// Pointwise `R = [[0, 1], [-1, 0]]` on a 2D grid.
pub fn rotation_operator<T: Scalar>(grid: GridSpec) -> Result<Operator<T>> {
    if grid.d != 2 {
        return Err(Error::InvalidArgument(format!("rotation needs d = 2, got {}", grid.d)));
    }
    let dim = grid.dim();
    let mut m = DMatrix::<T>::zeros(dim, dim);
    for cell in 0..grid.cells() {
        m[(2 * cell, 2 * cell + 1)] = T::one();
        m[(2 * cell + 1, 2 * cell)] = -T::one();
    }
    Ok(Operator::from_matrix(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zproblem::{check_rotation, E, J, U};
    use num_complex::Complex64;

    fn sin_field(g: GridSpec, along: usize) -> PeriodicField<f64> {
        PeriodicField::from_fn(g, |x| {
            let mut v = vec![0.0; g.d];
            v[along] = x[0].sin();
            v
        })
    }

    #[test]
    fn bases_are_jointly_orthonormal() {
        for (d, n) in [(2, 4), (2, 5), (2, 6), (3, 4), (3, 3)] {
            let g = GridSpec::new(d, n).unwrap();
            let h = hodge_projections::<f64>(g).unwrap();
            let s = h.space();
            assert_eq!(s.dims(), [d, g.cells() - 1, (d - 1) * (g.cells() - 1)]);
            TripleDecomposition::from_bases(s.basis(U).clone(), s.basis(E).clone(), s.basis(J).clone(), 1e-12)
                .unwrap();
        }
    }

    #[test]
    fn single_mode_fields() {
        let g = GridSpec::new(2, 8).unwrap();
        let h = hodge_projections::<f64>(g).unwrap();
        let c = PeriodicField::constant(g, &[0.3, -1.2]);
        assert!(h.project(U, &c).unwrap().rel_diff(&c) < 1e-14);
        assert!(h.project(E, &c).unwrap().norm() < 1e-14);
        assert!(h.project(J, &c).unwrap().norm() < 1e-14);

        let grad = sin_field(g, 0);
        assert!(h.project(E, &grad).unwrap().rel_diff(&grad) < 1e-13);
        assert!(h.project(J, &grad).unwrap().norm() < 1e-13);
        let free = sin_field(g, 1);
        assert!(h.project(J, &free).unwrap().rel_diff(&free) < 1e-13);
        assert!(h.project(E, &free).unwrap().norm() < 1e-13);
    }

    #[test]
    fn rotation_exchanges_e_and_j() {
        let g = GridSpec::new(2, 6).unwrap();
        let h = hodge_projections::<f64>(g).unwrap();
        let r = rotation_operator::<f64>(g).unwrap();
        check_rotation(h.space(), &r, 1e-13).unwrap();
        assert!((&r * &r).rel_diff(&Operator::identity(g.dim()).scale(-1.0)) < 1e-15);
        let c = PeriodicField::constant(g, &[1.0, 0.0]);
        let rc = PeriodicField::from_coords(g, &(r.matrix() * c.to_coords())).unwrap();
        assert!(rc.rel_diff(&PeriodicField::constant(g, &[0.0, -1.0])) < 1e-15);
        let grad = sin_field(g, 0);
        let rg = PeriodicField::from_coords(g, &(r.matrix() * grad.to_coords())).unwrap();
        let expected = PeriodicField::from_fn(g, |x| vec![0.0, -x[0].sin()]);
        assert!(rg.rel_diff(&expected) < 1e-14);
        assert!(h.project(J, &rg).unwrap().rel_diff(&rg) < 1e-13);
        assert!(rotation_operator::<f64>(GridSpec::new(3, 2).unwrap()).is_err());
    }

    #[test]
    fn phase_collection_is_diagonal() {
        let g = GridSpec::new(2, 4).unwrap();
        let pm = super::super::make_geometry(&super::super::Geometry::Laminate { axis: 1, fraction: 0.5 }, g).unwrap();
        let h = hodge_projections::<Complex64>(g).unwrap();
        let col = phase_collection(&pm, &h).unwrap();
        let l1 = col.lambda(0);
        let l2 = col.lambda(1);
        assert_eq!((&l1 * &l2).norm(), 0.0);
        assert_eq!(&l1 + &l2, Operator::identity(g.dim()));
        assert_eq!(col.phase_dim(0), 16);
        let single = PhaseMap::new(g, 1, vec![1; 16]).unwrap();
        assert_eq!(phase_collection(&single, &h).unwrap().lambda(0), Operator::identity(g.dim()));
        let other = hodge_projections::<Complex64>(GridSpec::new(2, 2).unwrap()).unwrap();
        assert!(phase_collection(&pm, &other).is_err());
    }

    #[test]
    fn dense_cap() {
        assert!(matches!(
            hodge_projections::<f64>(GridSpec::new(2, 46).unwrap()),
            Err(Error::DenseCapExceeded { .. })
        ));
        assert!(check_dense_cap(GridSpec::new(3, 8).unwrap()).is_ok());
    }
}
