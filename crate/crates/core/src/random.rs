//! Seeded random instances for property tests and the verification suite.
//!
//! All generators draw from a caller-supplied [`rand::Rng`]; with a
//! [`ChaCha8Rng`] seeded from a `u64` the output is reproducible across
//! platforms.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::multiphase::{NormalizedPencil, PencilPoint, SubspaceCollection};
use crate::operator::{condition_number, Operator};
use crate::scalar::{Scalar, ScalarField};
use crate::zproblem::TripleDecomposition;

/// Diagonal shift making random PSD operators invertible.
pub const PSD_SHIFT: f64 = 1e-3;

/// The generator behind [`rng`].
pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `[-1, 1]`, with an independent imaginary part in complex fields.
pub fn scalar<T: Scalar, R: Rng>(rng: &mut R) -> T {
    let re = rng.gen_range(-1.0..=1.0);
    match T::FIELD {
        ScalarField::Real => T::from_re(re),
        ScalarField::Complex => {
            let im = rng.gen_range(-1.0..=1.0);
            T::from_complex(Complex64::new(re, im)).expect("complex field")
        }
    }
}

pub fn matrix<T: Scalar, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Operator<T> {
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        entries.push(scalar::<T, R>(rng));
    }
    Operator::from_row_slice(rows, cols, &entries).expect("sized")
}

/// Unitary `Q` factor of a random square matrix.
pub fn unitary<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> Operator<T> {
    let m = matrix::<T, R>(rng, n, n).into_matrix();
    Operator::from_matrix(m.qr().q())
}

/// Splits `total` into `parts` non-negative sizes by uniform cut points.
pub fn split<R: Rng>(rng: &mut R, total: usize, parts: usize) -> Vec<usize> {
    let mut cuts: Vec<usize> = (0..parts.saturating_sub(1)).map(|_| rng.gen_range(0..=total)).collect();
    cuts.sort_unstable();
    let mut sizes = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts {
        sizes.push(c - prev);
        prev = c;
    }
    sizes.push(total - prev);
    sizes
}

/// Columns of `q` grouped into consecutive blocks of the given sizes.
fn column_blocks<T: Scalar>(q: &Operator<T>, sizes: &[usize]) -> Vec<Operator<T>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut c = 0;
    for &s in sizes {
        out.push(q.submatrix(0, q.rows(), c, s));
        c += s;
    }
    out
}

/// A random orthogonal triple with `dim U ≥ 1`.
pub fn decomposition<T: Scalar, R: Rng>(rng: &mut R, dim: usize) -> TripleDecomposition<T> {
    assert!(dim >= 1, "dimension must be positive");
    let mut sizes = split(rng, dim - 1, 3);
    sizes[0] += 1;
    decomposition_with_dims(rng, sizes[0], sizes[1], sizes[2])
}

pub fn decomposition_with_dims<T: Scalar, R: Rng>(rng: &mut R, du: usize, de: usize, dj: usize) -> TripleDecomposition<T> {
    let q = unitary::<T, R>(rng, du + de + dj);
    let mut b = column_blocks(&q, &[du, de, dj]).into_iter();
    let (b0, b1, b2) = (b.next().unwrap(), b.next().unwrap(), b.next().unwrap());
    TripleDecomposition::from_bases(b0, b1, b2, 1e-10).expect("unitary columns")
}

/// `G* G + PSD_SHIFT · I`.
pub fn psd<T: Scalar, R: Rng>(rng: &mut R, dim: usize) -> Operator<T> {
    let g = matrix::<T, R>(rng, dim, dim);
    &(&g.adjoint() * &g) + &Operator::identity(dim).scale(T::from_re(PSD_SHIFT))
}

/// A Hermitian operator that is not sign-definite, with `L11 ≻ 0` on the
/// given `E`: satisfies (H1) but generally not (H2).
pub fn h1_operator<T: Scalar, R: Rng>(rng: &mut R, space: &TripleDecomposition<T>) -> Operator<T> {
    let dim = space.dim();
    let g = matrix::<T, R>(rng, dim, dim);
    let herm = (&g + &g.adjoint()).scale(T::from_re(0.5));
    let b1 = space.basis(crate::zproblem::E);
    let shift = herm.norm() + 1.0;
    &herm + &(b1 * &b1.adjoint()).scale(T::from_re(shift))
}

/// A general operator whose `L11` block has condition number below `1e6`.
pub fn h0_operator<T: Scalar, R: Rng>(rng: &mut R, space: &TripleDecomposition<T>) -> Operator<T> {
    let b1 = space.basis(crate::zproblem::E);
    loop {
        let l = matrix::<T, R>(rng, space.dim(), space.dim());
        let l11 = &(&b1.adjoint() * &l) * b1;
        if condition_number(l11.matrix()) < 1e6 {
            return l;
        }
    }
}

/// A random collection: random triple, random phase splitting into `n`
/// possibly empty phases.
pub fn collection<T: Scalar, R: Rng>(rng: &mut R, dim: usize, n: usize) -> SubspaceCollection<T> {
    let space = Arc::new(decomposition::<T, R>(rng, dim));
    let q = unitary::<T, R>(rng, dim);
    let sizes = split(rng, dim, n);
    SubspaceCollection::from_phase_bases(space, column_blocks(&q, &sizes), 1e-10).expect("unitary columns")
}

/// A normalized pencil `A_i = S^{-1/2} G_i G_i* S^{-1/2}`, `S = Σ G_i G_i*`,
/// with random ranks.
pub fn normalized_pencil<T: Scalar, R: Rng>(rng: &mut R, n: usize, dim_h0: usize, dim_h1: usize) -> NormalizedPencil<T> {
    let dim = dim_h0 + dim_h1;
    loop {
        let factors: Vec<Operator<T>> = (0..n)
            .map(|_| {
                let rank = rng.gen_range(1..=dim);
                matrix::<T, R>(rng, dim, rank)
            })
            .collect();
        let mut s = DMatrix::<T>::zeros(dim, dim);
        for g in &factors {
            s += g.matrix() * g.matrix().adjoint();
        }
        if condition_number(&s) > 1e8 {
            continue;
        }
        let eig = s.symmetric_eigen();
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| {
            T::from_real(x).sqrt().recip()
        }));
        let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
        let coeffs: Vec<Operator<T>> = factors
            .iter()
            .map(|g| {
                let a = &w * g.matrix() * g.matrix().adjoint() * &w;
                Operator::from_matrix((&a + a.adjoint()) * T::from_re(0.5))
            })
            .collect();
        if let Ok(p) = NormalizedPencil::new(coeffs, dim_h0, dim_h1, 1e-9) {
            return p;
        }
    }
}

/// `z ∈ D`: all entries in a random rotated open half-plane, kept away from
/// its boundary and from the origin.
pub fn point_in_d<R: Rng>(rng: &mut R, n: usize) -> PencilPoint {
    let theta = rng.gen_range(0.0..2.0 * PI);
    let z = (0..n)
        .map(|_| {
            let r = rng.gen_range(0.2..5.0);
            let phi = rng.gen_range(0.05 * PI..0.95 * PI);
            Complex64::from_polar(r, theta + phi)
        })
        .collect();
    PencilPoint::new(z)
}

/// Real positive `z` with entries in `[lo, hi)`.
pub fn positive_point<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> PencilPoint {
    let z: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    PencilPoint::from_real(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::projection_residual;

    #[test]
    fn split_sums_to_total() {
        let mut r = rng(1);
        for _ in 0..50 {
            let s = split(&mut r, 17, 4);
            assert_eq!(s.len(), 4);
            assert_eq!(s.iter().sum::<usize>(), 17);
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let a: Operator<f64> = psd(&mut rng(7), 5);
        let b: Operator<f64> = psd(&mut rng(7), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn generated_instances_satisfy_their_hypotheses() {
        let mut r = rng(3);
        let space = decomposition::<Complex64, _>(&mut r, 9);
        for i in 0..3 {
            assert!(projection_residual(&space.gamma(i)) < 1e-12);
        }
        let l = psd::<Complex64, _>(&mut r, 9);
        assert!(l.is_psd(0.0).unwrap());
        let h1 = h1_operator(&mut r, &space);
        let b1 = space.basis(crate::zproblem::E);
        assert!(h1.is_self_adjoint(1e-12));
        assert!((&(&b1.adjoint() * &h1) * b1).min_eigenvalue().unwrap() > 0.0);
        let p = normalized_pencil::<f64, _>(&mut r, 3, 2, 3);
        assert_eq!(p.n(), 3);
        for _ in 0..20 {
            assert!(point_in_d(&mut r, 4).in_domain_d());
        }
    }
}
