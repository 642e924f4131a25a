#![allow(dead_code)]

use effop::random;
use effop::zproblem::{E, J, U};
use effop::{Complex64, Operator, Scalar, TripleDecomposition, ZProblem};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

pub type C = Complex64;

/// `J0` of the Z-problem from one full-space solve of
/// `B0 j0 - L B1 e + B2 j = L B0 e0` (no block elimination).
pub fn oracle_solve<T: Scalar>(p: &ZProblem<T>, e0: &DVector<T>) -> (DVector<T>, DVector<T>, DVector<T>) {
    let s = p.space();
    let l = p.operator().matrix();
    let [du, de, dj] = s.dims();
    let n = s.dim();
    let mut k = DMatrix::<T>::zeros(n, n);
    k.view_mut((0, 0), (n, du)).copy_from(s.basis(U).matrix());
    k.view_mut((0, du), (n, de)).copy_from(&(-(l * s.basis(E).matrix())));
    k.view_mut((0, du + de), (n, dj)).copy_from(s.basis(J).matrix());
    let rhs = l * (s.basis(U).matrix() * e0);
    let x = k.lu().solve(&rhs).expect("nonsingular full system");
    (
        x.rows(0, du).into_owned(),
        x.rows(du, de).into_owned(),
        x.rows(du + de, dj).into_owned(),
    )
}

/// Effective operator column by column from [`oracle_solve`].
pub fn oracle_effective<T: Scalar>(p: &ZProblem<T>) -> Operator<T> {
    let du = p.space().dims()[U];
    let mut m = DMatrix::<T>::zeros(du, du);
    for j in 0..du {
        let mut e0 = DVector::<T>::zeros(du);
        e0[j] = T::one();
        m.set_column(j, &oracle_solve(p, &e0).0);
    }
    Operator::from_matrix(m)
}

pub fn random_vector<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> DVector<T> {
    DVector::from_iterator(n, (0..n).map(|_| random::scalar::<T, R>(rng)))
}

/// A random triple with `dim E = dim J = k` and a skew unitary `R` with
/// `RU ⊆ U`, `RE = J`, `RJ = E`.
pub fn rotation_instance<R: Rng>(rng: &mut R, du: usize, k: usize) -> (TripleDecomposition<C>, Operator<C>) {
    let space = random::decomposition_with_dims::<C, R>(rng, du, k, k);
    let w = random::unitary::<C, R>(rng, du);
    let signs: Vec<C> = (0..du)
        .map(|_| if rng.gen_bool(0.5) { C::new(0.0, 1.0) } else { C::new(0.0, -1.0) })
        .collect();
    let r_u = &(&w * &Operator::from_diagonal(&signs)) * &w.adjoint();
    let s = random::unitary::<C, R>(rng, k);
    let (b0, b1, b2) = (space.basis(U), space.basis(E), space.basis(J));
    let r = &(&(&(b0 * &r_u) * &b0.adjoint()) + &(&(b2 * &s) * &b1.adjoint())) - &(&(b1 * &s.adjoint()) * &b2.adjoint());
    (space, r)
}

/// Phases spanned by random groups of eigenvectors of a skew unitary `R`,
/// so that `R P_i ⊆ P_i`.
pub fn rotation_invariant_phases<R: Rng>(rng: &mut R, r: &Operator<C>, n: usize) -> Vec<Operator<C>> {
    let dim = r.rows();
    let id = Operator::<C>::identity(dim);
    let ir = r.scale(C::new(0.0, 1.0));
    let mut columns: Vec<DVector<C>> = Vec::new();
    for proj in [(&id - &ir).scale(C::new(0.5, 0.0)), (&id + &ir).scale(C::new(0.5, 0.0))] {
        let b = effop::operator::orthonormal_basis(&proj, 1e-10).unwrap();
        let mixed = &b * &random::unitary::<C, R>(rng, b.cols());
        columns.extend(mixed.matrix().column_iter().map(|c| c.into_owned()));
    }
    columns.shuffle(rng);
    let sizes = random::split(rng, dim, n);
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for s in sizes {
        let cols = &columns[start..start + s];
        out.push(Operator::from_matrix(if cols.is_empty() {
            DMatrix::zeros(dim, 0)
        } else {
            DMatrix::from_columns(cols)
        }));
        start += s;
    }
    out
}
