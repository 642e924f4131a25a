//! Dense operators between finite-dimensional inner-product spaces.
//!
//! [`Operator`] wraps a column-major [`DMatrix`] and adds the handful of
//! operator-theoretic primitives the rest of the crate is written in:
//! adjoints, self-adjoint parts, Schur complements, the Loewner order,
//! a coercivity search and orthonormal bases of projection ranges.
//!
//! Norms are Frobenius unless stated otherwise. Self-adjointness and
//! projection tests are relative: `‖X - Y‖ <= tol * max(1, ‖X‖)`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{real, to_f64, Scalar, ScalarField};

/// Relative tolerance used when nothing more specific is given.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Blocks whose smallest singular value is below `rtol * largest` are
/// treated as singular.
pub const DEFAULT_INVERT_RTOL: f64 = 1e-10;

/// Angle samples used by [`check_lm`] when the caller has no preference.
pub const DEFAULT_LM_SAMPLES: usize = 360;

#[derive(Debug, Clone, PartialEq)]
pub struct Operator<T: Scalar> {
    m: DMatrix<T>,
}

/// Ordered sizes of an orthogonal splitting of a coordinate space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Self {
        Self { sizes }
    }

    /// A partition into two blocks, `first + second`.
    pub fn split(first: usize, second: usize) -> Self {
        Self::new(vec![first, second])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Offset of block `i` in the partitioned space.
    pub fn offset(&self, i: usize) -> usize {
        self.sizes[..i].iter().sum()
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "block partition",
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl<T: Scalar> From<DMatrix<T>> for Operator<T> {
    fn from(m: DMatrix<T>) -> Self {
        Self { m }
    }
}

impl<T: Scalar> Operator<T> {
    pub fn from_matrix(m: DMatrix<T>) -> Self {
        Self { m }
    }

    /// Builds an operator from a row-major list of entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[T]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "operator entries",
                expected: rows * cols,
                found: entries.len(),
            });
        }
        Ok(Self::from_matrix(DMatrix::from_row_slice(rows, cols, entries)))
    }

    /// Row-major construction from `f64` entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_matrix(DMatrix::from_fn(r, c, |i, j| T::from_re(rows[i][j])))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> T) -> Self {
        Self::from_matrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_matrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// A single column.
    pub fn column(entries: &[T]) -> Self {
        Self::from_matrix(DMatrix::from_column_slice(entries.len(), 1, entries))
    }

    pub fn rows(&self) -> usize {
        self.m.nrows()
    }

    pub fn cols(&self) -> usize {
        self.m.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn field(&self) -> ScalarField {
        T::FIELD
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[(i, j)]
    }

    pub fn entries_row_major(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_matrix(self.m.adjoint())
    }

    /// Self-adjoint part `(A + A*) / 2`.
    pub fn re_part(&self) -> Result<Self> {
        self.require_square()?;
        let half = T::from_re(0.5);
        Ok(Self::from_matrix((&self.m + self.m.adjoint()) * half))
    }

    /// Skew-adjoint part `(A - A*) / 2`.
    pub fn skew_part(&self) -> Result<Self> {
        self.require_square()?;
        let half = T::from_re(0.5);
        Ok(Self::from_matrix((&self.m - self.m.adjoint()) * half))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_matrix(&self.m * s)
    }

    pub fn norm(&self) -> f64 {
        to_f64::<T>(self.m.norm())
    }

    /// `‖self - reference‖ / ‖reference‖`, falling back to the absolute
    /// difference when the reference vanishes.
    pub fn rel_diff(&self, reference: &Self) -> f64 {
        let diff = (&self.m - &reference.m).norm();
        let scale = reference.m.norm();
        let diff = to_f64::<T>(diff);
        let scale = to_f64::<T>(scale);
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    /// The rows `r0..r0+nr` and columns `c0..c0+nc`.
    pub fn submatrix(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> Self {
        Self::from_matrix(self.m.view((r0, c0), (nr, nc)).into_owned())
    }

    /// Block `(i, j)` of a square operator under `part`.
    pub fn block(&self, part: &BlockPartition, i: usize, j: usize) -> Self {
        self.submatrix(part.offset(i), part.sizes()[i], part.offset(j), part.sizes()[j])
    }

    /// Entries mapped into the complexification of the real type.
    pub fn lift(&self) -> Operator<T::Complexified> {
        Operator::from_matrix(self.m.map(|x| x.lift()))
    }

    /// Entries as `Complex64`.
    pub fn to_complex64(&self) -> Operator<Complex64> {
        Operator::from_matrix(self.m.map(|x| x.to_complex()))
    }

    /// Re-expresses an operator over another field, failing when an entry
    /// cannot be represented there.
    pub fn cast<U: Scalar>(&self) -> Result<Operator<U>> {
        let mut out = DMatrix::<U>::zeros(self.rows(), self.cols());
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                let z = self.m[(i, j)].to_complex();
                out[(i, j)] = U::from_complex(z).ok_or(Error::FieldMismatch {
                    value: z,
                    field: U::FIELD,
                })?;
            }
        }
        Ok(Operator::from_matrix(out))
    }

    /// Relative self-adjointness defect `‖A - A*‖ / max(1, ‖A‖)`.
    pub fn self_adjoint_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let d = to_f64::<T>((&self.m - self.m.adjoint()).norm());
        d / self.norm().max(1.0)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjoint_residual() <= tol
    }

    /// Eigenvalues of the self-adjoint part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let h = self.re_part()?;
        if h.m.is_empty() {
            return Ok(Vec::new());
        }
        let mut ev: Vec<f64> = h
            .m
            .symmetric_eigenvalues()
            .iter()
            .map(|x| to_f64::<T>(*x))
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }

    /// Smallest eigenvalue of the self-adjoint part (`+inf` for an empty
    /// operator).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self
            .hermitian_eigenvalues()?
            .first()
            .copied()
            .unwrap_or(f64::INFINITY))
    }

    /// Self-adjoint to `tol` with smallest eigenvalue `>= -tol * max(1, ‖A‖)`.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        if !self.is_self_adjoint(tol) {
            return Ok(false);
        }
        Ok(self.min_eigenvalue()? >= -tol * self.norm().max(1.0))
    }

    /// Inverse, refusing blocks whose condition estimate exceeds `1/rtol`.
    pub fn inverse(&self, rtol: f64, what: &'static str) -> Result<Self> {
        self.require_square()?;
        let n = self.rows();
        Ok(Self::from_matrix(solve_checked(
            &self.m,
            &DMatrix::identity(n, n),
            rtol,
            what,
        )?))
    }

    fn require_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            });
        }
        Ok(())
    }
}

/// Condition estimate `σ_max / σ_min` (1 for an empty matrix, `inf` for a
/// singular one).
pub fn condition_number<T: Scalar>(m: &DMatrix<T>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().map(|s| to_f64::<T>(*s)).fold(0.0, f64::max);
    let min = sv.iter().map(|s| to_f64::<T>(*s)).fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Solves `m x = rhs` after checking `m` against `rtol`.
pub fn solve_checked<T: Scalar>(
    m: &DMatrix<T>,
    rhs: &DMatrix<T>,
    rtol: f64,
    what: &'static str,
) -> Result<DMatrix<T>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() != rhs.nrows() {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: m.nrows(),
            found: rhs.nrows(),
        });
    }
    if m.is_empty() {
        return Ok(DMatrix::zeros(0, rhs.ncols()));
    }
    let condition = condition_number(m);
    if !(condition.is_finite() && condition * rtol < 1.0) {
        return Err(Error::NotInvertible { what, condition });
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::NotInvertible { what, condition })
}

/// Schur complement `A00 - A01 A11^{-1} A10` of a square operator with
/// respect to its second diagonal block.
pub fn schur_complement<T: Scalar>(a: &Operator<T>, part: &BlockPartition) -> Result<Operator<T>> {
    schur_complement_rtol(a, part, DEFAULT_INVERT_RTOL)
}

pub fn schur_complement_rtol<T: Scalar>(
    a: &Operator<T>,
    part: &BlockPartition,
    rtol: f64,
) -> Result<Operator<T>> {
    a.require_square()?;
    if part.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "Schur complement needs a 2-block partition, got {} blocks",
            part.len()
        )));
    }
    part.check_dim(a.rows())?;
    let a00 = a.block(part, 0, 0);
    let a01 = a.block(part, 0, 1);
    let a10 = a.block(part, 1, 0);
    let a11 = a.block(part, 1, 1);
    let x = solve_checked(&a11.m, &a10.m, rtol, "(1,1) block")?;
    Ok(Operator::from_matrix(a00.m - a01.m * x))
}

/// `A ⪯ B` in the Loewner order: the smallest eigenvalue of `B - A` is at
/// least `-tol * (1 + ‖B - A‖₂)`.
///
/// Inputs must be self-adjoint to [`DEFAULT_TOL`]; they are symmetrized
/// before the eigenvalue computation.
pub fn loewner_leq<T: Scalar>(a: &Operator<T>, b: &Operator<T>, tol: f64) -> Result<bool> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            context: "loewner_leq",
            expected: a.rows(),
            found: b.rows(),
        });
    }
    for (op, what) in [(a, "left operand"), (b, "right operand")] {
        let residual = op.self_adjoint_residual();
        if residual > DEFAULT_TOL {
            return Err(Error::NotSelfAdjoint { what, residual });
        }
    }
    let diff = Operator::from_matrix(&b.m - &a.m);
    let ev = diff.hermitian_eigenvalues()?;
    let (Some(min), Some(max)) = (ev.first(), ev.last()) else {
        return Ok(true);
    };
    let spectral = min.abs().max(max.abs());
    Ok(*min >= -tol * (1.0 + spectral))
}

/// Searches a uniform grid of `samples` angles in `[0, 2π)` for the first
/// `θ` with `Re(e^{iθ} L) ⪰ delta I`.
///
/// Only the phase of the coercivity multiplier matters, so `|λ| = 1`. A
/// grid hit certifies coercivity; a miss does not disprove it when the
/// admissible arc is narrower than the grid spacing.
pub fn check_lm<T: Scalar>(l: &Operator<T>, delta: f64, samples: usize) -> Result<Option<f64>> {
    l.require_square()?;
    if samples < 4 {
        return Err(Error::InvalidArgument(format!(
            "check_lm needs at least 4 angle samples, got {samples}"
        )));
    }
    let lc = l.lift();
    for k in 0..samples {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let phase = T::Complexified::from_complex(Complex64::new(theta.cos(), theta.sin()))
            .expect("complex field");
        let rotated = Operator::from_matrix(&lc.m * phase);
        if rotated.min_eigenvalue()? >= delta {
            return Ok(Some(theta));
        }
    }
    Ok(None)
}

/// Column isometry `B` with `B* B = I` and `B B* = P` for an orthogonal
/// projection `P`.
///
/// Columns come from the spectral decomposition of `P` (eigenvalues above
/// ½), ordered by descending eigenvalue and then by the row of each
/// column's largest-magnitude entry; that entry is made real positive.
pub fn orthonormal_basis<T: Scalar>(p: &Operator<T>, tol: f64) -> Result<Operator<T>> {
    let residual = projection_residual(p);
    if residual > tol {
        return Err(Error::NotProjection {
            what: "operator".into(),
            residual,
        });
    }
    let h = p.re_part()?;
    let n = h.rows();
    if n == 0 {
        return Ok(Operator::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(h.m);
    let half = real::<T>(0.5);
    let mut cols: Vec<(f64, usize, DVector<T>)> = Vec::new();
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda <= half {
            continue;
        }
        let mut v = eig.eigenvectors.column(k).into_owned();
        let mut pivot = 0;
        let mut best = T::RealField::zero();
        for (i, x) in v.iter().enumerate() {
            let m = x.modulus();
            if m > best {
                best = m;
                pivot = i;
            }
        }
        let ph = v[pivot] / T::from_real(best);
        v *= ph.conjugate();
        v[pivot] = T::from_real(best);
        cols.push((to_f64::<T>(lambda), pivot, v));
    }
    cols.sort_by(|a, b| {
        if (a.0 - b.0).abs() > tol {
            b.0.total_cmp(&a.0)
        } else {
            a.1.cmp(&b.1)
        }
    });
    let mut out = DMatrix::<T>::zeros(n, cols.len());
    for (j, (_, _, v)) in cols.iter().enumerate() {
        out.set_column(j, v);
    }
    Ok(Operator::from_matrix(out))
}

/// Worst of the relative idempotence and self-adjointness defects.
pub fn projection_residual<T: Scalar>(p: &Operator<T>) -> f64 {
    if !p.is_square() {
        return f64::INFINITY;
    }
    let scale = p.norm().max(1.0);
    let idem = to_f64::<T>((&p.m * &p.m - &p.m).norm()) / scale;
    idem.max(p.self_adjoint_residual())
}

macro_rules! impl_binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl<'a, 'b, T: Scalar> $tr<&'b Operator<T>> for &'a Operator<T> {
            type Output = Operator<T>;
            fn $f(self, rhs: &'b Operator<T>) -> Operator<T> {
                Operator::from_matrix(&self.m $op &rhs.m)
            }
        }

        impl<T: Scalar> $tr<Operator<T>> for Operator<T> {
            type Output = Operator<T>;
            fn $f(self, rhs: Operator<T>) -> Operator<T> {
                Operator::from_matrix(self.m $op rhs.m)
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);
impl_binop!(Mul, mul, *);

impl<T: Scalar> Neg for &Operator<T> {
    type Output = Operator<T>;
    fn neg(self) -> Operator<T> {
        Operator::from_matrix(-&self.m)
    }
}

impl<T: Scalar> Neg for Operator<T> {
    type Output = Operator<T>;
    fn neg(self) -> Operator<T> {
        Operator::from_matrix(-self.m)
    }
}
