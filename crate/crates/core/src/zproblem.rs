//! Abstract Z-problems `(H, U, E, J, L)`.
//!
//! Given `E0 ∈ U`, find `(J0, E, J) ∈ U × E × J` with `J0 + J = L(E0 + E)`.
//! Everything here works in subspace coordinates: each of `U`, `E`, `J` is
//! carried by a column isometry of the ambient space, and the blocks
//! `L_ij = B_i* L B_j` are the compressions of `L`. The effective operator
//! is the Schur complement of the compression of `L` to `U ⊕ E`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{
    check_lm, loewner_leq, orthonormal_basis, projection_residual, schur_complement,
    BlockPartition, Operator, DEFAULT_INVERT_RTOL, DEFAULT_LM_SAMPLES, DEFAULT_TOL,
};
use crate::scalar::{to_f64, Scalar};

/// Index of `U` in the triple.
pub const U: usize = 0;
/// Index of `E` in the triple.
pub const E: usize = 1;
/// Index of `J` in the triple.
pub const J: usize = 2;

/// Coercivity margin used when a routine has to certify (LM) on its own,
/// relative to `‖L‖`.
pub const LM_DELTA_REL: f64 = 1e-10;

/// Orthogonal splitting `H = U ⊕ E ⊕ J`, stored as one column isometry
/// per subspace. The projections `Γ_i = B_i B_i*` are formed on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleDecomposition<T: Scalar> {
    dim: usize,
    bases: [Operator<T>; 3],
}

impl<T: Scalar> TripleDecomposition<T> {
    /// Validates `B_i* B_j = δ_ij I` and `Σ dim = dim H` to `tol`.
    pub fn from_bases(b0: Operator<T>, b1: Operator<T>, b2: Operator<T>, tol: f64) -> Result<Self> {
        let dim = b0.rows();
        for b in [&b1, &b2] {
            if b.rows() != dim {
                return Err(Error::DimensionMismatch {
                    context: "triple decomposition basis rows",
                    expected: dim,
                    found: b.rows(),
                });
            }
        }
        let total = b0.cols() + b1.cols() + b2.cols();
        if total != dim {
            return Err(Error::DimensionMismatch {
                context: "triple decomposition subspace dimensions",
                expected: dim,
                found: total,
            });
        }
        let all = hstack(&[b0.matrix(), b1.matrix(), b2.matrix()]);
        let gram = all.adjoint() * &all;
        let defect = to_f64::<T>((gram - DMatrix::identity(dim, dim)).norm());
        let residual = defect / (dim.max(1) as f64).sqrt();
        if residual > tol {
            return Err(Error::NotProjection {
                what: "triple decomposition (bases not jointly orthonormal)".into(),
                residual,
            });
        }
        Ok(Self {
            dim,
            bases: [b0, b1, b2],
        })
    }

    /// Trusts the caller that the bases are jointly orthonormal.
    pub(crate) fn from_bases_unchecked(b0: Operator<T>, b1: Operator<T>, b2: Operator<T>) -> Self {
        Self {
            dim: b0.rows(),
            bases: [b0, b1, b2],
        }
    }

    /// Validates that the `Γ_i` are orthogonal projections with
    /// `Γ_i Γ_j ≈ 0` and `Γ_0 + Γ_1 + Γ_2 ≈ I`, then extracts bases.
    pub fn from_projections(g0: &Operator<T>, g1: &Operator<T>, g2: &Operator<T>, tol: f64) -> Result<Self> {
        let dim = g0.rows();
        let gammas = [g0, g1, g2];
        for (i, g) in gammas.iter().enumerate() {
            if g.rows() != dim || g.cols() != dim {
                return Err(Error::DimensionMismatch {
                    context: "triple decomposition projection",
                    expected: dim,
                    found: g.rows(),
                });
            }
            let residual = projection_residual(g);
            if residual > tol {
                return Err(Error::NotProjection {
                    what: format!("Γ{i}"),
                    residual,
                });
            }
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let residual = (gammas[i] * gammas[j]).norm() / (dim.max(1) as f64).sqrt();
                if residual > tol {
                    return Err(Error::NotProjection {
                        what: format!("Γ{i}Γ{j} = 0"),
                        residual,
                    });
                }
            }
        }
        let sum = &(g0 + g1) + g2;
        let residual = sum.rel_diff(&Operator::identity(dim));
        if residual > tol {
            return Err(Error::NotProjection {
                what: "Γ0 + Γ1 + Γ2 = I".into(),
                residual,
            });
        }
        Self::from_bases(
            orthonormal_basis(g0, tol)?,
            orthonormal_basis(g1, tol)?,
            orthonormal_basis(g2, tol)?,
            tol.max(1e-12),
        )
    }

    /// `U`, `E`, `J` spanned by consecutive coordinate axes.
    pub fn coordinate(dim_u: usize, dim_e: usize, dim_j: usize) -> Self {
        let dim = dim_u + dim_e + dim_j;
        let id = Operator::<T>::identity(dim);
        Self {
            dim,
            bases: [
                id.submatrix(0, dim, 0, dim_u),
                id.submatrix(0, dim, dim_u, dim_e),
                id.submatrix(0, dim, dim_u + dim_e, dim_j),
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimensions of `U`, `E`, `J`.
    pub fn dims(&self) -> [usize; 3] {
        [self.bases[0].cols(), self.bases[1].cols(), self.bases[2].cols()]
    }

    pub fn basis(&self, i: usize) -> &Operator<T> {
        &self.bases[i]
    }

    /// Orthogonal projection `Γ_i` onto subspace `i`.
    pub fn gamma(&self, i: usize) -> Operator<T> {
        let b = &self.bases[i];
        b * &b.adjoint()
    }

    /// The same `U` with the roles of `E` and `J` exchanged.
    pub fn swap_ej(&self) -> Self {
        Self {
            dim: self.dim,
            bases: [self.bases[0].clone(), self.bases[2].clone(), self.bases[1].clone()],
        }
    }

    /// Column isometry onto `U ⊕ E`.
    pub fn basis_ue(&self) -> Operator<T> {
        Operator::from_matrix(hstack(&[self.bases[0].matrix(), self.bases[1].matrix()]))
    }

    /// Coordinates of subspace `i` to an ambient vector.
    pub fn embed(&self, i: usize, coords: &DVector<T>) -> DVector<T> {
        self.bases[i].matrix() * coords
    }

    /// Ambient vector to coordinates in subspace `i` (orthogonal projection).
    pub fn coords(&self, i: usize, v: &DVector<T>) -> DVector<T> {
        self.bases[i].matrix().adjoint() * v
    }

    /// Largest `‖Γ_i - Γ'_i‖ / √dim` over the three subspaces.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.dim != other.dim || self.dims() != other.dims() {
            return f64::INFINITY;
        }
        (0..3)
            .map(|i| (&self.gamma(i) - &other.gamma(i)).norm() / (self.dim.max(1) as f64).sqrt())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn hstack<T: Scalar>(parts: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = parts.first().map_or(0, |p| p.nrows());
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.view_mut((0, c), (rows, p.ncols())).copy_from(p);
        c += p.ncols();
    }
    out
}

/// Blocks `L_ij = B_i* L B_j`, indexed `[i][j]` with `i, j ∈ {U, E, J}`.
pub type BlockGrid<T> = [[Operator<T>; 3]; 3];

/// A solution `(J0, E, J)` in subspace coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ZSolution<T: Scalar> {
    pub j0: DVector<T>,
    pub e: DVector<T>,
    pub j: DVector<T>,
}

impl<T: Scalar> ZSolution<T> {
    /// Ambient vectors `(J0, E, J)`.
    pub fn to_full(&self, space: &TripleDecomposition<T>) -> [DVector<T>; 3] {
        [space.embed(U, &self.j0), space.embed(E, &self.e), space.embed(J, &self.j)]
    }
}

/// Which of the solvability hypotheses hold. `h2 ⇒ h1 ⇒ h0` always.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisReport {
    /// `L11` invertible.
    pub h0: bool,
    /// `L = L*`, `L11 ⪰ 0`, `L11` invertible.
    pub h1: bool,
    /// `L = L* ⪰ 0`, `L` invertible.
    pub h2: bool,
    /// First angle `θ` on the search grid with `Re(e^{iθ} L) ⪰ δ I`.
    pub lm: Option<f64>,
}

/// Outcome of [`ZProblem::monotonicity_concavity_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotonicityReport {
    /// `None` when `L` and `M` are not Loewner-comparable.
    pub mono: Option<bool>,
    pub concave: bool,
}

#[derive(Debug, Clone)]
pub struct ZProblem<T: Scalar> {
    space: Arc<TripleDecomposition<T>>,
    l: Operator<T>,
}

impl<T: Scalar> ZProblem<T> {
    pub fn new(space: Arc<TripleDecomposition<T>>, l: Operator<T>) -> Result<Self> {
        if l.rows() != space.dim() || l.cols() != space.dim() {
            return Err(Error::DimensionMismatch {
                context: "Z-problem operator",
                expected: space.dim(),
                found: if l.rows() != space.dim() { l.rows() } else { l.cols() },
            });
        }
        Ok(Self { space, l })
    }

    pub fn space(&self) -> &Arc<TripleDecomposition<T>> {
        &self.space
    }

    pub fn operator(&self) -> &Operator<T> {
        &self.l
    }

    pub fn block(&self, i: usize, j: usize) -> Operator<T> {
        &(&self.space.basis(i).adjoint() * &self.l) * self.space.basis(j)
    }

    /// All nine compressions. Total: singular blocks are returned as is.
    pub fn blocks(&self) -> BlockGrid<T> {
        std::array::from_fn(|i| std::array::from_fn(|j| self.block(i, j)))
    }

    /// Compression of `L` to `U ⊕ E`, split as `dim U + dim E`.
    pub fn compression_ue(&self) -> (Operator<T>, BlockPartition) {
        let w = self.space.basis_ue();
        let [du, de, _] = self.space.dims();
        (&(&w.adjoint() * &self.l) * &w, BlockPartition::split(du, de))
    }

    pub fn check_hypotheses(&self, delta: f64) -> Result<HypothesisReport> {
        let l11 = self.block(E, E);
        let h0 = is_invertible(&l11);
        let self_adjoint = self.l.is_self_adjoint(DEFAULT_TOL);
        let h1 = h0 && self_adjoint && l11.is_psd(DEFAULT_TOL)?;
        let h2 = h1 && self.l.is_psd(DEFAULT_TOL)? && is_invertible(&self.l);
        let lm = check_lm(&self.l, delta, DEFAULT_LM_SAMPLES)?;
        Ok(HypothesisReport { h0, h1, h2, lm })
    }

    /// The unique solution at `E0` (coordinates in `U`), under (H0).
    pub fn solve(&self, e0: &DVector<T>) -> Result<ZSolution<T>> {
        let [du, ..] = self.space.dims();
        if e0.len() != du {
            return Err(Error::DimensionMismatch {
                context: "E0 coordinates",
                expected: du,
                found: e0.len(),
            });
        }
        let g = self.blocks();
        let rhs = g[E][U].matrix() * e0;
        let rhs = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        let e = -crate::operator::solve_checked(g[E][E].matrix(), &rhs, DEFAULT_INVERT_RTOL, "L11")
            .map_err(h0_error)?
            .column(0)
            .into_owned();
        let j0 = g[U][U].matrix() * e0 + g[U][E].matrix() * &e;
        let j = g[J][U].matrix() * e0 + g[J][E].matrix() * &e;
        Ok(ZSolution { j0, e, j })
    }

    /// `L* = L00 - L01 L11^{-1} L10`, under (H0).
    pub fn effective_operator(&self) -> Result<Operator<T>> {
        let (a, part) = self.compression_ue();
        schur_complement(&a, &part).map_err(h0_error)
    }

    /// `(H, U, J, E, L^{-1})`.
    pub fn dual(&self) -> Result<Self> {
        let inv = self.l.inverse(DEFAULT_INVERT_RTOL, "L")?;
        Ok(Self {
            space: Arc::new(self.space.swap_ej()),
            l: inv,
        })
    }

    /// Certifies (LM) on the default angle grid.
    pub fn require_lm(&self) -> Result<f64> {
        let delta = LM_DELTA_REL * self.l.norm();
        check_lm(&self.l, delta, DEFAULT_LM_SAMPLES)?.ok_or(Error::HypothesisFailed("LM"))
    }

    /// `‖(L^{-1})_{*'} - (L_*)^{-1}‖ / ‖(L_*)^{-1}‖`, under (LM).
    pub fn duality_check(&self) -> Result<f64> {
        self.require_lm()?;
        let dual = self.dual()?;
        dual.require_lm()
            .map_err(|_| Error::HypothesisFailed("LM for the inverse"))?;
        let direct_inv = self.effective_operator()?.inverse(DEFAULT_INVERT_RTOL, "L*")?;
        let dual_eff = dual.effective_operator()?;
        Ok(dual_eff.rel_diff(&direct_inv))
    }

    /// The quadratic form `(E0 + E, L(E0 + E))`; real under (H1).
    pub fn dirichlet_energy(&self, e0: &DVector<T>, e: &DVector<T>) -> T {
        let x = self.space.embed(U, e0) + self.space.embed(E, e);
        x.dotc(&(self.l.matrix() * &x))
    }

    /// The quadratic form `(J0 + J, L^{-1}(J0 + J))`, whose minimum over
    /// `J` is `(J0, (L*)^{-1} J0)` under (H2).
    pub fn thomson_energy(&self, j0: &DVector<T>, j: &DVector<T>) -> Result<T> {
        let inv = self.l.inverse(DEFAULT_INVERT_RTOL, "L")?;
        let y = self.space.embed(U, j0) + self.space.embed(J, j);
        Ok(y.dotc(&(inv.matrix() * &y)))
    }

    /// Minimizer of the Thomson energy, `J = -(L^{-1})22^{-1} (L^{-1})20 J0`.
    pub fn thomson_minimizer(&self, j0: &DVector<T>) -> Result<DVector<T>> {
        let dual = self.dual()?;
        // In the dual problem `J` plays the role of `E`.
        Ok(dual.solve(j0)?.e)
    }

    /// `([(L^{-1})00]^{-1}, L00)`, bracketing `L*` under (H2).
    pub fn thomson_bounds(&self) -> Result<(Operator<T>, Operator<T>)> {
        if !self.check_hypotheses_fast()?.h2 {
            return Err(Error::HypothesisFailed("H2"));
        }
        let inv = self.l.inverse(DEFAULT_INVERT_RTOL, "L")?;
        let b0 = self.space.basis(U);
        let inv00 = &(&b0.adjoint() * &inv) * b0;
        let lower = inv00.inverse(DEFAULT_INVERT_RTOL, "(L^-1)00")?;
        let upper = self.block(U, U);
        Ok((lower, upper))
    }

    /// `R [(R^{-1} L^{-1} R)_*]^{-1} R^{-1}` on `U`, for a skew unitary `R`
    /// mapping `U → U`, `E → J` and `J → E`.
    pub fn kdm_conjugate(&self, r: &Operator<T>) -> Result<Operator<T>> {
        check_rotation(&self.space, r, DEFAULT_TOL)?;
        self.require_lm()?;
        let r_inv = r.adjoint();
        let l_inv = self.l.inverse(DEFAULT_INVERT_RTOL, "L")?;
        let conj = Self::new(self.space.clone(), &(&r_inv * &l_inv) * r)?;
        let inner = conj.effective_operator()?.inverse(DEFAULT_INVERT_RTOL, "(R^-1 L^-1 R)*")?;
        let b0 = self.space.basis(U);
        let r_u = &(&b0.adjoint() * r) * b0;
        Ok(&(&r_u * &inner) * &r_u.adjoint())
    }

    /// Monotonicity and concavity of `L ↦ L*` for two (H2) problems on the
    /// same decomposition.
    pub fn monotonicity_concavity_check(&self, other: &Self, t: f64) -> Result<MonotonicityReport> {
        self.monotonicity_concavity_check_tol(other, t, DEFAULT_TOL)
    }

    pub fn monotonicity_concavity_check_tol(&self, other: &Self, t: f64, tol: f64) -> Result<MonotonicityReport> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
        }
        if !Arc::ptr_eq(&self.space, &other.space) {
            let residual = self.space.distance(&other.space);
            if residual > tol {
                return Err(Error::DecompositionMismatch { residual });
            }
        }
        for p in [self, other] {
            if !p.check_hypotheses_fast()?.h2 {
                return Err(Error::HypothesisFailed("H2"));
            }
        }
        let l_eff = self.effective_operator()?;
        let m_eff = other.effective_operator()?;
        let mono = if loewner_leq(&self.l, &other.l, tol)? {
            Some(loewner_leq(&l_eff, &m_eff, tol)?)
        } else if loewner_leq(&other.l, &self.l, tol)? {
            Some(loewner_leq(&m_eff, &l_eff, tol)?)
        } else {
            None
        };
        let tt = T::from_re(t);
        let ts = T::from_re(1.0 - t);
        let mixed = Self::new(self.space.clone(), &self.l.scale(tt) + &other.l.scale(ts))?;
        let combo = &l_eff.scale(tt) + &m_eff.scale(ts);
        let concave = loewner_leq(&combo, &mixed.effective_operator()?, tol)?;
        Ok(MonotonicityReport { mono, concave })
    }

    /// `‖(J0 + J) - L(E0 + E)‖ / (‖L‖ ‖E0‖)` for a candidate solution.
    pub fn residual(&self, e0: &DVector<T>, sol: &ZSolution<T>) -> f64 {
        let lhs = self.space.embed(U, &sol.j0) + self.space.embed(J, &sol.j);
        let x = self.space.embed(U, e0) + self.space.embed(E, &sol.e);
        let r = to_f64::<T>((lhs - self.l.matrix() * x).norm());
        let scale = self.l.norm() * to_f64::<T>(e0.norm());
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }

    fn check_hypotheses_fast(&self) -> Result<HypothesisReport> {
        let l11 = self.block(E, E);
        let h0 = is_invertible(&l11);
        let self_adjoint = self.l.is_self_adjoint(DEFAULT_TOL);
        let h1 = h0 && self_adjoint && l11.is_psd(DEFAULT_TOL)?;
        let h2 = h1 && self.l.is_psd(DEFAULT_TOL)? && is_invertible(&self.l);
        Ok(HypothesisReport { h0, h1, h2, lm: None })
    }
}

fn is_invertible<T: Scalar>(a: &Operator<T>) -> bool {
    let c = crate::operator::condition_number(a.matrix());
    c.is_finite() && c * DEFAULT_INVERT_RTOL < 1.0
}

fn h0_error(e: Error) -> Error {
    match e {
        Error::NotInvertible { condition, .. } => Error::NotInvertible {
            what: "L11 (hypothesis H0)",
            condition,
        },
        other => other,
    }
}

/// Checks `R* = R^{-1} = -R`, `RU ⊆ U`, `RE ⊆ J`, `RJ ⊆ E`, naming the
/// first condition that fails.
pub fn check_rotation<T: Scalar>(space: &TripleDecomposition<T>, r: &Operator<T>, tol: f64) -> Result<()> {
    let n = space.dim();
    if r.rows() != n || r.cols() != n {
        return Err(Error::DimensionMismatch {
            context: "rotation operator",
            expected: n,
            found: r.rows(),
        });
    }
    let root = (n.max(1) as f64).sqrt();
    let unitary = (&(&r.adjoint() * r) - &Operator::identity(n)).norm() / root;
    if unitary > tol {
        return Err(Error::StructuralCondition {
            condition: "R* = R^-1".into(),
            residual: unitary,
        });
    }
    let skew = (&r.adjoint() + r).norm() / root;
    if skew > tol {
        return Err(Error::StructuralCondition {
            condition: "R* = -R".into(),
            residual: skew,
        });
    }
    for (from, to, name) in [(U, U, "RU ⊆ U"), (E, J, "RE ⊆ J"), (J, E, "RJ ⊆ E")] {
        let b_from = space.basis(from);
        let b_to = space.basis(to);
        let image = r * b_from;
        let leak = &image - &(b_to * &(&b_to.adjoint() * &image));
        let residual = leak.norm() / (b_from.cols().max(1) as f64).sqrt();
        if residual > tol {
            return Err(Error::StructuralCondition {
                condition: name.into(),
                residual,
            });
        }
    }
    Ok(())
}
