//! Z(n)-subspace collections and normalized pencils.
//!
//! A collection pairs a [`TripleDecomposition`] with a second orthogonal
//! splitting `H = P1 ⊕ … ⊕ Pn`, giving the pencil `L(z) = Σ z_i Λ_i`. Its
//! compression to `U ⊕ E` is a normalized PSD pencil whose Schur complement
//! is the effective map, and every normalized pencil arises this way
//! ([`realize`]).

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    loewner_leq, orthonormal_basis, projection_residual, schur_complement, BlockPartition, Operator,
    DEFAULT_TOL,
};
use crate::scalar::{to_f64, Scalar};
use crate::zproblem::{check_rotation, hstack, TripleDecomposition, ZProblem, E, U};

/// A point `z ∈ ℂⁿ` at which a pencil is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PencilPoint {
    z: Vec<Complex64>,
}

impl PencilPoint {
    pub fn new(z: Vec<Complex64>) -> Self {
        Self { z }
    }

    pub fn from_real(z: &[f64]) -> Self {
        Self::new(z.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn values(&self) -> &[Complex64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Exact membership in `D`: all `z_i ≠ 0` and the arguments fit in an
    /// open half-plane, i.e. some cyclic gap between sorted arguments
    /// exceeds `π`. Gaps within rounding of `π` are decided by the sign of
    /// `Im(conj(a) b)`, so exactly antipodal pairs are rejected.
    pub fn in_domain_d(&self) -> bool {
        if self.z.is_empty() || self.z.iter().any(|z| *z == Complex64::new(0.0, 0.0) || !z.is_finite()) {
            return false;
        }
        let mut pts: Vec<(f64, Complex64)> = self.z.iter().map(|z| (z.arg(), *z)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let m = pts.len();
        (0..m).any(|k| {
            let (a, za) = pts[k];
            let (b, zb) = pts[(k + 1) % m];
            let gap = if k + 1 == m { b + 2.0 * PI - a } else { b - a };
            if (gap - PI).abs() > 1e-9 {
                gap > PI
            } else {
                // Near-antipodal pair: decide by the sign of the cross product.
                (za.conj() * zb).im < 0.0
            }
        })
    }

    pub fn require_in_domain(&self) -> Result<()> {
        if self.in_domain_d() {
            Ok(())
        } else {
            Err(Error::NotInDomain(self.z.clone()))
        }
    }

    /// `z⁻¹ = (1/z_1, …, 1/z_n)`.
    pub fn inverse(&self) -> Self {
        Self::new(self.z.iter().map(|z| z.inv()).collect())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.z.iter().map(|z| z * c).collect())
    }

    /// Real parts when every entry is real and strictly positive.
    pub fn as_positive_reals(&self) -> Option<Vec<f64>> {
        self.z
            .iter()
            .map(|z| (z.im == 0.0 && z.re > 0.0).then_some(z.re))
            .collect()
    }

    pub fn require_positive(&self) -> Result<Vec<f64>> {
        self.as_positive_reals().ok_or_else(|| {
            Error::InvalidArgument(format!("z must be real and positive, got {:?}", self.z))
        })
    }

    /// Entries converted into `T`; real fields reject complex entries.
    pub fn to_field<T: Scalar>(&self) -> Result<Vec<T>> {
        self.z
            .iter()
            .map(|&z| T::from_complex(z).ok_or(Error::FieldMismatch { value: z, field: T::FIELD }))
            .collect()
    }
}

/// Convenience wrapper for [`PencilPoint::in_domain_d`].
pub fn in_domain_d(z: &PencilPoint) -> bool {
    z.in_domain_d()
}

#[derive(Debug, Clone)]
enum Phases<T: Scalar> {
    /// Phase label of each ambient coordinate; `Λ_i` is diagonal.
    Labels { labels: Vec<usize>, n: usize },
    /// Column isometry onto each `P_i`.
    Bases(Vec<Operator<T>>),
}

/// A triple decomposition together with phase projections `Λ_1 … Λ_n`.
#[derive(Debug, Clone)]
pub struct SubspaceCollection<T: Scalar> {
    space: Arc<TripleDecomposition<T>>,
    phases: Phases<T>,
    pencil: OnceLock<NormalizedPencil<T>>,
}

impl<T: Scalar> SubspaceCollection<T> {
    /// Phases given by a label per ambient coordinate (`labels[k] < n`).
    /// Empty phases are allowed.
    pub fn from_labels(space: Arc<TripleDecomposition<T>>, labels: Vec<usize>, n: usize) -> Result<Self> {
        if labels.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                context: "phase labels",
                expected: space.dim(),
                found: labels.len(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidArgument("a collection needs at least one phase".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n) {
            return Err(Error::InvalidArgument(format!("phase label {bad} out of range for n = {n}")));
        }
        Ok(Self {
            space,
            phases: Phases::Labels { labels, n },
            pencil: OnceLock::new(),
        })
    }

    /// Phases given by column isometries that jointly form a unitary.
    pub fn from_phase_bases(space: Arc<TripleDecomposition<T>>, bases: Vec<Operator<T>>, tol: f64) -> Result<Self> {
        let dim = space.dim();
        if bases.is_empty() {
            return Err(Error::InvalidArgument("a collection needs at least one phase".into()));
        }
        for b in &bases {
            if b.rows() != dim {
                return Err(Error::DimensionMismatch {
                    context: "phase basis rows",
                    expected: dim,
                    found: b.rows(),
                });
            }
        }
        let total: usize = bases.iter().map(|b| b.cols()).sum();
        if total != dim {
            return Err(Error::DimensionMismatch {
                context: "phase dimensions",
                expected: dim,
                found: total,
            });
        }
        let parts: Vec<&DMatrix<T>> = bases.iter().map(|b| b.matrix()).collect();
        let all = hstack(&parts);
        let residual = to_f64::<T>((all.adjoint() * &all - DMatrix::identity(dim, dim)).norm())
            / (dim.max(1) as f64).sqrt();
        if residual > tol {
            return Err(Error::NotProjection {
                what: "phase splitting (bases not jointly orthonormal)".into(),
                residual,
            });
        }
        Ok(Self {
            space,
            phases: Phases::Bases(bases),
            pencil: OnceLock::new(),
        })
    }

    /// Phases given as projections; checks `Λ_i Λ_j ≈ 0` and `Σ Λ_i ≈ I`.
    pub fn from_projections(space: Arc<TripleDecomposition<T>>, lambdas: &[Operator<T>], tol: f64) -> Result<Self> {
        let dim = space.dim();
        let mut sum = Operator::<T>::zeros(dim, dim);
        for (i, l) in lambdas.iter().enumerate() {
            if l.rows() != dim || l.cols() != dim {
                return Err(Error::DimensionMismatch {
                    context: "phase projection",
                    expected: dim,
                    found: l.rows(),
                });
            }
            let residual = projection_residual(l);
            if residual > tol {
                return Err(Error::NotProjection {
                    what: format!("Λ{}", i + 1),
                    residual,
                });
            }
            sum = &sum + l;
        }
        let residual = sum.rel_diff(&Operator::identity(dim));
        if residual > tol {
            return Err(Error::NotProjection {
                what: "Σ Λ_i = I".into(),
                residual,
            });
        }
        let bases = lambdas
            .iter()
            .map(|l| orthonormal_basis(l, tol))
            .collect::<Result<Vec<_>>>()?;
        Self::from_phase_bases(space, bases, tol.max(1e-12))
    }

    pub fn space(&self) -> &Arc<TripleDecomposition<T>> {
        &self.space
    }

    pub fn n(&self) -> usize {
        match &self.phases {
            Phases::Labels { n, .. } => *n,
            Phases::Bases(b) => b.len(),
        }
    }

    /// `dim P_i`.
    pub fn phase_dim(&self, i: usize) -> usize {
        match &self.phases {
            Phases::Labels { labels, .. } => labels.iter().filter(|&&l| l == i).count(),
            Phases::Bases(b) => b[i].cols(),
        }
    }

    /// Phase label per ambient coordinate, when the phases are diagonal.
    pub fn labels(&self) -> Option<&[usize]> {
        match &self.phases {
            Phases::Labels { labels, .. } => Some(labels),
            Phases::Bases(_) => None,
        }
    }

    /// The projection `Λ_i` as a dense operator.
    pub fn lambda(&self, i: usize) -> Operator<T> {
        match &self.phases {
            Phases::Labels { labels, .. } => {
                let diag: Vec<T> = labels
                    .iter()
                    .map(|&l| if l == i { T::one() } else { T::zero() })
                    .collect();
                Operator::from_diagonal(&diag)
            }
            Phases::Bases(b) => &b[i] * &b[i].adjoint(),
        }
    }

    /// `W* Λ_i W` for a column isometry `W` of the ambient space.
    pub fn compress(&self, i: usize, w: &Operator<T>) -> Operator<T> {
        match &self.phases {
            Phases::Labels { labels, .. } => {
                let rows: Vec<usize> = (0..labels.len()).filter(|&k| labels[k] == i).collect();
                let wi = w.matrix().select_rows(rows.iter());
                Operator::from_matrix(wi.adjoint() * wi)
            }
            Phases::Bases(b) => {
                let x = b[i].matrix().adjoint() * w.matrix();
                Operator::from_matrix(x.adjoint() * x)
            }
        }
    }

    /// `L(z) = Σ z_i Λ_i` on the ambient space.
    pub fn pencil_at(&self, z: &PencilPoint) -> Result<Operator<T>> {
        let zs = self.coefficients(z)?;
        match &self.phases {
            Phases::Labels { labels, .. } => {
                let diag: Vec<T> = labels.iter().map(|&l| zs[l]).collect();
                Ok(Operator::from_diagonal(&diag))
            }
            Phases::Bases(_) => {
                let dim = self.space.dim();
                let mut acc = Operator::zeros(dim, dim);
                for (i, zi) in zs.iter().enumerate() {
                    acc = &acc + &self.lambda(i).scale(*zi);
                }
                Ok(acc)
            }
        }
    }

    /// The Z-problem `(H, U, E, J, L(z))`.
    pub fn problem_at(&self, z: &PencilPoint) -> Result<ZProblem<T>> {
        ZProblem::new(self.space.clone(), self.pencil_at(z)?)
    }

    /// `L*(z)`, computed from the full Z-problem at `z ∈ D`.
    pub fn effective_map(&self, z: &PencilPoint) -> Result<Operator<T>> {
        z.require_in_domain()?;
        self.problem_at(z)?.effective_operator()
    }

    /// Compressions of the `Λ_i` to `U ⊕ E`.
    pub fn bess_pencil(&self) -> &NormalizedPencil<T> {
        self.pencil.get_or_init(|| {
            let w = self.space.basis_ue();
            let [du, de, _] = self.space.dims();
            let coeffs = (0..self.n()).map(|i| self.compress(i, &w)).collect();
            NormalizedPencil {
                coeffs,
                split: BlockPartition::split(du, de),
            }
        })
    }

    /// `C_i = B0* Λ_i B0`, the compressions to `U`.
    pub fn compressions_u(&self) -> Vec<Operator<T>> {
        let b0 = self.space.basis(U);
        (0..self.n()).map(|i| self.compress(i, b0)).collect()
    }

    /// `((Σ C_i / z_i)⁻¹, Σ z_i C_i)` for real positive `z`.
    pub fn wiener_bounds(&self, z: &PencilPoint) -> Result<(Operator<T>, Operator<T>)> {
        self.check_len(z)?;
        let zs = z.require_positive()?;
        let c = self.compressions_u();
        let du = self.space.dims()[U];
        let mut harmonic = Operator::zeros(du, du);
        let mut upper = Operator::zeros(du, du);
        for (ci, &zi) in c.iter().zip(&zs) {
            harmonic = &harmonic + &ci.scale(T::from_re(1.0 / zi));
            upper = &upper + &ci.scale(T::from_re(zi));
        }
        let lower = harmonic.inverse(crate::operator::DEFAULT_INVERT_RTOL, "Σ C_i / z_i")?;
        Ok((lower, upper))
    }

    /// Relative residual of `L*(z) = R [L*(z⁻¹)]⁻¹ R⁻¹` on `U`.
    ///
    /// `R` must satisfy the conditions of [`check_rotation`] and also map
    /// each phase into itself.
    pub fn multiphase_kdm(&self, r: &Operator<T>, z: &PencilPoint) -> Result<f64> {
        self.multiphase_kdm_tol(r, z, DEFAULT_TOL)
    }

    pub fn multiphase_kdm_tol(&self, r: &Operator<T>, z: &PencilPoint, tol: f64) -> Result<f64> {
        check_rotation(&self.space, r, tol)?;
        for i in 0..self.n() {
            let residual = self.phase_leak(i, r);
            if residual > tol {
                return Err(Error::StructuralCondition {
                    condition: format!("RP{} ⊆ P{}", i + 1, i + 1),
                    residual,
                });
            }
        }
        z.require_in_domain()?;
        let direct = self.effective_map(z)?;
        let inv = self
            .effective_map(&z.inverse())?
            .inverse(crate::operator::DEFAULT_INVERT_RTOL, "L*(z⁻¹)")?;
        let b0 = self.space.basis(U);
        let r_u = &(&b0.adjoint() * r) * b0;
        let rhs = &(&r_u * &inv) * &r_u.adjoint();
        Ok(rhs.rel_diff(&direct))
    }

    /// `L*(z) ⪯ L*(w)` for `0 < z_i ≤ w_i`.
    pub fn multiphase_monotone(&self, z: &PencilPoint, w: &PencilPoint) -> Result<bool> {
        self.check_len(z)?;
        self.check_len(w)?;
        let zs = z.require_positive()?;
        let ws = w.require_positive()?;
        if zs.iter().zip(&ws).any(|(a, b)| a > b) {
            return Err(Error::InvalidArgument("monotonicity needs z_i ≤ w_i".into()));
        }
        let lz = self.effective_map(z)?;
        let lw = self.effective_map(w)?;
        loewner_leq(&lz.re_part()?, &lw.re_part()?, DEFAULT_TOL)
    }

    /// `‖(I - Λ_i) R Λ_i‖ / √dim P_i`.
    fn phase_leak(&self, i: usize, r: &Operator<T>) -> f64 {
        let denom = (self.phase_dim(i).max(1) as f64).sqrt();
        match &self.phases {
            Phases::Labels { labels, .. } => {
                let mut sq = 0.0;
                for (col, &lc) in labels.iter().enumerate() {
                    if lc != i {
                        continue;
                    }
                    for (row, &lr) in labels.iter().enumerate() {
                        if lr != i {
                            let v = to_f64::<T>(r.get(row, col).modulus());
                            sq += v * v;
                        }
                    }
                }
                sq.sqrt() / denom
            }
            Phases::Bases(b) => {
                let image = r * &b[i];
                let leak = &image - &(&b[i] * &(&b[i].adjoint() * &image));
                leak.norm() / denom
            }
        }
    }

    fn check_len(&self, z: &PencilPoint) -> Result<()> {
        if z.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "pencil point length",
                expected: self.n(),
                found: z.len(),
            });
        }
        Ok(())
    }

    fn coefficients(&self, z: &PencilPoint) -> Result<Vec<T>> {
        self.check_len(z)?;
        z.to_field()
    }
}

/// `A(z) = Σ z_i A_i` with PSD `A_i` summing to `I`, split over `H0 ⊕ H1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPencil<T: Scalar> {
    coeffs: Vec<Operator<T>>,
    split: BlockPartition,
}

impl<T: Scalar> NormalizedPencil<T> {
    /// Validates self-adjointness, PSD and normalization of the
    /// coefficients to `tol`, naming the offending coefficient (1-based).
    pub fn new(coeffs: Vec<Operator<T>>, dim_h0: usize, dim_h1: usize, tol: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidPencil("no coefficients".into()));
        }
        if dim_h0 == 0 {
            return Err(Error::InvalidPencil("split: dim_h0 must be positive".into()));
        }
        let dim = dim_h0 + dim_h1;
        let mut sum = Operator::<T>::zeros(dim, dim);
        for (i, a) in coeffs.iter().enumerate() {
            let k = i + 1;
            if a.rows() != dim || a.cols() != dim {
                return Err(Error::InvalidPencil(format!(
                    "split: coefficient {k} is {}x{}, expected {dim}x{dim} from dim_h0 + dim_h1",
                    a.rows(),
                    a.cols()
                )));
            }
            let residual = a.self_adjoint_residual();
            if residual > tol {
                return Err(Error::InvalidPencil(format!(
                    "PSD: coefficient {k} is not self-adjoint (residual {residual:.3e})"
                )));
            }
            let min = a.min_eigenvalue()?;
            if min < -tol {
                return Err(Error::InvalidPencil(format!(
                    "PSD: coefficient {k} has eigenvalue {min:.6e} < 0"
                )));
            }
            sum = &sum + a;
        }
        let residual = sum.rel_diff(&Operator::identity(dim));
        if residual > tol {
            return Err(Error::InvalidPencil(format!(
                "normalization: Σ A_i differs from I (relative residual {residual:.3e})"
            )));
        }
        Ok(Self {
            coeffs,
            split: BlockPartition::split(dim_h0, dim_h1),
        })
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Operator<T>] {
        &self.coeffs
    }

    pub fn split(&self) -> &BlockPartition {
        &self.split
    }

    pub fn dim_h0(&self) -> usize {
        self.split.sizes()[0]
    }

    pub fn dim_h1(&self) -> usize {
        self.split.sizes()[1]
    }

    pub fn dim(&self) -> usize {
        self.split.dim()
    }

    /// `A(z) = Σ z_i A_i`.
    pub fn at(&self, z: &PencilPoint) -> Result<Operator<T>> {
        if z.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "pencil point length",
                expected: self.n(),
                found: z.len(),
            });
        }
        let zs: Vec<T> = z.to_field()?;
        let dim = self.dim();
        let mut acc = Operator::zeros(dim, dim);
        for (a, zi) in self.coeffs.iter().zip(zs) {
            acc = &acc + &a.scale(zi);
        }
        Ok(acc)
    }

    /// `f(z) = A00(z) - A01(z) A11(z)⁻¹ A10(z)` for `z ∈ D`.
    pub fn schur(&self, z: &PencilPoint) -> Result<Operator<T>> {
        z.require_in_domain()?;
        schur_complement(&self.at(z)?, &self.split)
    }

    pub fn to_json(&self) -> PencilJson {
        PencilJson {
            n: self.n(),
            dim_h0: self.dim_h0(),
            dim_h1: self.dim_h1(),
            coeffs: self
                .coeffs
                .iter()
                .map(|a| {
                    (0..a.rows())
                        .map(|i| {
                            (0..a.cols())
                                .map(|j| {
                                    let c = a.get(i, j).to_complex();
                                    [c.re, c.im]
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_json(doc: &PencilJson, tol: f64) -> Result<Self> {
        if doc.coeffs.len() != doc.n {
            return Err(Error::InvalidPencil(format!(
                "n = {} but {} coefficients given",
                doc.n,
                doc.coeffs.len()
            )));
        }
        let dim = doc.dim_h0 + doc.dim_h1;
        let mut coeffs = Vec::with_capacity(doc.n);
        for (k, rows) in doc.coeffs.iter().enumerate() {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(Error::InvalidPencil(format!(
                    "split: coefficient {} is not {dim}x{dim}",
                    k + 1
                )));
            }
            let mut entries = Vec::with_capacity(dim * dim);
            for row in rows {
                for &[re, im] in row {
                    let value = Complex64::new(re, im);
                    entries.push(T::from_complex(value).ok_or(Error::FieldMismatch { value, field: T::FIELD })?);
                }
            }
            coeffs.push(Operator::from_row_slice(dim, dim, &entries)?);
        }
        Self::new(coeffs, doc.dim_h0, doc.dim_h1, tol)
    }

    pub fn from_json_str(s: &str, tol: f64) -> Result<Self> {
        let doc: PencilJson = serde_json::from_str(s)?;
        Self::from_json(&doc, tol)
    }
}

/// On-disk pencil: row-major coefficients with `[re, im]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilJson {
    pub n: usize,
    pub dim_h0: usize,
    pub dim_h1: usize,
    pub coeffs: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Convenience wrapper for [`NormalizedPencil::schur`].
pub fn schur_of_pencil<T: Scalar>(p: &NormalizedPencil<T>, z: &PencilPoint) -> Result<Operator<T>> {
    p.schur(z)
}

/// How the coefficients are factored as `A_i = V_i* V_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Factorization {
    /// Spectral factor on the numerical range of `A_i`; dilation dimension
    /// `Σ rank A_i`.
    #[default]
    Minimal,
    /// `V_i = A_i^{1/2}`; dilation dimension `n · dim`.
    SquareRoot,
}

/// A collection whose effective map reproduces a given pencil.
#[derive(Debug, Clone)]
pub struct Realization<T: Scalar> {
    pub collection: SubspaceCollection<T>,
    /// Unitary from `H0` onto the coordinates of `U`.
    pub t: Operator<T>,
    /// The stacked isometry `V = [V_1; …; V_n]`.
    pub v: Operator<T>,
    /// Row count of each `V_i`.
    pub ranks: Vec<usize>,
}

impl<T: Scalar> Realization<T> {
    pub fn dilation_dim(&self) -> usize {
        self.v.rows()
    }

    /// `T* L*(z) T`.
    pub fn transported(&self, z: &PencilPoint) -> Result<Operator<T>> {
        let eff = self.collection.effective_map(z)?;
        Ok(&(&self.t.adjoint() * &eff) * &self.t)
    }

    /// `‖f(z) - T* L*(z) T‖ / ‖f(z)‖`.
    pub fn round_trip_residual(&self, p: &NormalizedPencil<T>, z: &PencilPoint) -> Result<f64> {
        Ok(self.transported(z)?.rel_diff(&p.schur(z)?))
    }
}

/// Builds a collection with `f(z) = T* L*(z) T` on `D`.
pub fn realize<T: Scalar>(p: &NormalizedPencil<T>, mode: Factorization) -> Result<Realization<T>> {
    let dim = p.dim();
    let n = p.n();
    let eps = if std::mem::size_of::<T::RealField>() == 4 {
        f32::EPSILON as f64
    } else {
        f64::EPSILON
    };
    let mut blocks: Vec<DMatrix<T>> = Vec::with_capacity(n);
    for a in p.coeffs() {
        let herm = a.re_part()?.into_matrix();
        let eig = herm.symmetric_eigen();
        let values: Vec<f64> = eig.eigenvalues.iter().map(|x| to_f64::<T>(*x)).collect();
        let spectral = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let keep: Vec<usize> = match mode {
            Factorization::Minimal => {
                let threshold = n as f64 * dim as f64 * eps * spectral;
                (0..dim).filter(|&k| values[k] > threshold).collect()
            }
            Factorization::SquareRoot => (0..dim).collect(),
        };
        let mut vi = DMatrix::<T>::zeros(keep.len(), dim);
        for (row, &k) in keep.iter().enumerate() {
            let s = T::from_re(values[k].max(0.0).sqrt());
            let q = eig.eigenvectors.column(k);
            for c in 0..dim {
                vi[(row, c)] = s * q[c].conjugate();
            }
        }
        if mode == Factorization::SquareRoot {
            vi = eig.eigenvectors.clone() * vi;
        }
        blocks.push(vi);
    }
    let ranks: Vec<usize> = blocks.iter().map(|b| b.nrows()).collect();
    let m: usize = ranks.iter().sum();
    let mut v = DMatrix::<T>::zeros(m, dim);
    let mut row = 0;
    for b in &blocks {
        v.view_mut((row, 0), (b.nrows(), dim)).copy_from(b);
        row += b.nrows();
    }
    let v = Operator::from_matrix(v);
    let d0 = p.dim_h0();
    let b0 = v.submatrix(0, m, 0, d0);
    let b1 = v.submatrix(0, m, d0, dim - d0);
    let complement = &Operator::identity(m) - &(&v * &v.adjoint());
    let b2 = orthonormal_basis(&complement, 1e-8)?;
    let space = Arc::new(TripleDecomposition::from_bases(b0, b1, b2, 1e-8)?);
    let labels: Vec<usize> = ranks
        .iter()
        .enumerate()
        .flat_map(|(i, &r)| std::iter::repeat_n(i, r))
        .collect();
    let collection = SubspaceCollection::from_labels(space.clone(), labels, n)?;
    let t = &space.basis(U).adjoint() * &v.submatrix(0, m, 0, d0);
    debug_assert_eq!(space.dims()[E], dim - d0);
    Ok(Realization {
        collection,
        t,
        v,
        ranks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn harmonic_pencil() -> NormalizedPencil<f64> {
        NormalizedPencil::new(
            vec![
                Operator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]),
                Operator::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]),
            ],
            1,
            1,
            1e-12,
        )
        .unwrap()
    }

    fn split_pencil() -> NormalizedPencil<Complex64> {
        NormalizedPencil::new(
            vec![
                Operator::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
                Operator::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]),
            ],
            1,
            1,
            1e-12,
        )
        .unwrap()
    }

    #[test]
    fn domain_examples() {
        assert!(PencilPoint::from_real(&[1.0, 2.0, 3.0]).in_domain_d());
        assert!(!PencilPoint::from_real(&[1.0, -1.0]).in_domain_d());
        assert!(PencilPoint::new(vec![c(0.0, 1.0), c(1.0, 1.0)]).in_domain_d());
        assert!(!PencilPoint::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).in_domain_d());
        assert!(!PencilPoint::new(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]).in_domain_d());
        assert!(PencilPoint::new(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.01)]).in_domain_d());
        assert!(PencilPoint::from_real(&[-2.0]).in_domain_d());
        assert!(matches!(
            PencilPoint::from_real(&[1.0, -1.0]).require_in_domain(),
            Err(Error::NotInDomain(_))
        ));
    }

    #[test]
    fn pencil_at_examples() {
        let space = Arc::new(TripleDecomposition::<f64>::coordinate(1, 1, 0));
        let col = SubspaceCollection::from_labels(space, vec![0, 1], 2).unwrap();
        assert_eq!(
            col.pencil_at(&PencilPoint::from_real(&[2.0, 5.0])).unwrap(),
            Operator::from_diagonal(&[2.0, 5.0])
        );
        assert_eq!(col.pencil_at(&PencilPoint::from_real(&[1.0, 1.0])).unwrap(), Operator::identity(2));
        assert_eq!(
            col.pencil_at(&PencilPoint::from_real(&[3.0, 3.0])).unwrap(),
            Operator::identity(2).scale(3.0)
        );
        assert!(matches!(
            col.pencil_at(&PencilPoint::from_real(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            col.pencil_at(&PencilPoint::new(vec![c(1.0, 1.0), c(1.0, 0.0)])),
            Err(Error::FieldMismatch { .. })
        ));
    }

    #[test]
    fn effective_map_of_constant_point() {
        let space = Arc::new(TripleDecomposition::<Complex64>::coordinate(2, 2, 1));
        let col = SubspaceCollection::from_labels(space.clone(), vec![0, 1, 0, 1, 1], 2).unwrap();
        let lam = c(0.3, 2.0);
        let eff = col.effective_map(&PencilPoint::new(vec![lam, lam])).unwrap();
        assert!(eff.rel_diff(&Operator::identity(2).scale(lam)) < 1e-14);
        let one = SubspaceCollection::from_labels(space, vec![0; 5], 1).unwrap();
        let eff = one.effective_map(&PencilPoint::new(vec![c(-1.0, 2.0)])).unwrap();
        assert!(eff.rel_diff(&Operator::identity(2).scale(c(-1.0, 2.0))) < 1e-14);
        assert!(matches!(
            one.effective_map(&PencilPoint::new(vec![c(0.0, 0.0)])),
            Err(Error::NotInDomain(_))
        ));
    }

    #[test]
    fn bess_pencil_without_e() {
        let space = Arc::new(TripleDecomposition::<f64>::coordinate(2, 0, 2));
        let col = SubspaceCollection::from_labels(space, vec![0, 1, 1, 0], 2).unwrap();
        let p = col.bess_pencil();
        assert_eq!(p.coeffs()[0], Operator::from_diagonal(&[1.0, 0.0]));
        assert_eq!(p.coeffs()[1], Operator::from_diagonal(&[0.0, 1.0]));
        let z = PencilPoint::from_real(&[2.0, 7.0]);
        assert_eq!(p.schur(&z).unwrap(), Operator::from_diagonal(&[2.0, 7.0]));
        assert_eq!(col.effective_map(&z).unwrap(), Operator::from_diagonal(&[2.0, 7.0]));
    }

    #[test]
    fn schur_of_pencil_examples() {
        let z = PencilPoint::new(vec![c(2.0, 0.0), c(0.0, 3.0)]);
        assert_eq!(split_pencil().schur(&z).unwrap().get(0, 0), c(2.0, 0.0));
        let h = harmonic_pencil();
        assert_relative_eq!(
            h.schur(&PencilPoint::from_real(&[1.0, 4.0])).unwrap().get(0, 0),
            1.6,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            h.schur(&PencilPoint::from_real(&[1.0, 1.0])).unwrap().get(0, 0),
            1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn realize_examples() {
        let h = harmonic_pencil();
        let r = realize(&h, Factorization::Minimal).unwrap();
        assert_eq!(r.dilation_dim(), 2);
        assert_eq!(r.ranks, vec![1, 1]);
        let z = PencilPoint::from_real(&[1.0, 4.0]);
        assert_relative_eq!(r.transported(&z).unwrap().get(0, 0), 1.6, epsilon = 1e-12);
        assert!(r.round_trip_residual(&h, &z).unwrap() < 1e-12);

        let s = split_pencil();
        let r = realize(&s, Factorization::Minimal).unwrap();
        let z = PencilPoint::new(vec![c(2.0, 0.0), c(0.0, 3.0)]);
        assert!((r.transported(&z).unwrap().get(0, 0) - c(2.0, 0.0)).norm() < 1e-12);

        let one = NormalizedPencil::new(vec![Operator::<f64>::identity(3)], 2, 1, 1e-12).unwrap();
        for mode in [Factorization::Minimal, Factorization::SquareRoot] {
            let r = realize(&one, mode).unwrap();
            let eff = r.transported(&PencilPoint::from_real(&[2.5])).unwrap();
            assert!(eff.rel_diff(&Operator::identity(2).scale(2.5)) < 1e-12);
        }
        let sq = realize(&h, Factorization::SquareRoot).unwrap();
        assert_eq!(sq.dilation_dim(), 4);
        assert!(sq.round_trip_residual(&h, &PencilPoint::from_real(&[1.0, 4.0])).unwrap() < 1e-12);
        let t = &sq.t;
        assert!((&t.adjoint() * t).rel_diff(&Operator::identity(1)) < 1e-12);
    }

    #[test]
    fn pencil_validation_names_the_violation() {
        let err = NormalizedPencil::<f64>::new(
            vec![
                Operator::from_real_rows(&[&[1.5, 0.0], &[0.0, 0.0]]),
                Operator::from_real_rows(&[&[-0.5, 0.0], &[0.0, 1.0]]),
            ],
            1,
            1,
            1e-12,
        )
        .unwrap_err();
        assert!(err.to_string().contains("PSD: coefficient 2"), "{err}");
        let err = NormalizedPencil::new(vec![Operator::<f64>::identity(2).scale(0.5)], 1, 1, 1e-12).unwrap_err();
        assert!(err.to_string().contains("normalization"), "{err}");
        let err = NormalizedPencil::new(vec![Operator::<f64>::identity(2)], 2, 1, 1e-12).unwrap_err();
        assert!(err.to_string().contains("split"), "{err}");
    }

    #[test]
    fn pencil_json_round_trip() {
        let h = harmonic_pencil();
        let s = serde_json::to_string(&h.to_json()).unwrap();
        let back = NormalizedPencil::<f64>::from_json_str(&s, 1e-12).unwrap();
        assert_eq!(back, h);
        let complex = NormalizedPencil::<Complex64>::from_json_str(&s, 1e-12).unwrap();
        assert_eq!(complex.n(), 2);
    }

    #[test]
    fn wiener_bounds_of_constant_point() {
        let space = Arc::new(TripleDecomposition::<f64>::coordinate(2, 2, 2));
        let col = SubspaceCollection::from_labels(space, vec![0, 1, 1, 0, 1, 0], 2).unwrap();
        let (lo, up) = col.wiener_bounds(&PencilPoint::from_real(&[3.0, 3.0])).unwrap();
        assert!(lo.rel_diff(&Operator::identity(2).scale(3.0)) < 1e-14);
        assert!(up.rel_diff(&Operator::identity(2).scale(3.0)) < 1e-14);
        assert!(col.wiener_bounds(&PencilPoint::from_real(&[1.0, -1.0])).is_err());
        assert!(col.multiphase_monotone(&PencilPoint::from_real(&[1.0, 1.0]), &PencilPoint::from_real(&[1.0, 2.0])).unwrap());
        assert!(col.multiphase_monotone(&PencilPoint::from_real(&[2.0, 1.0]), &PencilPoint::from_real(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn kdm_rejects_rotation_mixing_phases() {
        let space = Arc::new(TripleDecomposition::<f64>::coordinate(2, 1, 1));
        let r = Operator::from_real_rows(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[-1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, -1.0, 0.0],
        ]);
        let mixed = SubspaceCollection::from_labels(space.clone(), vec![0, 1, 0, 1], 2).unwrap();
        match mixed.multiphase_kdm(&r, &PencilPoint::from_real(&[1.0, 4.0])) {
            Err(Error::StructuralCondition { condition, .. }) => assert_eq!(condition, "RP1 ⊆ P1"),
            other => panic!("unexpected {other:?}"),
        }
        let ok = SubspaceCollection::from_labels(space, vec![0, 0, 1, 1], 2).unwrap();
        assert!(ok.multiphase_kdm(&r, &PencilPoint::from_real(&[1.0, 4.0])).unwrap() < 1e-12);
    }
}
