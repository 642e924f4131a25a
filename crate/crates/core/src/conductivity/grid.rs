use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Scalar};

/// Uniform periodic grid on `[0, 2π)^d` with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
}

impl GridSpec {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(d == 2 || d == 3) {
            return Err(Error::InvalidArgument(format!("grid dimension must be 2 or 3, got {d}")));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid needs at least 2 cells per axis, got {n}")));
        }
        Ok(Self { d, n })
    }

    /// `N^d`.
    pub fn cells(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// `d · N^d`, the dimension of the space of vector fields.
    pub fn dim(&self) -> usize {
        self.d * self.cells()
    }

    /// Row-major multi-index of a cell (first axis slowest).
    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        let mut rest = cell;
        for a in (0..self.d).rev() {
            idx[a] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    pub fn cell_of(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Sample point `2π i / N` of a cell.
    pub fn point(&self, cell: usize) -> Vec<f64> {
        self.multi_index(cell)
            .into_iter()
            .map(|i| 2.0 * std::f64::consts::PI * i as f64 / self.n as f64)
            .collect()
    }

    /// Signed frequency of DFT index `i`, in `(-N/2, N/2]`.
    pub fn frequency(&self, i: usize) -> i64 {
        let (i, n) = (i as i64, self.n as i64);
        if 2 * i <= n {
            i
        } else {
            i - n
        }
    }

    /// Signed frequency vector of the DFT bin at `cell`.
    pub fn wavevector(&self, cell: usize) -> Vec<i64> {
        self.multi_index(cell).into_iter().map(|i| self.frequency(i)).collect()
    }

    /// Unit direction spanning the curl-free part at frequency `k ≠ 0`.
    ///
    /// Components on a Nyquist axis (`|k_a| = N/2`, even `N`) are dropped,
    /// as the sampled derivative of that mode vanishes. A mode whose nonzero
    /// components all sit on Nyquist axes keeps `k` itself. The rule gives
    /// `p(-k) = ±p(k)`, so the projections map real fields to real fields,
    /// and `p` depends on `k` only through the axes it touches, so slab
    /// geometries stay exact.
    pub fn gradient_direction(&self, k: &[i64]) -> Vec<f64> {
        let half = self.n.is_multiple_of(2).then_some(self.n as i64 / 2);
        let mut v: Vec<f64> = k
            .iter()
            .map(|&ka| if Some(ka.abs()) == half { 0.0 } else { ka as f64 })
            .collect();
        if v.iter().all(|&x| x == 0.0) {
            v = k.iter().map(|&ka| ka as f64).collect();
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / norm).collect()
    }
}

/// A `d`-component field sampled on a grid, stored cell by cell.
///
/// The inner product is the cell average, so the isometric coordinates of
/// a field `F` are `F / √(N^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField<T: Scalar> {
    grid: GridSpec,
    values: Vec<T>,
}

impl<T: Scalar> PeriodicField<T> {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.dim()],
        }
    }

    /// Values laid out as `values[cell * d + component]`.
    pub fn from_values(grid: GridSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.dim() {
            return Err(Error::DimensionMismatch {
                context: "periodic field values",
                expected: grid.dim(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Field with `f(x)` at each sample point `x`.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> Vec<T>) -> Self {
        let mut values = Vec::with_capacity(grid.dim());
        for cell in 0..grid.cells() {
            let v = f(&grid.point(cell));
            assert_eq!(v.len(), grid.d, "field must have d components");
            values.extend(v);
        }
        Self { grid, values }
    }

    pub fn constant(grid: GridSpec, value: &[T]) -> Self {
        Self::from_fn(grid, |_| value.to_vec())
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, cell: usize, component: usize) -> T {
        self.values[cell * self.grid.d + component]
    }

    /// `(1/N^d) Σ conj(E(x))ᵀ F(x)`.
    pub fn inner(&self, other: &Self) -> T {
        let s = self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (a, b)| acc + a.conjugate() * *b);
        s * T::from_re(1.0 / self.grid.cells() as f64)
    }

    pub fn norm(&self) -> f64 {
        to_f64::<T>(self.inner(self).real()).max(0.0).sqrt()
    }

    /// Cell average `⟨F⟩`.
    pub fn average(&self) -> Vec<T> {
        let d = self.grid.d;
        let mut avg = vec![T::zero(); d];
        for (k, v) in self.values.iter().enumerate() {
            avg[k % d] += *v;
        }
        let w = T::from_re(1.0 / self.grid.cells() as f64);
        avg.into_iter().map(|a| a * w).collect()
    }

    /// Isometric coordinates `F / √(N^d)`.
    pub fn to_coords(&self) -> nalgebra::DVector<T> {
        let s = T::from_re(1.0 / (self.grid.cells() as f64).sqrt());
        nalgebra::DVector::from_iterator(self.values.len(), self.values.iter().map(|v| *v * s))
    }

    pub fn from_coords(grid: GridSpec, coords: &nalgebra::DVector<T>) -> Result<Self> {
        let s = T::from_re((grid.cells() as f64).sqrt());
        Self::from_values(grid, coords.iter().map(|v| *v * s).collect())
    }

    pub fn scale_by_cell(&self, factor: impl Fn(usize) -> T) -> Self {
        let d = self.grid.d;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| *v * factor(k / d))
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn add(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| *a + *b).collect();
        Self { grid: self.grid, values }
    }

    /// `‖self - other‖ / ‖other‖` in the averaged norm.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let diff = Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| *a - *b).collect(),
        };
        let scale = other.norm();
        if scale > 0.0 {
            diff.norm() / scale
        } else {
            diff.norm()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = GridSpec::new(3, 4).unwrap();
        assert_eq!(g.cells(), 64);
        assert_eq!(g.dim(), 192);
        for cell in 0..g.cells() {
            assert_eq!(g.cell_of(&g.multi_index(cell)), cell);
        }
        assert_eq!(g.multi_index(1), vec![0, 0, 1]);
    }

    #[test]
    fn frequencies_are_centered() {
        let g = GridSpec::new(2, 8).unwrap();
        let f: Vec<i64> = (0..8).map(|i| g.frequency(i)).collect();
        assert_eq!(f, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        let odd = GridSpec::new(2, 5).unwrap();
        let f: Vec<i64> = (0..5).map(|i| odd.frequency(i)).collect();
        assert_eq!(f, vec![0, 1, 2, -2, -1]);
    }

    #[test]
    fn gradient_direction_rules() {
        let g = GridSpec::new(2, 8).unwrap();
        assert_eq!(g.gradient_direction(&[3, 0]), vec![1.0, 0.0]);
        assert_eq!(g.gradient_direction(&[4, 2]), vec![0.0, 1.0]);
        assert_eq!(g.gradient_direction(&[4, -2]), vec![0.0, -1.0]);
        let p = g.gradient_direction(&[4, 4]);
        assert!(p.iter().all(|x| (x - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15));
        assert_eq!(g.gradient_direction(&[4, 0]), vec![1.0, 0.0]);
        assert_eq!(g.gradient_direction(&[0, 4]), vec![0.0, 1.0]);
        let p = g.gradient_direction(&[3, 4]);
        assert_eq!(p, vec![1.0, 0.0]);
        let q = g.gradient_direction(&[1, 2]);
        assert!((q[0] - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn averaged_inner_product() {
        let g = GridSpec::new(2, 4).unwrap();
        let f = PeriodicField::<f64>::from_fn(g, |x| vec![x[0].sin(), 1.0]);
        assert!((f.inner(&f) - 1.5).abs() < 1e-14);
        assert!((f.average()[0]).abs() < 1e-15);
        assert_eq!(f.average()[1], 1.0);
        let back = PeriodicField::from_coords(g, &f.to_coords()).unwrap();
        assert!(back.rel_diff(&f) < 1e-15);
        assert!((f.to_coords().norm_squared() - 1.5).abs() < 1e-14);
    }
}
