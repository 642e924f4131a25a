use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Phase index (1-based) of every grid cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseMap {
    grid: GridSpec,
    n_phases: usize,
    phases: Vec<usize>,
}

/// On-disk phase map, row-major cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMapJson {
    pub d: usize,
    pub n: usize,
    pub n_phases: usize,
    pub phases: Vec<usize>,
}

impl PhaseMap {
    /// Checks the cell count, the index range and that no phase is empty.
    pub fn new(grid: GridSpec, n_phases: usize, phases: Vec<usize>) -> Result<Self> {
        if n_phases == 0 {
            return Err(Error::InvalidPhaseMap("n_phases must be positive".into()));
        }
        if phases.len() != grid.cells() {
            return Err(Error::InvalidPhaseMap(format!(
                "expected {} cells, found {}",
                grid.cells(),
                phases.len()
            )));
        }
        let mut counts = vec![0usize; n_phases];
        for (cell, &p) in phases.iter().enumerate() {
            if p == 0 || p > n_phases {
                return Err(Error::InvalidPhaseMap(format!(
                    "cell {cell} has phase {p}, outside 1..={n_phases}"
                )));
            }
            counts[p - 1] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidPhaseMap(format!("phase {} is empty", empty + 1)));
        }
        Ok(Self { grid, n_phases, phases })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    pub fn phases(&self) -> &[usize] {
        &self.phases
    }

    pub fn phase(&self, cell: usize) -> usize {
        self.phases[cell]
    }

    /// Volume fractions `f_i` as exact cell-count ratios.
    pub fn fractions(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.n_phases];
        for &p in &self.phases {
            counts[p - 1] += 1;
        }
        let total = self.grid.cells() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }

    pub fn to_json(&self) -> PhaseMapJson {
        PhaseMapJson {
            d: self.grid.d,
            n: self.grid.n,
            n_phases: self.n_phases,
            phases: self.phases.clone(),
        }
    }

    pub fn from_json(doc: PhaseMapJson) -> Result<Self> {
        let grid = GridSpec::new(doc.d, doc.n).map_err(|e| Error::InvalidPhaseMap(e.to_string()))?;
        Self::new(grid, doc.n_phases, doc.phases)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(serde_json::from_str(s)?)
    }
}

/// Test geometries.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Phase 1 where the coordinate along `axis` (1-based) is below
    /// `fraction · N`, phase 2 elsewhere.
    Laminate { axis: usize, fraction: f64 },
    /// Quadrants: phase 1 where both indices fall in the same half.
    Checkerboard,
    /// `phase` on cells at periodic distance below `radius` from `center`
    /// (cell-index units), the other of two phases elsewhere.
    Disk { center: Vec<f64>, radius: f64, phase: usize },
    /// Independent uniform phase per cell from a seeded generator.
    Random { n_phases: usize, seed: u64 },
}

const RANDOM_ATTEMPTS: usize = 1000;

pub fn make_geometry(kind: &Geometry, grid: GridSpec) -> Result<PhaseMap> {
    let cells = grid.cells();
    match kind {
        Geometry::Laminate { axis, fraction } => {
            if *axis == 0 || *axis > grid.d {
                return Err(Error::InvalidArgument(format!("laminate axis {axis} outside 1..={}", grid.d)));
            }
            let width = fraction * grid.n as f64;
            let cut = width.round();
            if (width - cut).abs() > 1e-9 || cut <= 0.0 || cut >= grid.n as f64 {
                return Err(Error::InvalidArgument(format!(
                    "laminate fraction {fraction} is not realizable with two nonempty phases on N = {}",
                    grid.n
                )));
            }
            let cut = cut as usize;
            let phases = (0..cells)
                .map(|c| if grid.multi_index(c)[axis - 1] < cut { 1 } else { 2 })
                .collect();
            PhaseMap::new(grid, 2, phases)
        }
        Geometry::Checkerboard => {
            if grid.d != 2 || !grid.n.is_multiple_of(2) {
                return Err(Error::InvalidArgument(format!(
                    "checkerboard needs d = 2 and even N, got d = {}, N = {}",
                    grid.d, grid.n
                )));
            }
            let half = grid.n / 2;
            let phases = (0..cells)
                .map(|c| {
                    let idx = grid.multi_index(c);
                    if (idx[0] < half) == (idx[1] < half) {
                        1
                    } else {
                        2
                    }
                })
                .collect();
            PhaseMap::new(grid, 2, phases)
        }
        Geometry::Disk { center, radius, phase } => {
            if center.len() != grid.d {
                return Err(Error::InvalidArgument(format!(
                    "disk center has {} coordinates, grid has {}",
                    center.len(),
                    grid.d
                )));
            }
            if !(*phase == 1 || *phase == 2) {
                return Err(Error::InvalidArgument(format!("disk phase must be 1 or 2, got {phase}")));
            }
            let other = 3 - phase;
            let n = grid.n as f64;
            let phases = (0..cells)
                .map(|c| {
                    let dist2: f64 = grid
                        .multi_index(c)
                        .iter()
                        .zip(center)
                        .map(|(&i, &x)| {
                            let delta = (i as f64 - x).rem_euclid(n);
                            let delta = delta.min(n - delta);
                            delta * delta
                        })
                        .sum();
                    if dist2.sqrt() < *radius {
                        *phase
                    } else {
                        other
                    }
                })
                .collect();
            PhaseMap::new(grid, 2, phases)
        }
        Geometry::Random { n_phases, seed } => {
            if *n_phases == 0 || *n_phases > cells {
                return Err(Error::InvalidArgument(format!(
                    "cannot place {n_phases} nonempty phases on {cells} cells"
                )));
            }
            let mut rng = crate::random::rng(*seed);
            for _ in 0..RANDOM_ATTEMPTS {
                let phases: Vec<usize> = (0..cells).map(|_| rng.gen_range(1..=*n_phases)).collect();
                if let Ok(pm) = PhaseMap::new(grid, *n_phases, phases) {
                    return Ok(pm);
                }
            }
            Err(Error::InvalidArgument(format!(
                "random geometry left a phase empty after {RANDOM_ATTEMPTS} attempts"
            )))
        }
    }
}
