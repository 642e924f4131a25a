//! `realize`: a collection reproducing a normalized pencil, checked on a
//! fixed grid of points in `D`.

use std::f64::consts::PI;

use effop::{realize, Complex64, Factorization, NormalizedPencil, PencilPoint};
use serde::Serialize;

use crate::config::{CliError, CliResult};
use crate::output::{matrix_pairs, Pair};

/// Points of the check grid.
pub const GRID_POINTS: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct RealizeReport {
    pub n: usize,
    pub dim_h0: usize,
    pub dim_h1: usize,
    pub dilation_dim: usize,
    pub ranks: Vec<usize>,
    pub t: Vec<Vec<Pair>>,
    pub grid_points: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Deterministic points in `D`: arguments within `[-π/3, π/3]` of a common
/// rotation, moduli between `1/4` and `8`.
pub fn check_grid(n: usize) -> Vec<PencilPoint> {
    (0..GRID_POINTS)
        .map(|k| {
            let rot = k as f64 * PI / 6.0;
            let z = (0..n)
                .map(|i| {
                    let theta = ((i + k) % 5) as f64 / 4.0 * (2.0 * PI / 3.0) - PI / 3.0;
                    let r = 0.25 * 2f64.powi(((3 * i + k) % 6) as i32);
                    Complex64::from_polar(r, rot + theta)
                })
                .collect();
            PencilPoint::new(z)
        })
        .collect()
}

pub fn run(pencil_json: &str, mode: Factorization, tol: f64) -> CliResult<RealizeReport> {
    let p = NormalizedPencil::<Complex64>::from_json_str(pencil_json, tol)?;
    let real = realize(&p, mode)?;
    let mut worst = 0.0f64;
    for z in check_grid(p.n()) {
        let r = real
            .round_trip_residual(&p, &z)
            .map_err(|e| CliError::Numerical(format!("round trip failed: {e}")))?;
        worst = worst.max(r);
    }
    Ok(RealizeReport {
        n: p.n(),
        dim_h0: p.dim_h0(),
        dim_h1: p.dim_h1(),
        dilation_dim: real.dilation_dim(),
        ranks: real.ranks.clone(),
        t: matrix_pairs(&real.t),
        grid_points: GRID_POINTS,
        max_residual: worst,
        tolerance: tol,
        pass: worst <= tol,
    })
}
