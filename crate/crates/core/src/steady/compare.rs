use serde::{Deserialize, Serialize};

use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, Geometry};

use super::{linear_fit_slope, solve_annulus_steady, solve_strip_steady, SolverOptions};

/// Distances between the flat profile and the annulus profile on
/// `[r, r + 1]` with the same boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub r: f64,
    pub velocity_c0: f64,
    pub velocity_slope_c0: f64,
    pub density_c0: f64,
}

impl ComparisonRow {
    /// `max|u2 - u1| + max|u2' - u1'|`.
    pub fn c1_distance(&self) -> f64 {
        self.velocity_c0 + self.velocity_slope_c0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// `-d ln(distance) / d ln r`, fitted over all rows with nonzero
    /// distance.
    pub decay_order: Option<f64>,
}

impl ComparisonTable {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].c1_distance() < w[0].c1_distance())
    }
}

/// Solves the flat and the curved problem for every inner radius in
/// `r_list` and tabulates their distance on the shared grid.
pub fn flat_curved_comparison(eos: &Eos, bdata: &BoundaryData, r_list: &[f64], opts: &SolverOptions) -> Result<ComparisonTable> {
    if r_list.iter().any(|&r| !(r >= 2.0)) || r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("r_list must be increasing with entries >= 2".into()));
    }
    let flat = solve_strip_steady(eos, bdata, opts)?;
    let mut rows = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let geometry = Geometry::Annulus { r_minus: r, r_plus: r + 1.0 };
        let curved = solve_annulus_steady(eos, bdata, &geometry, opts)?;
        // Both profiles live on uniform grids with the same number of cells,
        // so node i of one sits at node i of the other after the shift.
        let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        rows.push(ComparisonRow {
            r,
            velocity_c0: max_diff(&curved.u, &flat.u),
            velocity_slope_c0: max_diff(&curved.du, &flat.du),
            density_c0: max_diff(&curved.rho, &flat.rho),
        });
    }
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|row| row.c1_distance() > 0.0).map(|row| (row.r.ln(), row.c1_distance().ln())).collect();
    let decay_order = linear_fit_slope(&pts).map(|s| -s);
    Ok(ComparisonTable { rows, decay_order })
}
