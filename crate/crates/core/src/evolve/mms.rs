use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::steady::linear_fit_slope;

use super::{BoundaryConditions, FaceCondition, FluidState, Grid, Order, Scheme, ViscousTreatment};

/// Smooth manufactured solution
///
/// ```text
/// rho*(r, t) = rho0 (1 + eps_rho sin(2 pi x) cos t)
/// u*(r, t)   = u0 + eps_u sin(pi x) (1 + sin t) / 2
/// ```
///
/// with `x = (r - r_min) / (r_max - r_min)`. The velocity stays positive, so
/// the left face is an inflow face and the right one an outflow face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedCase {
    pub geometry: Geometry,
    pub rho0: f64,
    pub eps_rho: f64,
    pub u0: f64,
    pub eps_u: f64,
    pub nu: f64,
    pub t_end: f64,
    pub cfl: f64,
}

impl ManufacturedCase {
    pub fn new(geometry: Geometry, rho0: f64) -> Self {
        Self { geometry, rho0, eps_rho: 0.1, u0: 0.3, eps_u: 0.2, nu: 0.05, t_end: 0.25, cfl: 0.45 }
    }

    fn x(&self, r: f64) -> (f64, f64) {
        let (a, b) = self.geometry.bounds();
        ((r - a) / (b - a), 1.0 / (b - a))
    }

    /// `(rho, rho_r, rho_t)`.
    fn rho(&self, r: f64, t: f64) -> (f64, f64, f64) {
        let (x, dx) = self.x(r);
        let s = (2.0 * PI * x).sin();
        let c = (2.0 * PI * x).cos();
        let e = self.rho0 * self.eps_rho;
        (self.rho0 + e * s * t.cos(), e * 2.0 * PI * dx * c * t.cos(), -e * s * t.sin())
    }

    /// `(u, u_r, u_rr, u_t)`.
    fn u(&self, r: f64, t: f64) -> (f64, f64, f64, f64) {
        let (x, dx) = self.x(r);
        let s = (PI * x).sin();
        let c = (PI * x).cos();
        let g = 0.5 * (1.0 + t.sin());
        let e = self.eps_u;
        (self.u0 + e * s * g, e * PI * dx * c * g, -e * PI * PI * dx * dx * s * g, e * s * 0.5 * t.cos())
    }

    /// Pointwise residuals of the exact fields, i.e. the source terms.
    pub fn source(&self, eos: &Eos, r: f64, t: f64) -> (f64, f64) {
        let alpha = self.geometry.alpha() as f64;
        let (rho, rho_r, rho_t) = self.rho(r, t);
        let (u, u_r, u_rr, u_t) = self.u(r, t);
        let s_rho = rho_t + rho_r * u + rho * u_r + alpha * rho * u / r;
        let s_m = rho_t * u + rho * u_t + rho_r * u * u + 2.0 * rho * u * u_r + alpha * rho * u * u / r
            + eos.dp(rho) * rho_r
            - self.nu * (u_rr + alpha * (u_r / r - u / (r * r)));
        (s_rho, s_m)
    }

    pub fn exact_state(&self, grid: Arc<Grid>, t: f64) -> FluidState {
        let n = grid.n;
        let rho: Vec<f64> = (0..n).map(|i| grid.cell_average(i, |r| self.rho(r, t).0)).collect();
        let m: Vec<f64> = (0..n).map(|i| grid.cell_average(i, |r| self.rho(r, t).0 * self.u(r, t).0)).collect();
        FluidState { grid, rho, m, t, clamp_events: 0 }
    }

    fn boundary(&self, t: f64) -> BoundaryConditions {
        let (a, b) = self.geometry.bounds();
        BoundaryConditions {
            left: FaceCondition { rho: Some(self.rho(a, t).0), u: self.u(a, t).0 },
            right: FaceCondition { rho: None, u: self.u(b, t).0 },
        }
    }

    /// Runs the scheme with the manufactured sources on `n` cells and returns
    /// the `w`-weighted L1 error of the cell averages (density plus
    /// momentum) at `t_end`.
    pub fn error(&self, eos: &Eos, order: Order, n: usize) -> Result<f64> {
        let grid = Arc::new(Grid::new(self.geometry, n)?);
        let mut state = self.exact_state(grid.clone(), 0.0);
        let mut scheme = Scheme::new(eos, grid.clone(), self.nu, self.boundary(0.0), order, ViscousTreatment::Explicit)
            .with_boundary_fn(move |t| self.boundary(t))
            .with_source(move |t, g: &Grid, s_rho: &mut [f64], s_m: &mut [f64]| {
                for i in 0..g.n {
                    let (a, b) = g.cell_average_pair(i, |r| self.source(eos, r, t));
                    s_rho[i] = a;
                    s_m[i] = b;
                }
            });
        while state.t < self.t_end {
            let dt = scheme.cfl_dt(&state, self.cfl).min(self.t_end - state.t);
            scheme.step(&mut state, dt)?;
        }
        let exact = self.exact_state(grid.clone(), state.t);
        let diff: Vec<f64> =
            (0..n).map(|i| (state.rho[i] - exact.rho[i]).abs() + (state.m[i] - exact.m[i]).abs()).collect();
        Ok(grid.integrate(&diff))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsReport {
    pub order: Order,
    pub cells: Vec<usize>,
    pub errors: Vec<f64>,
    /// Orders between consecutive refinements.
    pub pairwise_orders: Vec<f64>,
    /// Least-squares slope of `-ln(error)` against `ln(n)`.
    pub observed_order: f64,
}

/// Observed L1 convergence order of the scheme on the default
/// manufactured solution over a four-level refinement.
pub fn mms_convergence(eos: &Eos, geometry: &Geometry, order: Order) -> Result<MmsReport> {
    let rho0 = if eos.rho_bar().is_finite() { 0.5 * eos.rho_bar() } else { 1.0 };
    let case = ManufacturedCase::new(*geometry, rho0);
    let cells = vec![32, 64, 128, 256];
    convergence_study(&case, eos, order, &cells)
}

pub fn convergence_study(case: &ManufacturedCase, eos: &Eos, order: Order, cells: &[usize]) -> Result<MmsReport> {
    if cells.len() < 2 {
        return Err(Error::InvalidParameter("a convergence study needs at least two grids".into()));
    }
    let errors = cells.iter().map(|&n| case.error(eos, order, n)).collect::<Result<Vec<_>>>()?;
    let pairwise_orders = errors
        .windows(2)
        .zip(cells.windows(2))
        .map(|(e, n)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect();
    let pts: Vec<(f64, f64)> = cells.iter().zip(&errors).map(|(&n, &e)| ((n as f64).ln(), e.ln())).collect();
    let observed_order = -linear_fit_slope(&pts).unwrap_or(f64::NAN);
    Ok(MmsReport { order, cells: cells.to_vec(), errors, pairwise_orders, observed_order })
}
