//! Finite-volume evolution of the symmetric barotropic Navier-Stokes system
//!
//! ```text
//! rho_t + w^{-1} (w rho u)_r = 0
//! (rho u)_t + w^{-1} (w rho u^2)_r + p(rho)_r = nu (w^{-1} (w u)_r)_r
//! ```
//!
//! with `w = r^alpha`, on a uniform grid of cells whose averages are taken
//! with respect to the measure `w dr`.

mod mms;
mod run;
mod scheme;

pub use mms::{convergence_study, mms_convergence, ManufacturedCase, MmsReport};
pub use run::{initial_state, run, InitialCondition, RunConfig, RunOutcome, RunProgress, RunSummary, Simulation};
pub use scheme::{cfl_dt, reduced_equations_residual, step, Scheme, StepReport};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, Geometry};
use crate::steady::SteadyProfile;

/// Uniform cell-centred grid on the computational interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub geometry: Geometry,
    pub n: usize,
    pub h: f64,
    pub centers: Vec<f64>,
    pub faces: Vec<f64>,
    /// `w` at the faces.
    pub face_w: Vec<f64>,
    /// `w` at the cell centres.
    pub center_w: Vec<f64>,
    /// Mean of `w` over each cell, so that the cell measure is `cell_w * h`.
    pub cell_w: Vec<f64>,
}

impl Grid {
    pub fn new(geometry: Geometry, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParameter("evolution grid needs at least 4 cells".into()));
        }
        let geometry = geometry.with_default_truncation();
        let (a, b) = geometry.bounds();
        let h = (b - a) / n as f64;
        let faces: Vec<f64> = (0..=n).map(|i| if i == n { b } else { a + i as f64 * h }).collect();
        let centers: Vec<f64> = (0..n).map(|i| 0.5 * (faces[i] + faces[i + 1])).collect();
        let face_w: Vec<f64> = faces.iter().map(|&r| geometry.weight(r)).collect();
        let center_w: Vec<f64> = centers.iter().map(|&r| geometry.weight(r)).collect();
        let cell_w: Vec<f64> = match geometry.alpha() {
            0 => vec![1.0; n],
            _ => (0..n).map(|i| (faces[i + 1].powi(3) - faces[i].powi(3)) / (3.0 * h)).collect(),
        };
        Ok(Self { geometry, n, h, centers, faces, face_w, center_w, cell_w })
    }

    /// `w`-weighted average over cell `i` of a function of `r`, by 3-point
    /// Gauss-Legendre quadrature.
    pub fn cell_average<F: Fn(f64) -> f64>(&self, i: usize, f: F) -> f64 {
        const X: f64 = 0.774_596_669_241_483_4;
        const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let c = self.centers[i];
        let half = 0.5 * self.h;
        let mut sum = 0.0;
        for (k, x) in [-X, 0.0, X].iter().enumerate() {
            let r = c + half * x;
            sum += W[k] * f(r) * self.geometry.weight(r);
        }
        sum * half / (self.cell_w[i] * self.h)
    }

    /// [`Grid::cell_average`] of a pair-valued function.
    pub fn cell_average_pair<F: Fn(f64) -> (f64, f64)>(&self, i: usize, f: F) -> (f64, f64) {
        const X: f64 = 0.774_596_669_241_483_4;
        const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let c = self.centers[i];
        let half = 0.5 * self.h;
        let (mut a, mut b) = (0.0, 0.0);
        for (k, x) in [-X, 0.0, X].iter().enumerate() {
            let r = c + half * x;
            let (fa, fb) = f(r);
            let w = W[k] * self.geometry.weight(r);
            a += w * fa;
            b += w * fb;
        }
        let scale = half / (self.cell_w[i] * self.h);
        (a * scale, b * scale)
    }

    /// `sum_i f_i cell_w_i h`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.cell_w).map(|(v, w)| v * w).sum::<f64>() * self.h
    }
}

/// Cell-averaged conservative state.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub grid: Arc<Grid>,
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    pub t: f64,
    /// Density clamps applied since the state was created.
    pub clamp_events: usize,
}

impl FluidState {
    pub fn constant(grid: Arc<Grid>, rho: f64, u: f64) -> Self {
        let n = grid.n;
        Self { grid, rho: vec![rho; n], m: vec![rho * u; n], t: 0.0, clamp_events: 0 }
    }

    /// Cell averages of a steady profile (`rho` and `rho u`).
    pub fn from_profile(grid: Arc<Grid>, profile: &SteadyProfile) -> Self {
        let n = grid.n;
        let mut rho = Vec::with_capacity(n);
        let mut m = Vec::with_capacity(n);
        for i in 0..n {
            rho.push(grid.cell_average(i, |r| profile.sample(r).rho));
            m.push(grid.cell_average(i, |r| {
                let p = profile.sample(r);
                p.rho * p.u
            }));
        }
        Self { grid, rho, m, t: 0.0, clamp_events: 0 }
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.m.iter().zip(&self.rho).map(|(m, r)| m / r).collect()
    }

    /// `int w rho dr`.
    pub fn total_mass(&self) -> f64 {
        self.grid.integrate(&self.rho)
    }

    pub fn is_finite(&self) -> bool {
        self.rho.iter().chain(&self.m).all(|v| v.is_finite())
    }
}

/// Condition imposed at one boundary face: the velocity always, the
/// density only where fluid enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceCondition {
    pub rho: Option<f64>,
    pub u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub left: FaceCondition,
    pub right: FaceCondition,
}

impl BoundaryConditions {
    /// Inflow/outflow conditions of the steady problem.
    ///
    /// Strip/annulus: inflow `(rho_B, u_B^-)` on the left, outflow velocity
    /// `u_B^+` on the right. Exterior: outflow velocity `-u_B` on the
    /// obstacle, and on the truncation face the inflow state of the steady
    /// profile at `r_trunc` (falls back to `(rho_inf, 0)` without a profile).
    pub fn for_problem(geometry: &Geometry, bdata: &BoundaryData, profile: Option<&SteadyProfile>) -> Self {
        match geometry {
            Geometry::Exterior { .. } => {
                let far = match profile {
                    Some(p) => {
                        let n = p.r.len() - 1;
                        FaceCondition { rho: Some(p.rho[n]), u: p.u[n] }
                    }
                    None => FaceCondition { rho: Some(bdata.rho_inf), u: 0.0 },
                };
                Self { left: FaceCondition { rho: None, u: -bdata.u_b }, right: far }
            }
            _ => Self {
                left: FaceCondition { rho: Some(bdata.rho_b), u: bdata.u_b_minus },
                right: FaceCondition { rho: None, u: bdata.u_b_plus },
            },
        }
    }
}

/// Spatial reconstruction order of the convective flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    #[default]
    First,
    Second,
}

/// Time treatment of the viscous term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ViscousTreatment {
    /// SSP-RK2 on the full operator; the time step obeys the parabolic limit.
    #[default]
    Explicit,
    /// Each SSP-RK2 Euler stage is explicit in the convective part and
    /// backward Euler in the viscous part.
    Implicit,
}

/// The steady reference `(rho_s, u_s, rho_s', u_s')` sampled at the cells of
/// a grid, with `rho_s, rho_s u_s` cell-averaged exactly as in
/// [`FluidState::from_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState {
    pub grid: Arc<Grid>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub drho: Vec<f64>,
    pub du: Vec<f64>,
    /// Reference values at the two boundary faces.
    pub face_rho: [f64; 2],
    pub face_u: [f64; 2],
}

impl ReferenceState {
    pub fn from_profile(grid: Arc<Grid>, profile: &SteadyProfile) -> Self {
        let s = FluidState::from_profile(grid.clone(), profile);
        Self::from_state(&s, profile)
    }

    /// Uses the cell values of `state` (e.g. a converged discrete steady
    /// state) and the derivatives of `profile`.
    pub fn from_state(state: &FluidState, profile: &SteadyProfile) -> Self {
        let grid = state.grid.clone();
        let u = state.velocity();
        let mut drho = Vec::with_capacity(grid.n);
        let mut du = Vec::with_capacity(grid.n);
        for &r in &grid.centers {
            let p = profile.sample(r);
            drho.push(p.drho);
            du.push(p.du);
        }
        let (a, b) = grid.geometry.bounds();
        let (pa, pb) = (profile.sample(a), profile.sample(b));
        Self { rho: state.rho.clone(), u, drho, du, face_rho: [pa.rho, pb.rho], face_u: [pa.u, pb.u], grid }
    }

    /// Constant reference (flat, derivative-free).
    pub fn constant(grid: Arc<Grid>, rho: f64, u: f64) -> Self {
        let n = grid.n;
        Self { grid, rho: vec![rho; n], u: vec![u; n], drho: vec![0.0; n], du: vec![0.0; n], face_rho: [rho; 2], face_u: [u; 2] }
    }

    pub fn as_state(&self) -> FluidState {
        FluidState {
            grid: self.grid.clone(),
            rho: self.rho.clone(),
            m: self.rho.iter().zip(&self.u).map(|(r, u)| r * u).collect(),
            t: 0.0,
            clamp_events: 0,
        }
    }

    /// `div u_s` at the cells.
    pub fn div_u(&self) -> Vec<f64> {
        let alpha = self.grid.geometry.alpha() as f64;
        (0..self.grid.n).map(|i| self.du[i] + alpha * self.u[i] / self.grid.centers[i]).collect()
    }
}

/// Density window `[eps, rho_bar - eps]` enforced after every stage.
pub(crate) fn density_window(eos: &Eos) -> (f64, f64) {
    let rho_bar = eos.rho_bar();
    if rho_bar.is_finite() {
        (1e-12 * rho_bar, rho_bar * (1.0 - 1e-12))
    } else {
        (1e-12, f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_cell_weights_sum_to_shell_volume() {
        let g = Grid::new(Geometry::Annulus { r_minus: 1.0, r_plus: 2.0 }, 64).unwrap();
        let vol = g.integrate(&vec![1.0; 64]);
        assert!((vol - 7.0 / 3.0).abs() < 1e-14);
        let avg = g.cell_average(10, |r| r);
        // exact w-weighted mean of r over the cell
        let (a, b) = (g.faces[10], g.faces[11]);
        let exact = (b.powi(4) - a.powi(4)) / 4.0 / ((b.powi(3) - a.powi(3)) / 3.0);
        assert!((avg - exact).abs() < 1e-14);
    }

    #[test]
    fn exterior_bc_without_profile_uses_far_field() {
        let g = Geometry::Exterior { r_bar: 1.0, r_trunc: 50.0 };
        let b = BoundaryData { u_b: 0.01, rho_inf: 1.0, mu: 0.1, ..Default::default() };
        let bc = BoundaryConditions::for_problem(&g, &b, None);
        assert_eq!(bc.left, FaceCondition { rho: None, u: -0.01 });
        assert_eq!(bc.right, FaceCondition { rho: Some(1.0), u: 0.0 });
    }
}
