//! Steady radially symmetric (or flat) profiles.

mod annulus;
mod compare;
mod exterior;
mod residual;
mod strip;

pub use annulus::solve_annulus_steady;
pub use compare::{flat_curved_comparison, ComparisonRow, ComparisonTable};
pub use exterior::{exterior_shooting_map, solve_exterior_steady};
pub use residual::{pointwise_residuals, steady_residual};
pub use strip::{integrate_strip_velocity, solve_strip_steady, strip_constant_lambda, StripTrajectory};

use serde::{Deserialize, Serialize};

use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, Geometry};

/// Default number of grid cells of a steady profile.
pub const DEFAULT_CELLS: usize = 4096;
/// Default relative tolerance on the target boundary velocity.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Velocity floor below which the strip/annulus integration is aborted.
pub(crate) const VELOCITY_FLOOR: f64 = 1e-14;

/// Solver knobs shared by the three geometries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative tolerance on the matched boundary velocity.
    pub tol: f64,
    pub n_cells: usize,
    /// Re-solve the exterior problem with a doubled truncation radius and
    /// flag the result if the inner density moves by more than `tol`.
    pub check_truncation: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, n_cells: DEFAULT_CELLS, check_truncation: true }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(Error::InvalidParameter("solver.tol must lie in (0, 1e-2)".into()));
        }
        if self.n_cells < 16 {
            return Err(Error::InvalidParameter("solver.n_cells must be at least 16".into()));
        }
        Ok(())
    }
}

/// Diagnostic flags raised while constructing a profile. None of them is
/// fatal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SteadyFlags {
    /// Terminal value found non-monotone in the shooting parameter.
    pub nonmonotone_shooting: bool,
    /// Exterior only: change of the inner density when the truncation radius
    /// is doubled, if it exceeded the tolerance.
    pub truncation_warning: Option<f64>,
}

/// A steady state sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyProfile {
    pub geometry: Geometry,
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub drho: Vec<f64>,
    /// Strip: integration constant. Annulus: initial slope. Exterior:
    /// far-field amplitude `A` in `u ~ -A / r^2`.
    pub parameter: f64,
    /// `w(r) rho u`, constant along the profile.
    pub mass_flux: f64,
    /// Longitudinal viscosity the profile was computed with.
    pub nu: f64,
    /// Exterior only: `rho_inf - rho` carried at full relative precision.
    pub deficit: Option<Vec<f64>>,
    pub residual_continuity: f64,
    pub residual_momentum: f64,
    pub flags: SteadyFlags,
}

impl SteadyProfile {
    pub fn n_cells(&self) -> usize {
        self.r.len() - 1
    }

    /// Smallest grid spacing (the first cell; grids are uniform or
    /// geometrically stretched outward).
    pub fn spacing(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    /// `div u = u' + alpha u / r` at node `i`.
    pub fn div_u(&self, i: usize) -> f64 {
        match self.geometry.alpha() {
            0 => self.du[i],
            _ => self.du[i] + 2.0 * self.u[i] / self.r[i],
        }
    }

    /// Largest relative deviation of `w rho u` from its nominal value.
    pub fn mass_flux_deviation(&self) -> f64 {
        let scale = self.mass_flux.abs();
        (0..self.r.len())
            .map(|i| (self.geometry.weight(self.r[i]) * self.rho[i] * self.u[i] - self.mass_flux).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Cubic Hermite interpolation of `(rho, u, rho', u')` at `x`.
    /// Points outside the grid are clamped to the end nodes.
    pub fn sample(&self, x: f64) -> ProfilePoint {
        let n = self.r.len() - 1;
        let x = x.clamp(self.r[0], self.r[n]);
        let i = self.r.partition_point(|&ri| ri <= x).saturating_sub(1).min(n - 1);
        let h = self.r[i + 1] - self.r[i];
        let t = (x - self.r[i]) / h;
        let (rho, drho) = hermite(self.rho[i], self.rho[i + 1], self.drho[i], self.drho[i + 1], h, t);
        let (u, du) = hermite(self.u[i], self.u[i + 1], self.du[i], self.du[i + 1], h, t);
        ProfilePoint { rho, u, drho, du }
    }

    /// Relative change in the mass flux relation and the sign/monotonicity
    /// properties the steady theory guarantees.
    pub fn property_report(&self, bdata: &BoundaryData) -> PropertyReport {
        let n = self.r.len();
        let min_du = self.du.iter().copied().fold(f64::INFINITY, f64::min);
        let min_div = (0..n).map(|i| self.div_u(i)).fold(f64::INFINITY, f64::min);
        let min_drho = self.drho.iter().copied().fold(f64::INFINITY, f64::min);
        let max_drho = self.drho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let max_rho = self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_rho = self.rho.iter().copied().fold(f64::INFINITY, f64::min);
        let (u_sign_ok, below_far_field) = match self.geometry {
            Geometry::Exterior { .. } => (
                self.u.iter().all(|&v| v < 0.0),
                Some(self.deficit.as_ref().map_or(max_rho < bdata.rho_inf, |d| d.iter().all(|&x| x > 0.0))),
            ),
            _ => (self.u.iter().all(|&v| v > 0.0), None),
        };
        PropertyReport {
            mass_flux_deviation: self.mass_flux_deviation(),
            min_rho,
            max_rho,
            min_du,
            min_drho,
            max_drho,
            min_div_u: min_div,
            velocity_sign_ok: u_sign_ok,
            below_far_field,
        }
    }
}

/// Interpolated profile values at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub rho: f64,
    pub u: f64,
    pub drho: f64,
    pub du: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub mass_flux_deviation: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub min_du: f64,
    pub min_drho: f64,
    pub max_drho: f64,
    pub min_div_u: f64,
    pub velocity_sign_ok: bool,
    pub below_far_field: Option<bool>,
}

fn hermite(f0: f64, f1: f64, d0: f64, d1: f64, h: f64, t: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1;
    let g00 = 6.0 * t2 - 6.0 * t;
    let g10 = 3.0 * t2 - 4.0 * t + 1.0;
    let g01 = -g00;
    let g11 = 3.0 * t2 - 2.0 * t;
    let slope = (g00 * f0 + g01 * f1) / h + g10 * d0 + g11 * d1;
    (value, slope)
}

pub(crate) fn uniform_grid(a: f64, b: f64, n_cells: usize) -> Vec<f64> {
    let h = (b - a) / n_cells as f64;
    (0..=n_cells).map(|i| if i == n_cells { b } else { a + i as f64 * h }).collect()
}

/// Nodes `a (b/a)^(i/n)`: spacing proportional to the radius.
pub(crate) fn geometric_grid(a: f64, b: f64, n_cells: usize) -> Vec<f64> {
    let ratio = (b / a).ln() / n_cells as f64;
    (0..=n_cells).map(|i| if i == n_cells { b } else { a * (i as f64 * ratio).exp() }).collect()
}

/// Solves the steady problem for whichever geometry is given.
pub fn solve_steady(eos: &Eos, geometry: &Geometry, bdata: &BoundaryData, opts: &SolverOptions) -> Result<SteadyProfile> {
    match geometry {
        Geometry::Strip => solve_strip_steady(eos, bdata, opts),
        Geometry::Annulus { .. } => solve_annulus_steady(eos, bdata, geometry, opts),
        Geometry::Exterior { .. } => solve_exterior_steady(eos, bdata, geometry, opts),
    }
}

/// Least-squares slope of `ln|y|` against `ln x` over the nodes with
/// `lo <= x <= hi`.
pub fn loglog_slope(x: &[f64], y: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&xi, &yi)| xi >= lo && xi <= hi && yi != 0.0 && yi.is_finite())
        .map(|(&xi, &yi)| (xi.ln(), yi.abs().ln()))
        .collect();
    linear_fit_slope(&pts)
}

pub(crate) fn linear_fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Exponents of the far-field decay fitted over the outer decade
/// `[r_trunc / 10, r_trunc]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayExponents {
    pub density_deficit: f64,
    pub velocity: f64,
    pub velocity_slope: f64,
}

pub fn exterior_decay_exponents(profile: &SteadyProfile) -> Option<DecayExponents> {
    let deficit = profile.deficit.as_ref()?;
    let hi = *profile.r.last()?;
    let lo = hi / 10.0;
    Some(DecayExponents {
        density_deficit: loglog_slope(&profile.r, deficit, lo, hi)?,
        velocity: loglog_slope(&profile.r, &profile.u, lo, hi)?,
        velocity_slope: loglog_slope(&profile.r, &profile.du, lo, hi)?,
    })
}
