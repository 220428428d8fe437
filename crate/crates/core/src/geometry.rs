use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial domain of a radially symmetric (or flat) problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Periodic strip `T^2 x (0, 1)`; flow along the last coordinate.
    Strip,
    /// Annulus `r_minus < |x| < r_plus`.
    Annulus { r_minus: f64, r_plus: f64 },
    /// Exterior of the ball of radius `r_bar`, truncated at `r_trunc`.
    Exterior {
        r_bar: f64,
        #[serde(default = "default_truncation")]
        r_trunc: f64,
    },
}

fn default_truncation() -> f64 {
    f64::NAN
}

/// Default truncation radius relative to the obstacle radius.
pub const DEFAULT_TRUNCATION_FACTOR: f64 = 100.0;
/// Smallest admissible truncation radius relative to the obstacle radius.
pub const MIN_TRUNCATION_FACTOR: f64 = 50.0;

impl Geometry {
    /// Weight exponent: `w(r) = r^alpha`.
    pub fn alpha(&self) -> i32 {
        match self {
            Geometry::Strip => 0,
            _ => 2,
        }
    }

    pub fn weight(&self, r: f64) -> f64 {
        match self.alpha() {
            0 => 1.0,
            _ => r * r,
        }
    }

    /// Computational interval `[r_min, r_max]`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Geometry::Strip => (0.0, 1.0),
            Geometry::Annulus { r_minus, r_plus } => (r_minus, r_plus),
            Geometry::Exterior { r_bar, r_trunc } => (r_bar, r_trunc),
        }
    }

    pub fn length(&self) -> f64 {
        let (a, b) = self.bounds();
        b - a
    }

    /// Fills in a missing exterior truncation radius with the default.
    pub fn with_default_truncation(self) -> Self {
        match self {
            Geometry::Exterior { r_bar, r_trunc } if !r_trunc.is_finite() => Geometry::Exterior {
                r_bar,
                r_trunc: DEFAULT_TRUNCATION_FACTOR * r_bar,
            },
            g => g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Geometry::Strip => Ok(()),
            Geometry::Annulus { r_minus, r_plus } => {
                if r_minus > 0.0 && r_plus > r_minus && r_plus.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("annulus requires 0 < r_minus < r_plus".into()))
                }
            }
            Geometry::Exterior { r_bar, r_trunc } => {
                if !(r_bar > 0.0 && r_bar.is_finite()) {
                    return Err(Error::InvalidParameter("exterior requires r_bar > 0".into()));
                }
                if !(r_trunc >= MIN_TRUNCATION_FACTOR * r_bar && r_trunc.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "exterior requires r_trunc >= {MIN_TRUNCATION_FACTOR} r_bar"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Boundary data and viscosity coefficients.
///
/// Strip and annulus use `rho_b`, `u_b_minus`, `u_b_plus`; the exterior
/// problem uses `u_b` and `rho_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BoundaryData {
    pub rho_b: f64,
    pub u_b_minus: f64,
    pub u_b_plus: f64,
    pub u_b: f64,
    pub rho_inf: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl BoundaryData {
    /// Longitudinal viscosity `4 mu / 3 + lambda`.
    pub fn nu(&self) -> f64 {
        4.0 / 3.0 * self.mu + self.lambda
    }

    pub fn validate(&self, geometry: &Geometry, rho_bar: f64) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.mu > 0.0) {
            return bad("boundary.mu must be positive");
        }
        if !(self.lambda >= 0.0) {
            return bad("boundary.lambda must be non-negative");
        }
        match geometry {
            Geometry::Strip | Geometry::Annulus { .. } => {
                if !(self.rho_b > 0.0 && self.rho_b < rho_bar) {
                    return bad("boundary.rho_b must lie in (0, rho_bar)");
                }
                if !(self.u_b_minus > 0.0 && self.u_b_plus > 0.0) {
                    return bad("boundary.u_b_minus and u_b_plus must be positive");
                }
            }
            Geometry::Exterior { .. } => {
                if !(self.rho_inf > 0.0 && self.rho_inf < rho_bar) {
                    return bad("boundary.rho_inf must lie in (0, rho_bar)");
                }
                if !(self.u_b > 0.0) {
                    return bad("boundary.u_b must be positive");
                }
            }
        }
        Ok(())
    }

    /// Speed at which fluid enters the domain.
    pub fn inflow_speed(&self, geometry: &Geometry) -> f64 {
        match geometry {
            Geometry::Exterior { .. } => self.u_b,
            _ => self.u_b_minus,
        }
    }
}

/// Domain length divided by the inflow speed.
pub fn flow_through_time(geometry: &Geometry, bdata: &BoundaryData) -> f64 {
    geometry.length() / bdata.inflow_speed(geometry)
}
