//! Exterior steady problem.
//!
//! With the mass flux `M = r^2 rho u < 0` eliminated, the radial steady
//! system becomes a first-order system in the density deficit
//! `delta = rho_inf - rho` and `q = nu div u`:
//!
//! ```text
//! delta' = q r^2 rho^2 / (nu M)
//! q'     = rho u u' - p'(rho) delta'
//! ```
//!
//! Integrated inward it has one fast mode decaying at rate
//! `(c^2 - u^2) rho / (nu |u|)`, which grows like `r^2` and reaches
//! ~1e9 at large radii; an L-stable implicit integrator handles it. Carrying
//! `delta` rather than `rho` keeps full relative precision of the deficit,
//! which falls to ~1e-15 at the truncation radius.

use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, Geometry};
use crate::ode::{Sdirk2, Tolerances};

use super::annulus::shoot;
use super::{geometric_grid, residual::steady_residual, SolverOptions, SteadyFlags, SteadyProfile};

const TOL: Tolerances = Tolerances { atol: 1e-300, rtol: 1e-9 };

struct ExteriorOde<'a> {
    eos: &'a Eos,
    nu: f64,
    rho_inf: f64,
    /// `r^2 rho u`, negative.
    flux: f64,
}

struct Derived {
    rho: f64,
    u: f64,
    du: f64,
    ddelta: f64,
}

impl ExteriorOde<'_> {
    fn new<'a>(eos: &'a Eos, bdata: &BoundaryData, r_trunc: f64, amplitude: f64) -> (ExteriorOde<'a>, [f64; 2]) {
        let rho_inf = bdata.rho_inf;
        let nu = bdata.nu();
        let c2 = eos.dp(rho_inf);
        let u_t = -amplitude / (r_trunc * r_trunc);
        // Far-field asymptotics: Bernoulli balance for the deficit and the
        // r^{-4} decay law for q.
        let delta_t = rho_inf * u_t * u_t / (2.0 * c2);
        let rho_t = rho_inf - delta_t;
        let q_t = -2.0 * nu * u_t.powi(3) / (r_trunc * (c2 - u_t * u_t));
        let ode = ExteriorOde { eos, nu, rho_inf, flux: -amplitude * rho_t };
        (ode, [delta_t, q_t])
    }

    fn derived(&self, r: f64, y: &[f64; 2]) -> Derived {
        let rho = self.rho_inf - y[0];
        let u = self.flux / (r * r * rho);
        let ddelta = y[1] * r * r * rho * rho / (self.nu * self.flux);
        let du = -2.0 * u / r + u * ddelta / rho;
        Derived { rho, u, du, ddelta }
    }

    fn rhs(&self, r: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        let rho = self.rho_inf - y[0];
        if !(rho > 0.0 && rho < self.eos.rho_bar()) {
            return Err(Error::StepFailure { r, step: 0.0 });
        }
        let d = self.derived(r, y);
        let dq = d.rho * d.u * d.du - self.eos.dp(d.rho) * d.ddelta;
        if !dq.is_finite() {
            return Err(Error::StepFailure { r, step: 0.0 });
        }
        Ok([d.ddelta, dq])
    }

    fn integrate(&self, nodes_desc: &[f64], y0: [f64; 2]) -> Result<Vec<[f64; 2]>> {
        let mut f = |r: f64, y: &[f64; 2]| self.rhs(r, y);
        let mut solver = Sdirk2::<2>::new(TOL);
        let mut y = y0;
        let mut out = Vec::with_capacity(nodes_desc.len());
        out.push(y);
        for w in nodes_desc.windows(2) {
            solver.advance(&mut f, w[0], w[1], &mut y)?;
            out.push(y);
        }
        Ok(out)
    }
}

/// Velocity `u(r_bar)` produced by the inward integration for a far-field
/// amplitude `A` (`u ~ -A / r^2`).
pub fn exterior_shooting_map(eos: &Eos, bdata: &BoundaryData, r_bar: f64, r_trunc: f64, amplitude: f64) -> Result<f64> {
    let (ode, y0) = ExteriorOde::new(eos, bdata, r_trunc, amplitude);
    let y = ode.integrate(&[r_trunc, r_bar], y0)?;
    Ok(ode.derived(r_bar, &y[1]).u)
}

fn solve_amplitude(eos: &Eos, bdata: &BoundaryData, r_bar: f64, r_trunc: f64, tol: f64) -> Result<(f64, bool)> {
    let g = |amp: f64| {
        if amp <= 0.0 {
            return bdata.u_b;
        }
        match exterior_shooting_map(eos, bdata, r_bar, r_trunc, amp) {
            Ok(u) => u + bdata.u_b,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    shoot(&g, bdata.u_b * r_bar * r_bar, tol)
}

/// Solves the exterior problem on `[r_bar, r_trunc]` with `u(r_bar) = -u_B`
/// and far-field state `(rho_inf, 0)`.
///
/// The profile is sampled on a geometrically stretched grid: the solution
/// varies on the length scale `r`, so spacing proportional to `r` keeps the
/// discretization error uniform across the decades.
pub fn solve_exterior_steady(eos: &Eos, bdata: &BoundaryData, geometry: &Geometry, opts: &SolverOptions) -> Result<SteadyProfile> {
    opts.validate()?;
    let geometry = geometry.with_default_truncation();
    geometry.validate()?;
    bdata.validate(&geometry, eos.rho_bar())?;
    let Geometry::Exterior { r_bar, r_trunc } = geometry else {
        return Err(Error::InvalidParameter("exterior solver needs an exterior geometry".into()));
    };
    let tol = opts.tol * bdata.u_b;
    let (amplitude, nonmonotone) = solve_amplitude(eos, bdata, r_bar, r_trunc, tol)?;

    let r = geometric_grid(r_bar, r_trunc, opts.n_cells);
    let nodes_desc: Vec<f64> = r.iter().rev().copied().collect();
    let (ode, y0) = ExteriorOde::new(eos, bdata, r_trunc, amplitude);
    let mut states = ode.integrate(&nodes_desc, y0)?;
    states.reverse();

    let n = r.len();
    let (mut rho, mut u, mut du, mut drho, mut deficit) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (ri, y) in r.iter().zip(&states) {
        let d = ode.derived(*ri, y);
        rho.push(d.rho);
        u.push(d.u);
        du.push(d.du);
        drho.push(-d.ddelta);
        deficit.push(y[0]);
    }

    let mut flags = SteadyFlags { nonmonotone_shooting: nonmonotone, truncation_warning: None };
    if opts.check_truncation {
        let (amp2, _) = solve_amplitude(eos, bdata, r_bar, 2.0 * r_trunc, tol)?;
        let (ode2, y02) = ExteriorOde::new(eos, bdata, 2.0 * r_trunc, amp2);
        let y2 = ode2.integrate(&[2.0 * r_trunc, r_bar], y02)?;
        let change = (y2[1][0] - deficit[0]).abs();
        if change > opts.tol * bdata.rho_inf {
            flags.truncation_warning = Some(change);
        }
    }

    let mut profile = SteadyProfile {
        geometry,
        r,
        rho,
        u,
        du,
        drho,
        parameter: amplitude,
        mass_flux: ode.flux,
        nu: bdata.nu(),
        deficit: Some(deficit),
        residual_continuity: 0.0,
        residual_momentum: 0.0,
        flags,
    };
    let (rc, rm) = steady_residual(&profile, eos);
    profile.residual_continuity = rc;
    profile.residual_momentum = rm;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::EosSpec;

    #[test]
    fn far_field_state_is_consistent() {
        let eos = Eos::new(EosSpec::HardSphere { a: 1.0, beta: 3.0, rho_bar: 2.0 }).unwrap();
        let b = BoundaryData { u_b: 0.01, rho_inf: 1.0, mu: 0.1, ..Default::default() };
        let (ode, y0) = ExteriorOde::new(&eos, &b, 100.0, 0.01);
        let d = ode.derived(100.0, &y0);
        assert!((d.u + 0.01 / 1e4).abs() < 1e-18);
        assert!(y0[0] > 0.0 && y0[1] > 0.0);
        // u' ~ 2A / r^3 to leading order
        assert!((d.du / (2.0 * 0.01 / 1e6) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shooting_map_is_decreasing() {
        let eos = Eos::new(EosSpec::HardSphere { a: 1.0, beta: 3.0, rho_bar: 2.0 }).unwrap();
        let b = BoundaryData { u_b: 0.01, rho_inf: 1.0, mu: 0.1, ..Default::default() };
        let u1 = exterior_shooting_map(&eos, &b, 1.0, 50.0, 0.009).unwrap();
        let u2 = exterior_shooting_map(&eos, &b, 1.0, 50.0, 0.011).unwrap();
        assert!(u1 < 0.0 && u2 < u1);
    }
}
