use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, Geometry};
use crate::ode::{DormandPrince, Tolerances};

use super::{residual::steady_residual, uniform_grid, SolverOptions, SteadyFlags, SteadyProfile, VELOCITY_FLOOR};

/// Velocity along the strip for one value of the integration constant.
#[derive(Debug, Clone, PartialEq)]
pub struct StripTrajectory {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub terminal: f64,
}

/// The integration constant for which the constant profile `u = u_B^-`
/// solves the strip equation.
pub fn strip_constant_lambda(eos: &Eos, bdata: &BoundaryData) -> f64 {
    let flux = bdata.rho_b * bdata.u_b_minus;
    -(eos.p(bdata.rho_b) + flux * bdata.u_b_minus)
}

fn strip_rhs(eos: &Eos, bdata: &BoundaryData, lambda: f64, u: f64) -> f64 {
    let flux = bdata.rho_b * bdata.u_b_minus;
    let rho = bdata.rho_b * (bdata.u_b_minus / u);
    (eos.p(rho) + flux * u + lambda) / bdata.nu()
}

fn integrate(eos: &Eos, bdata: &BoundaryData, lambda: f64, nodes: &[f64]) -> Result<Vec<f64>> {
    let rho_bar = eos.rho_bar();
    let mut rhs = |r: f64, y: &[f64; 1]| -> Result<[f64; 1]> {
        let u = y[0];
        if !(u > VELOCITY_FLOOR) {
            return Err(Error::BlowDown { r });
        }
        if bdata.rho_b * (bdata.u_b_minus / u) >= rho_bar {
            // Outside the admissible range: report as an integrator failure so
            // the step is retried with a smaller size.
            return Err(Error::StepFailure { r, step: 0.0 });
        }
        Ok([strip_rhs(eos, bdata, lambda, u)])
    };
    let mut solver = DormandPrince::<1>::new(Tolerances::default());
    let mut y = [bdata.u_b_minus];
    let mut out = Vec::with_capacity(nodes.len());
    out.push(y[0]);
    for w in nodes.windows(2) {
        solver.advance(&mut rhs, w[0], w[1], &mut y).map_err(|e| match e {
            Error::StepFailure { r, .. } if y[0] < 1e3 * VELOCITY_FLOOR => Error::BlowDown { r },
            e => e,
        })?;
        if !(y[0] > VELOCITY_FLOOR) {
            return Err(Error::BlowDown { r: w[1] });
        }
        out.push(y[0]);
    }
    Ok(out)
}

/// Integrates `nu u' = p(rho_B u_B^- / u) + rho_B u_B^- u + Lambda` on
/// `[0, 1]` from `u(0) = u_B^-`, sampling on `n_cells + 1` uniform nodes.
pub fn integrate_strip_velocity(eos: &Eos, bdata: &BoundaryData, lambda: f64, n_cells: usize) -> Result<StripTrajectory> {
    if n_cells == 0 {
        return Err(Error::InvalidParameter("n_cells must be positive".into()));
    }
    let r = uniform_grid(0.0, 1.0, n_cells);
    let u = integrate(eos, bdata, lambda, &r)?;
    let terminal = *u.last().unwrap();
    Ok(StripTrajectory { r, u, terminal })
}

fn terminal_velocity(eos: &Eos, bdata: &BoundaryData, lambda: f64) -> Result<f64> {
    integrate(eos, bdata, lambda, &[0.0, 1.0]).map(|u| u[1])
}

/// Finds the integration constant matching `u(1) = u_B^+` by bisection and
/// returns the sampled profile.
pub fn solve_strip_steady(eos: &Eos, bdata: &BoundaryData, opts: &SolverOptions) -> Result<SteadyProfile> {
    opts.validate()?;
    bdata.validate(&Geometry::Strip, eos.rho_bar())?;
    let target = bdata.u_b_plus;
    if target < bdata.u_b_minus {
        return Err(Error::InvalidParameter("strip problem requires u_b_plus >= u_b_minus".into()));
    }
    let tol = opts.tol * target;
    let lambda = find_lambda(eos, bdata, target, tol)?;
    build_profile(eos, bdata, lambda, opts.n_cells)
}

fn find_lambda(eos: &Eos, bdata: &BoundaryData, target: f64, tol: f64) -> Result<f64> {
    let mut lo = strip_constant_lambda(eos, bdata);
    let g_lo = terminal_velocity(eos, bdata, lo)? - target;
    if g_lo.abs() <= tol {
        return Ok(lo);
    }
    // Upper bracket: the terminal value is increasing in Lambda.
    let mut step = bdata.nu() * (target - bdata.u_b_minus).max(1e-8 * target);
    let mut hi = lo + step;
    let mut found = false;
    for _ in 0..60 {
        let g = terminal_velocity(eos, bdata, hi)? - target;
        if g.abs() <= tol {
            return Ok(hi);
        }
        if g > 0.0 {
            found = true;
            break;
        }
        lo = hi;
        step *= 2.0;
        hi = lo + step;
    }
    if !found {
        return Err(Error::BracketFailure(format!("no Lambda reaches u(1) = {target}")));
    }
    let mut best = (f64::INFINITY, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = terminal_velocity(eos, bdata, mid)? - target;
        if g.abs() < best.0 {
            best = (g.abs(), mid);
        }
        if g.abs() <= tol {
            return Ok(mid);
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::ToleranceFailure { residual: best.0, tol })
}

fn build_profile(eos: &Eos, bdata: &BoundaryData, lambda: f64, n_cells: usize) -> Result<SteadyProfile> {
    let traj = integrate_strip_velocity(eos, bdata, lambda, n_cells)?;
    let flux = bdata.rho_b * bdata.u_b_minus;
    let rho: Vec<f64> = traj.u.iter().map(|&u| bdata.rho_b * (bdata.u_b_minus / u)).collect();
    let du: Vec<f64> = traj.u.iter().map(|&u| strip_rhs(eos, bdata, lambda, u)).collect();
    let drho: Vec<f64> = (0..rho.len()).map(|i| -rho[i] / traj.u[i] * du[i]).collect();
    let mut profile = SteadyProfile {
        geometry: Geometry::Strip,
        r: traj.r,
        rho,
        u: traj.u,
        du,
        drho,
        parameter: lambda,
        mass_flux: flux,
        nu: bdata.nu(),
        deficit: None,
        residual_continuity: 0.0,
        residual_momentum: 0.0,
        flags: SteadyFlags::default(),
    };
    let (rc, rm) = steady_residual(&profile, eos);
    profile.residual_continuity = rc;
    profile.residual_momentum = rm;
    Ok(profile)
}
