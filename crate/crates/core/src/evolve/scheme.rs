use std::sync::Arc;

use crate::eos::Eos;
use crate::error::{Error, Result};

use super::{density_window, BoundaryConditions, FluidState, Grid, Order, ViscousTreatment};

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub dt: f64,
    /// Mass that entered through the boundary faces during the step
    /// (`dt` times the stage-averaged `w rho u` flux difference).
    pub boundary_mass: f64,
    /// Mass added by source terms during the step.
    pub source_mass: f64,
    /// Density clamps applied during the step.
    pub clamp_events: usize,
}

type BoundaryFn<'a> = Box<dyn Fn(f64) -> BoundaryConditions + Send + Sync + 'a>;
type SourceFn<'a> = Box<dyn Fn(f64, &Grid, &mut [f64], &mut [f64]) + Send + Sync + 'a>;

/// Tridiagonal representation of `u -> nu (w^{-1} (w u)_r)_r` on the
/// cells, plus the coefficients multiplying the boundary velocities.
#[derive(Debug, Clone)]
struct ViscousOperator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    left_bc: f64,
    right_bc: f64,
}

impl ViscousOperator {
    fn new(grid: &Grid, nu: f64) -> Self {
        let n = grid.n;
        let h = grid.h;
        let (wc, wf) = (&grid.center_w, &grid.face_w);
        // div u at face k as a combination of (u_{k-2}, u_{k-1}, u_k, u_{k+1}) and the
        // boundary velocity; interior faces use the two adjacent cells, the
        // boundary faces a one-sided three-point formula through the face.
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let s = nu / h;
        for i in 0..n {
            // right face i+1
            if i + 1 < n {
                let c = 1.0 / (h * wf[i + 1]);
                diag[i] += s * (-wc[i] * c);
                upper[i] += s * (wc[i + 1] * c);
            } else {
                let c = 1.0 / (3.0 * h * wf[n]);
                diag[i] += s * (-9.0 * wc[n - 1] * c);
                lower[i] += s * (wc[n - 2] * c);
            }
            // left face i
            if i > 0 {
                let c = 1.0 / (h * wf[i]);
                diag[i] -= s * (wc[i] * c);
                lower[i] += s * (wc[i - 1] * c);
            } else {
                let c = 1.0 / (3.0 * h * wf[0]);
                diag[i] -= s * (9.0 * wc[0] * c);
                upper[i] -= s * (-wc[1] * c);
            }
        }
        let left_bc = s * 8.0 / (3.0 * h);
        let right_bc = s * 8.0 / (3.0 * h);
        Self { lower, diag, upper, left_bc, right_bc }
    }

    fn apply(&self, u: &[f64], ul: f64, ur: f64, out: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            let mut v = self.diag[i] * u[i];
            if i > 0 {
                v += self.lower[i] * u[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * u[i + 1];
            }
            out[i] = v;
        }
        out[0] += self.left_bc * ul;
        out[n - 1] += self.right_bc * ur;
    }

    /// Solves `(diag(rho) - dt A) u = rhs + dt * boundary terms` in place
    /// of `rhs` (Thomas algorithm).
    fn solve(&self, rho: &[f64], dt: f64, ul: f64, ur: f64, rhs: &mut [f64], scratch: &mut [f64]) {
        let n = rhs.len();
        rhs[0] += dt * self.left_bc * ul;
        rhs[n - 1] += dt * self.right_bc * ur;
        // forward sweep; scratch holds the modified upper diagonal
        let mut b0 = rho[0] - dt * self.diag[0];
        scratch[0] = -dt * self.upper[0] / b0;
        rhs[0] /= b0;
        for i in 1..n {
            let a = -dt * self.lower[i];
            b0 = rho[i] - dt * self.diag[i] - a * scratch[i - 1];
            scratch[i] = if i + 1 < n { -dt * self.upper[i] / b0 } else { 0.0 };
            rhs[i] = (rhs[i] - a * rhs[i - 1]) / b0;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i] * rhs[i + 1];
        }
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Finite-volume discretization with its work buffers.
pub struct Scheme<'a> {
    eos: &'a Eos,
    grid: Arc<Grid>,
    nu: f64,
    pub order: Order,
    pub viscous: ViscousTreatment,
    boundary: BoundaryFn<'a>,
    source: Option<SourceFn<'a>>,
    visc: ViscousOperator,
    window: (f64, f64),
    // work arrays
    u: Vec<f64>,
    rho_l: Vec<f64>,
    rho_r: Vec<f64>,
    u_l: Vec<f64>,
    u_r: Vec<f64>,
    f_rho: Vec<f64>,
    f_m: Vec<f64>,
    d_rho: Vec<f64>,
    d_m: Vec<f64>,
    src_rho: Vec<f64>,
    src_m: Vec<f64>,
    visc_out: Vec<f64>,
    scratch: Vec<f64>,
    rho1: Vec<f64>,
    m1: Vec<f64>,
}

impl<'a> Scheme<'a> {
    pub fn new(eos: &'a Eos, grid: Arc<Grid>, nu: f64, bc: BoundaryConditions, order: Order, viscous: ViscousTreatment) -> Self {
        let n = grid.n;
        let visc = ViscousOperator::new(&grid, nu);
        let z = || vec![0.0; n];
        let zf = || vec![0.0; n + 1];
        Self {
            eos,
            nu,
            order,
            viscous,
            boundary: Box::new(move |_| bc),
            source: None,
            visc,
            window: density_window(eos),
            u: z(),
            rho_l: zf(),
            rho_r: zf(),
            u_l: zf(),
            u_r: zf(),
            f_rho: zf(),
            f_m: zf(),
            d_rho: z(),
            d_m: z(),
            src_rho: z(),
            src_m: z(),
            visc_out: z(),
            scratch: z(),
            rho1: z(),
            m1: z(),
            grid,
        }
    }

    /// Replaces the fixed boundary conditions by time-dependent ones.
    pub fn with_boundary_fn(mut self, f: impl Fn(f64) -> BoundaryConditions + Send + Sync + 'a) -> Self {
        self.boundary = Box::new(f);
        self
    }

    /// Adds cell-averaged source terms `(s_rho, s_m)` evaluated at the stage
    /// time.
    pub fn with_source(mut self, f: impl Fn(f64, &Grid, &mut [f64], &mut [f64]) + Send + Sync + 'a) -> Self {
        self.source = Some(Box::new(f));
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn boundary_at(&self, t: f64) -> BoundaryConditions {
        (self.boundary)(t)
    }

    /// Largest stable time step for Courant number `cfl`.
    pub fn cfl_dt(&self, state: &FluidState, cfl: f64) -> f64 {
        cfl_dt_impl(state, self.eos, self.nu, cfl, self.viscous)
    }

    /// Face states of the convective flux: left/right primitive values at
    /// every face.
    fn reconstruct(&mut self, rho: &[f64], m: &[f64], bc: &BoundaryConditions) {
        let n = self.grid.n;
        for i in 0..n {
            self.u[i] = m[i] / rho[i];
        }
        let u = &self.u;
        match self.order {
            Order::First => {
                for i in 0..n {
                    self.rho_l[i + 1] = rho[i];
                    self.u_l[i + 1] = u[i];
                    self.rho_r[i] = rho[i];
                    self.u_r[i] = u[i];
                }
            }
            Order::Second => {
                // ghost values: reflection through the face for imposed
                // values, linear extrapolation for the free density
                let rho_gl = match bc.left.rho {
                    Some(rb) => 2.0 * rb - rho[0],
                    None => 2.0 * rho[0] - rho[1],
                };
                let u_gl = 2.0 * bc.left.u - u[0];
                let rho_gr = match bc.right.rho {
                    Some(rb) => 2.0 * rb - rho[n - 1],
                    None => 2.0 * rho[n - 1] - rho[n - 2],
                };
                let u_gr = 2.0 * bc.right.u - u[n - 1];
                for i in 0..n {
                    let (rm, um) = if i == 0 { (rho_gl, u_gl) } else { (rho[i - 1], u[i - 1]) };
                    let (rp, up) = if i + 1 == n { (rho_gr, u_gr) } else { (rho[i + 1], u[i + 1]) };
                    let sr = 0.5 * minmod(rho[i] - rm, rp - rho[i]);
                    let su = 0.5 * minmod(u[i] - um, up - u[i]);
                    self.rho_r[i] = rho[i] - sr;
                    self.u_r[i] = u[i] - su;
                    self.rho_l[i + 1] = rho[i] + sr;
                    self.u_l[i + 1] = u[i] + su;
                }
            }
        }
        // boundary faces: outer state from the imposed data; a free density
        // is taken from the interior trace
        self.rho_l[0] = bc.left.rho.unwrap_or(self.rho_r[0]);
        self.u_l[0] = bc.left.u;
        self.rho_r[n] = bc.right.rho.unwrap_or(self.rho_l[n]);
        self.u_r[n] = bc.right.u;
    }

    /// Convective right-hand side. Returns the `w`-weighted mass fluxes at
    /// the two boundary faces (into the domain at the left, out at the
    /// right).
    fn convective_rhs(&mut self, rho: &[f64], m: &[f64], bc: &BoundaryConditions) -> (f64, f64) {
        let n = self.grid.n;
        self.reconstruct(rho, m, bc);
        let eos = self.eos;
        for k in 0..=n {
            let (rl, ul, rr, ur) = (self.rho_l[k], self.u_l[k], self.rho_r[k], self.u_r[k]);
            let (pl, pr) = (eos.p(rl), eos.p(rr));
            let s = (ul.abs() + eos.c(rl)).max(ur.abs() + eos.c(rr));
            let (ml, mr) = (rl * ul, rr * ur);
            self.f_rho[k] = 0.5 * (ml + mr) - 0.5 * s * (rr - rl);
            self.f_m[k] = 0.5 * (ml * ul + pl + mr * ur + pr) - 0.5 * s * (mr - ml);
        }
        let g = &*self.grid;
        for i in 0..n {
            let inv = 1.0 / (g.h * g.cell_w[i]);
            let (wl, wr) = (g.face_w[i], g.face_w[i + 1]);
            self.d_rho[i] = -(wr * self.f_rho[i + 1] - wl * self.f_rho[i]) * inv;
            self.d_m[i] = -(wr * self.f_m[i + 1] - wl * self.f_m[i]) * inv + eos.p(rho[i]) * (wr - wl) * inv;
        }
        (g.face_w[0] * self.f_rho[0], g.face_w[n] * self.f_rho[n])
    }

    /// One forward-Euler (or IMEX-Euler) stage from `(rho, m)` at time `t`,
    /// written to `(rho_out, m_out)`.
    #[allow(clippy::too_many_arguments)]
    fn euler_stage(
        &mut self,
        rho: &[f64],
        m: &[f64],
        t: f64,
        dt: f64,
        rho_out: &mut [f64],
        m_out: &mut [f64],
        report: &mut StepReport,
    ) -> Result<()> {
        let n = self.grid.n;
        let bc = (self.boundary)(t);
        let (phi_in, phi_out) = self.convective_rhs(rho, m, &bc);
        report.boundary_mass += 0.5 * dt * (phi_in - phi_out);
        if let Some(src) = &self.source {
            src(t, &self.grid, &mut self.src_rho, &mut self.src_m);
            report.source_mass += 0.5 * dt * self.grid.integrate(&self.src_rho);
            for i in 0..n {
                self.d_rho[i] += self.src_rho[i];
                self.d_m[i] += self.src_m[i];
            }
        }
        for i in 0..n {
            rho_out[i] = rho[i] + dt * self.d_rho[i];
        }
        match self.viscous {
            ViscousTreatment::Explicit => {
                for i in 0..n {
                    self.u[i] = m[i] / rho[i];
                }
                self.visc.apply(&self.u, bc.left.u, bc.right.u, &mut self.visc_out);
                for i in 0..n {
                    m_out[i] = m[i] + dt * (self.d_m[i] + self.visc_out[i]);
                }
            }
            ViscousTreatment::Implicit => {
                let bc_new = (self.boundary)(t + dt);
                for i in 0..n {
                    m_out[i] = m[i] + dt * self.d_m[i];
                }
                self.visc.solve(rho_out, dt, bc_new.left.u, bc_new.right.u, m_out, &mut self.scratch);
                for i in 0..n {
                    m_out[i] *= rho_out[i];
                }
            }
        }
        report.clamp_events += clamp(rho_out, self.window);
        Ok(())
    }

    /// Advances `state` by `dt` with the two-stage SSP Runge-Kutta method.
    pub fn step(&mut self, state: &mut FluidState, dt: f64) -> Result<StepReport> {
        let mut report = StepReport { dt, ..Default::default() };
        let t = state.t;
        let mut rho1 = std::mem::take(&mut self.rho1);
        let mut m1 = std::mem::take(&mut self.m1);
        self.euler_stage(&state.rho, &state.m, t, dt, &mut rho1, &mut m1, &mut report)?;
        let mut rho2 = vec![0.0; state.rho.len()];
        let mut m2 = vec![0.0; state.rho.len()];
        self.euler_stage(&rho1, &m1, t + dt, dt, &mut rho2, &mut m2, &mut report)?;
        for i in 0..state.rho.len() {
            state.rho[i] = 0.5 * (state.rho[i] + rho2[i]);
            state.m[i] = 0.5 * (state.m[i] + m2[i]);
        }
        self.rho1 = rho1;
        self.m1 = m1;
        state.t = t + dt;
        state.clamp_events += report.clamp_events;
        if !state.is_finite() {
            return Err(Error::NonFiniteState { t: state.t });
        }
        Ok(report)
    }
}

fn clamp(rho: &mut [f64], (lo, hi): (f64, f64)) -> usize {
    let mut count = 0;
    for r in rho.iter_mut() {
        if *r < lo {
            *r = lo;
            count += 1;
        } else if *r > hi {
            *r = hi;
            count += 1;
        }
    }
    count
}

fn cfl_dt_impl(state: &FluidState, eos: &Eos, nu: f64, cfl: f64, viscous: ViscousTreatment) -> f64 {
    let h = state.grid.h;
    let mut lam: f64 = 0.0;
    let mut rho_min = f64::INFINITY;
    for (r, m) in state.rho.iter().zip(&state.m) {
        lam = lam.max((m / r).abs() + eos.c(*r));
        rho_min = rho_min.min(*r);
    }
    let convective = h / lam;
    match viscous {
        ViscousTreatment::Explicit if nu > 0.0 => cfl * convective.min(h * h * rho_min / (2.0 * nu)),
        _ => cfl * convective,
    }
}

/// `cfl * min(h / max(|u| + c), h^2 rho_min / (2 nu))`.
pub fn cfl_dt(state: &FluidState, eos: &Eos, nu: f64, cfl: f64) -> f64 {
    cfl_dt_impl(state, eos, nu, cfl, ViscousTreatment::Explicit)
}

/// One explicit step of the first-order scheme with fixed boundary
/// conditions; convenience wrapper around [`Scheme`].
pub fn step(state: &FluidState, eos: &Eos, bc: &BoundaryConditions, nu: f64, dt: f64) -> Result<(FluidState, StepReport)> {
    let mut scheme = Scheme::new(eos, state.grid.clone(), nu, *bc, Order::First, ViscousTreatment::Explicit);
    let mut next = state.clone();
    let report = scheme.step(&mut next, dt)?;
    Ok((next, report))
}

/// Max-norm residuals of the steady reduced equations evaluated on the
/// cell values of `state` with centred second-order differences at the
/// interior cells.
pub fn reduced_equations_residual(state: &FluidState, eos: &Eos, nu: f64) -> (f64, f64) {
    let g = &*state.grid;
    let n = g.n;
    let u = state.velocity();
    let (rho, wc, wf, h) = (&state.rho, &g.center_w, &g.face_w, g.h);
    let div_face = |k: usize| (wc[k] * u[k] - wc[k - 1] * u[k - 1]) / (h * wf[k]);
    let mut rc: f64 = 0.0;
    let mut rm: f64 = 0.0;
    for i in 1..n - 1 {
        let cont = (wc[i + 1] * rho[i + 1] * u[i + 1] - wc[i - 1] * rho[i - 1] * u[i - 1]) / (2.0 * h * wc[i]);
        let conv = (wc[i + 1] * rho[i + 1] * u[i + 1] * u[i + 1] - wc[i - 1] * rho[i - 1] * u[i - 1] * u[i - 1])
            / (2.0 * h * wc[i]);
        let grad_p = (eos.p(rho[i + 1]) - eos.p(rho[i - 1])) / (2.0 * h);
        let visc = nu * (div_face(i + 1) - div_face(i)) / h;
        rc = rc.max(cont.abs());
        rm = rm.max((conv + grad_p - visc).abs());
    }
    (rc, rm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::EosSpec;
    use crate::geometry::Geometry;

    #[test]
    fn viscous_operator_exact_on_linear_flat() {
        // u = r on [0, 1]: (u_r)_r = 0 everywhere, including boundary rows.
        let grid = Grid::new(Geometry::Strip, 16).unwrap();
        let op = ViscousOperator::new(&grid, 1.0);
        let u: Vec<f64> = grid.centers.clone();
        let mut out = vec![0.0; 16];
        op.apply(&u, 0.0, 1.0, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-10), "{out:?}");
    }

    #[test]
    fn viscous_operator_radial_second_order() {
        // u = r^2: w^{-1} (w u)_r = 4 r, derivative 4.
        let err = |n: usize| {
            let grid = Grid::new(Geometry::Annulus { r_minus: 1.0, r_plus: 2.0 }, n).unwrap();
            let op = ViscousOperator::new(&grid, 1.0);
            let u: Vec<f64> = grid.centers.iter().map(|r| r * r).collect();
            let mut out = vec![0.0; n];
            op.apply(&u, 1.0, 4.0, &mut out);
            let interior = out[1..n - 1].iter().map(|v| (v - 4.0).abs()).fold(0.0, f64::max);
            let edge = (out[0] - 4.0).abs().max((out[n - 1] - 4.0).abs());
            (interior, edge)
        };
        let (i1, e1) = err(32);
        let (i2, e2) = err(64);
        assert!(i1 / i2 > 3.5, "{i1} {i2}");
        assert!(e2 < 0.6 * e1 && e2 < 0.1, "{e1} {e2}");
    }

    #[test]
    fn implicit_solve_inverts_operator() {
        let grid = Grid::new(Geometry::Annulus { r_minus: 1.0, r_plus: 2.0 }, 20).unwrap();
        let op = ViscousOperator::new(&grid, 0.7);
        let rho: Vec<f64> = (0..20).map(|i| 1.0 + 0.01 * i as f64).collect();
        let u: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).sin()).collect();
        let dt = 0.05;
        let mut au = vec![0.0; 20];
        op.apply(&u, 0.3, -0.2, &mut au);
        let mut rhs: Vec<f64> = (0..20).map(|i| rho[i] * u[i] - dt * au[i]).collect();
        let mut scratch = vec![0.0; 20];
        op.solve(&rho, dt, 0.3, -0.2, &mut rhs, &mut scratch);
        for i in 0..20 {
            assert!((rhs[i] - u[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cfl_example() {
        let eos = Eos::new(EosSpec::Isentropic { a: 1.0, gamma: 2.0 }).unwrap();
        // c = sqrt(2 rho); rho = 0.5 gives c = 1, u = 1: lambda = 2
        let grid = Arc::new(Grid::new(Geometry::Strip, 100).unwrap());
        let s = FluidState::constant(grid, 0.5, 1.0);
        assert!((cfl_dt(&s, &eos, 1e-12, 0.5) - 0.0025).abs() < 1e-15);
    }
}
