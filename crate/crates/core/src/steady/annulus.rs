use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, Geometry};
use crate::ode::{DormandPrince, Tolerances};

use super::strip::strip_constant_lambda;
use super::{residual::steady_residual, uniform_grid, SolverOptions, SteadyFlags, SteadyProfile, VELOCITY_FLOOR};

struct AnnulusOde<'a> {
    eos: &'a Eos,
    nu: f64,
    /// `(r^-)^2 u_B^- rho_B`
    flux: f64,
}

impl AnnulusOde<'_> {
    fn density(&self, r: f64, u: f64) -> f64 {
        self.flux / (r * r * u)
    }

    /// `y = (u, u')`; returns `(u', u'')`.
    fn rhs(&self, r: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        let (u, du) = (y[0], y[1]);
        if !(u > VELOCITY_FLOOR) {
            return Err(Error::BlowDown { r });
        }
        let rho = self.density(r, u);
        if !(rho < self.eos.rho_bar()) {
            return Err(Error::StepFailure { r, step: 0.0 });
        }
        let drho = -rho * (2.0 / r + du / u);
        let convective = self.flux / (r * r) * du;
        let d2u = (self.eos.dp(rho) * drho + convective) / self.nu - 2.0 * (du / r - u / (r * r));
        Ok([du, d2u])
    }

    fn integrate(&self, nodes: &[f64], u0: f64, slope: f64) -> Result<Vec<[f64; 2]>> {
        let mut f = |r: f64, y: &[f64; 2]| self.rhs(r, y);
        let mut solver = DormandPrince::<2>::new(Tolerances::default());
        let mut y = [u0, slope];
        let mut out = Vec::with_capacity(nodes.len());
        out.push(y);
        for w in nodes.windows(2) {
            solver.advance(&mut f, w[0], w[1], &mut y)?;
            if !(y[0] > VELOCITY_FLOOR) {
                return Err(Error::BlowDown { r: w[1] });
            }
            out.push(y);
        }
        Ok(out)
    }

    /// Terminal velocity; collapse of the velocity maps to `-inf`, runaway
    /// growth to `+inf`, so that both fit into a bracketing search.
    fn terminal(&self, a: f64, b: f64, u0: f64, slope: f64) -> f64 {
        match self.integrate(&[a, b], u0, slope) {
            Ok(v) => v[1][0],
            Err(Error::BlowDown { .. }) => f64::NEG_INFINITY,
            Err(_) if slope < 0.0 => f64::NEG_INFINITY,
            Err(_) => f64::INFINITY,
        }
    }
}

/// Shoots on the initial slope `u'(r^-)` of the radial steady equation so
/// that `u(r^+) = u_B^+`.
pub fn solve_annulus_steady(eos: &Eos, bdata: &BoundaryData, geometry: &Geometry, opts: &SolverOptions) -> Result<SteadyProfile> {
    opts.validate()?;
    geometry.validate()?;
    bdata.validate(geometry, eos.rho_bar())?;
    let Geometry::Annulus { r_minus, r_plus } = *geometry else {
        return Err(Error::InvalidParameter("annulus solver needs an annulus geometry".into()));
    };
    let ode = AnnulusOde { eos, nu: bdata.nu(), flux: r_minus * r_minus * bdata.u_b_minus * bdata.rho_b };
    let target = bdata.u_b_plus;
    let tol = opts.tol * target;
    let g = |s: f64| ode.terminal(r_minus, r_plus, bdata.u_b_minus, s) - target;

    // Initial guess from the flat problem with the same data: its slope at
    // the inflow is (p(rho_B) + rho_B u^2 + Lambda) / nu.
    let flat_guess = match super::strip::solve_strip_steady(eos, bdata, &SolverOptions { n_cells: 16, ..*opts }) {
        Ok(p) => (p.parameter - strip_constant_lambda(eos, bdata)) / bdata.nu(),
        Err(_) => 0.0,
    };
    let (slope, nonmonotone) = shoot(&g, flat_guess, tol)?;

    let r = uniform_grid(r_minus, r_plus, opts.n_cells);
    let states = ode.integrate(&r, bdata.u_b_minus, slope)?;
    let u: Vec<f64> = states.iter().map(|y| y[0]).collect();
    let du: Vec<f64> = states.iter().map(|y| y[1]).collect();
    let rho: Vec<f64> = r.iter().zip(&u).map(|(&ri, &ui)| ode.density(ri, ui)).collect();
    let drho: Vec<f64> = (0..r.len()).map(|i| -rho[i] * (2.0 / r[i] + du[i] / u[i])).collect();
    let mut profile = SteadyProfile {
        geometry: *geometry,
        r,
        rho,
        u,
        du,
        drho,
        parameter: slope,
        mass_flux: ode.flux,
        nu: bdata.nu(),
        deficit: None,
        residual_continuity: 0.0,
        residual_momentum: 0.0,
        flags: SteadyFlags { nonmonotone_shooting: nonmonotone, truncation_warning: None },
    };
    let (rc, rm) = steady_residual(&profile, eos);
    profile.residual_continuity = rc;
    profile.residual_momentum = rm;
    Ok(profile)
}

/// Bracketed secant iteration with bisection fallback for a scalar
/// shooting map `g`. Returns the root and whether the samples collected
/// while bracketing were non-monotone.
pub(crate) fn shoot<G: Fn(f64) -> f64>(g: &G, guess: f64, tol: f64) -> Result<(f64, bool)> {
    let g0 = g(guess);
    if g0.abs() <= tol {
        return Ok((guess, false));
    }
    let mut samples = vec![(guess, g0)];
    let mut step = 0.1 * guess.abs().max(1e-6);
    // Expand in both directions until the sign changes.
    let mut bracket = None;
    for _ in 0..80 {
        for s in [guess - step, guess + step] {
            let v = g(s);
            if v.abs() <= tol {
                return Ok((s, false));
            }
            samples.push((s, v));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = samples.windows(2).find(|w| w[0].1.signum() != w[1].1.signum()) {
            bracket = Some((w[0], w[1]));
            break;
        }
        step *= 2.0;
    }
    let Some(((mut a, mut fa), (mut b, mut fb))) = bracket else {
        return Err(Error::BracketFailure("shooting map has no sign change".into()));
    };
    let finite: Vec<f64> = samples.iter().map(|s| s.1).filter(|v| v.is_finite()).collect();
    let nonmonotone = finite.windows(2).any(|w| w[1] < w[0]) && finite.windows(2).any(|w| w[1] > w[0]);

    let mut best = (f64::INFINITY, a);
    for iter in 0..200 {
        let secant = if fa.is_finite() && fb.is_finite() && fa != fb { b - fb * (b - a) / (fb - fa) } else { f64::NAN };
        let mid = 0.5 * (a + b);
        // Every third iterate is a bisection to guarantee bracket shrinkage.
        let s = if secant.is_finite() && secant > a.min(b) && secant < a.max(b) && iter % 3 != 2 { secant } else { mid };
        if s == a || s == b {
            break;
        }
        let fs = g(s);
        if fs.abs() < best.0 {
            best = (fs.abs(), s);
        }
        if fs.abs() <= tol {
            return Ok((s, nonmonotone));
        }
        if fs.signum() == fa.signum() {
            a = s;
            fa = fs;
        } else {
            b = s;
            fb = fs;
        }
    }
    Err(Error::ToleranceFailure { residual: best.0, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::EosSpec;

    #[test]
    fn shoot_finds_cubic_root() {
        let (s, flag) = shoot(&|x: f64| x * x * x - 2.0, 1.0, 1e-14).unwrap();
        assert!((s - 2f64.cbrt()).abs() < 1e-13);
        assert!(!flag);
    }

    #[test]
    fn shoot_flags_nonmonotone_map() {
        let (s, flag) = shoot(&|x: f64| (x - 1.0) * (x - 1.0) - 0.25, 1.0, 1e-12).unwrap();
        assert!(((s - 0.5).abs() < 1e-9) || ((s - 1.5).abs() < 1e-9));
        assert!(flag);
    }

    #[test]
    fn annulus_mass_flux_is_constant() {
        let eos = Eos::new(EosSpec::Isentropic { a: 1.0, gamma: 2.0 }).unwrap();
        let b = BoundaryData { rho_b: 1.0, u_b_minus: 0.1, u_b_plus: 0.12, mu: 15.0, ..Default::default() };
        let g = Geometry::Annulus { r_minus: 2.0, r_plus: 3.0 };
        let p = solve_annulus_steady(&eos, &b, &g, &SolverOptions { n_cells: 512, ..Default::default() }).unwrap();
        assert!(p.mass_flux_deviation() < 1e-10);
        assert!((p.u.last().unwrap() - 0.12).abs() < 1e-10 * 0.12);
        assert!(p.du.iter().all(|&d| d > 0.0));
    }
}
