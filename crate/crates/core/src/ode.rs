//! Adaptive one-step integrators for small ODE systems.
//!
//! [`DormandPrince`] is the explicit 5(4) embedded pair used for the strip
//! and annulus shooting problems. [`Sdirk2`] is an L-stable two-stage
//! singly diagonally implicit scheme with step-doubling error control, used
//! where the reduced steady equations are stiff (exterior domain).

use crate::error::{Error, Result};

/// Error tolerances for adaptive stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { atol: 1e-12, rtol: 1e-10 }
    }
}

const MAX_STEPS: usize = 2_000_000;

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], tol: Tolerances) -> f64 {
    let mut acc: f64 = 0.0;
    for i in 0..N {
        let scale = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
        acc = acc.max((err[i] / scale).abs());
    }
    acc
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Explicit adaptive Dormand-Prince 5(4) integrator.
///
/// The step size is carried across calls to [`DormandPrince::advance`], so a
/// solution sampled on a fine output grid does not restart from a tiny step
/// at every node.
#[derive(Debug, Clone)]
pub struct DormandPrince<const N: usize> {
    pub tol: Tolerances,
    step: Option<f64>,
    pub steps_taken: usize,
}

impl<const N: usize> DormandPrince<N> {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol, step: None, steps_taken: 0 }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction),
    /// overwriting `y`.
    pub fn advance<F>(&mut self, f: &mut F, t0: f64, t1: f64, y: &mut [f64; N]) -> Result<()>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let mut t = t0;
        let mut h = self.step.map(f64::abs).unwrap_or(1e-3 * span.abs()).min(span.abs());
        let mut k = [[0.0; N]; 7];
        k[0] = f(t, y)?;
        let mut local_steps = 0usize;
        'steps: loop {
            let remaining = (t1 - t) * dir;
            if remaining <= 1e-15 * span.abs() {
                break;
            }
            let last = h >= remaining;
            let hs = if last { remaining } else { h } * dir;
            for s in 1..7 {
                let mut ys = *y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += hs * a * kj[i];
                        }
                    }
                }
                match f(t + C[s] * hs, &ys) {
                    Ok(v) => k[s] = v,
                    // A trial state outside the admissible set: shrink and retry.
                    Err(e) => {
                        local_steps += 1;
                        h *= 0.25;
                        if h < 1e-14 * span.abs().max(t.abs()) || local_steps > MAX_STEPS {
                            return Err(e);
                        }
                        continue 'steps;
                    }
                }
            }
            let mut y5 = *y;
            let mut err = [0.0; N];
            for i in 0..N {
                let mut s5 = 0.0;
                let mut s4 = 0.0;
                for s in 0..7 {
                    s5 += B5[s] * k[s][i];
                    s4 += B4[s] * k[s][i];
                }
                y5[i] += hs * s5;
                err[i] = hs * (s5 - s4);
            }
            let en = error_norm(&err, y, &y5, self.tol);
            if !en.is_finite() {
                h *= 0.25;
            } else if en <= 1.0 {
                t = if last { t1 } else { t + hs };
                *y = y5;
                k[0] = k[6];
                self.steps_taken += 1;
                if !last {
                    h *= if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                }
                self.step = Some(h);
            } else {
                h *= (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
            }
            local_steps += 1;
            if h < 1e-14 * span.abs().max(t.abs()) || local_steps > MAX_STEPS {
                return Err(Error::StepFailure { r: t, step: h });
            }
        }
        Ok(())
    }
}

/// Two-stage L-stable SDIRK method of order 2 (gamma = 1 - 1/sqrt(2)),
/// with step-doubling error estimation and local extrapolation.
///
/// The stage equations are solved by Newton iteration with a
/// finite-difference Jacobian, which is adequate for the 2- and 3-component
/// systems used here.
#[derive(Debug, Clone)]
pub struct Sdirk2<const N: usize> {
    pub tol: Tolerances,
    step: Option<f64>,
    pub steps_taken: usize,
}

const SDIRK_GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

impl<const N: usize> Sdirk2<N> {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol, step: None, steps_taken: 0 }
    }

    pub fn advance<F>(&mut self, f: &mut F, t0: f64, t1: f64, y: &mut [f64; N]) -> Result<()>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let mut t = t0;
        let mut h = self.step.map(f64::abs).unwrap_or(1e-3 * span.abs()).min(span.abs());
        let mut count = 0usize;
        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= 1e-15 * span.abs() {
                break;
            }
            let last = h >= remaining;
            let hs = if last { remaining } else { h } * dir;
            let attempt = (|| -> Result<([f64; N], f64)> {
                let full = self.single_step(f, t, y, hs)?;
                let half = self.single_step(f, t, y, 0.5 * hs)?;
                let two = self.single_step(f, t + 0.5 * hs, &half, 0.5 * hs)?;
                // Order 2: the error of the two-half-step result is (two - full) / 3.
                let mut err = [0.0; N];
                let mut extrap = two;
                for i in 0..N {
                    err[i] = (two[i] - full[i]) / 3.0;
                    extrap[i] = two[i] + err[i];
                }
                Ok((extrap, error_norm(&err, y, &two, self.tol)))
            })();
            match attempt {
                Ok((ynew, en)) if en.is_finite() && en <= 1.0 => {
                    t = if last { t1 } else { t + hs };
                    *y = ynew;
                    self.steps_taken += 1;
                    if !last {
                        h *= if en == 0.0 { 4.0 } else { (0.9 * en.powf(-1.0 / 3.0)).clamp(0.2, 4.0) };
                    }
                    self.step = Some(h);
                }
                Ok((_, en)) if en.is_finite() => {
                    h *= (0.9 * en.powf(-1.0 / 3.0)).clamp(0.1, 0.9);
                }
                _ => h *= 0.25,
            }
            count += 1;
            if h < 1e-14 * span.abs().max(t.abs()) || count > MAX_STEPS {
                return Err(Error::StepFailure { r: t, step: h });
            }
        }
        Ok(())
    }

    fn single_step<F>(&self, f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let g = SDIRK_GAMMA;
        // Stage 1: K1 = f(t + g h, y + g h K1).
        let k1 = self.solve_stage(f, t + g * h, y, g * h)?;
        let mut base = *y;
        for i in 0..N {
            base[i] += (1.0 - g) * h * k1[i];
        }
        // Stage 2: K2 = f(t + h, base + g h K2); y1 = base + g h K2.
        let k2 = self.solve_stage(f, t + h, &base, g * h)?;
        let mut out = base;
        for i in 0..N {
            out[i] += g * h * k2[i];
        }
        Ok(out)
    }

    /// Solves `z = base + a f(t, z)` for `z` and returns `f(t, z)`.
    fn solve_stage<F>(&self, f: &mut F, t: f64, base: &[f64; N], a: f64) -> Result<[f64; N]>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let mut z = *base;
        let mut fz = f(t, &z)?;
        for iter in 0..30 {
            let mut resid = [0.0; N];
            for i in 0..N {
                resid[i] = z[i] - base[i] - a * fz[i];
            }
            // Jacobian of the residual: I - a df/dz by forward differences.
            let mut jac = [[0.0; N]; N];
            for j in 0..N {
                let dz = 1e-7 * z[j].abs().max(1e-300) + f64::MIN_POSITIVE;
                let mut zp = z;
                zp[j] += dz;
                let fp = f(t, &zp)?;
                for i in 0..N {
                    jac[i][j] = -a * (fp[i] - fz[i]) / dz;
                }
                jac[j][j] += 1.0;
            }
            let delta = solve_dense(jac, resid).ok_or(Error::StepFailure { r: t, step: a })?;
            let mut converged = true;
            for i in 0..N {
                z[i] -= delta[i];
                let scale = self.tol.atol + self.tol.rtol * z[i].abs();
                if delta[i].abs() > 1e-3 * scale {
                    converged = false;
                }
            }
            fz = f(t, &z)?;
            if converged && iter > 0 {
                return Ok(fz);
            }
        }
        Err(Error::StepFailure { r: t, step: a })
    }
}

fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let m = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let mut s = b[row];
        for k in row + 1..N {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}
